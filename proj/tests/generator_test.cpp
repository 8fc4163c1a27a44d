#include <gtest/gtest.h>
#include <set>

#include "hardneg/generator.hpp"
#include "hardneg/log.hpp"
#include "support/scripted.hpp"

using namespace hardneg;
using namespace hardneg::generation;
using hardneg::scripted::mock_config;

namespace {

keywords::KeywordPair pair_of(std::vector<std::string> m) { return {std::move(m)}; }

llm::Gateway gateway_with(std::vector<llm::MockEntry> script) {
  return llm::Gateway(mock_config(), std::make_shared<llm::MockBackend>(std::move(script)));
}

corpus::IntentDataset toy() {
  return corpus::load_dataset(std::string(HARDNEG_FIXTURES) + "/toy.jsonl",
                              corpus::Format::kCanonical);
}

keywords::KeywordProfile profile(const std::string& intent, std::vector<std::string> lemmas) {
  keywords::KeywordProfile p;
  p.intent = intent;
  uint64_t c = 100;
  for (auto& l : lemmas) p.keywords.push_back({std::move(l), c--});
  p.n = p.keywords.size();
  return p;
}

}  // namespace

TEST(Containment, TableOneExample) {
  EXPECT_TRUE(containment_check("are french and english official languages in canada",
                                pair_of({"french", "english"})));
}

TEST(Containment, MissingMember) {
  EXPECT_FALSE(containment_check("what time is it", pair_of({"time", "open"})));
  EXPECT_EQ(missing_keywords("what time is it", pair_of({"time", "open"})),
            std::vector<std::string>{"open"});
}

TEST(Containment, InflectedForms) {
  EXPECT_TRUE(containment_check("tracking my sent cards", pair_of({"track", "sent"})));
  EXPECT_TRUE(containment_check("where are the cards", pair_of({"card"})));
  EXPECT_TRUE(containment_check("the children played", pair_of({"child", "play"})));
  EXPECT_FALSE(containment_check("a cardinal", pair_of({"card"})));
}

TEST(Normalize, LowercasesAndStripsTerminalPunctuation) {
  EXPECT_EQ(normalize_utterance("  How do I find and locate a lost pet?  "),
            "how do i find and locate a lost pet");
  EXPECT_EQ(normalize_utterance("Really?!."), "really");
  EXPECT_EQ(normalize_utterance("e.g. this"), "e.g. this");
}

TEST(GenerateCandidate, TableOnePair) {
  auto gw = gateway_with({{std::nullopt, "How do I find and locate a lost pet?", "c"}});
  auto conv = gw.new_conversation("sys", "c");
  std::unordered_set<std::string> seen;
  auto rec = generate_candidate(conv, PromptTemplates{}, "toy", "find_phone",
                                pair_of({"find", "locate"}), "find_phone#000.0", seen, 1.0);
  EXPECT_EQ(rec.text, "how do i find and locate a lost pet");
  EXPECT_EQ(rec.status, Status::kGenerated);
  EXPECT_EQ(rec.transcript_ref, "c");
  EXPECT_TRUE(seen.contains(rec.text));
  // One user turn, asking for both keywords.
  ASSERT_EQ(conv.messages().size(), 3u);
  EXPECT_NE(conv.messages()[1].content.find("\"find\" and \"locate\""), std::string::npos);
  EXPECT_NE(conv.messages()[1].content.find("find_phone"), std::string::npos);
}

TEST(GenerateCandidate, MissingKeywordAfterRetry) {
  auto gw = gateway_with({{std::nullopt, "Where is my lost pet?", "c"},
                          {"must contain", "Where could my pet be?", "c"}});
  auto conv = gw.new_conversation("sys", "c");
  std::unordered_set<std::string> seen;
  auto rec = generate_candidate(conv, PromptTemplates{}, "toy", "find_phone",
                                pair_of({"find", "locate"}), "r", seen, 1.0);
  EXPECT_EQ(rec.status, Status::kFailedContainment);
  EXPECT_NE(rec.reason.find("find"), std::string::npos);
  EXPECT_TRUE(seen.empty());
}

TEST(GenerateCandidate, RetryRecovers) {
  auto gw = gateway_with({{std::nullopt, "Where is my lost pet?", "c"},
                          {"must contain", "Can I find and locate my pet?", "c"}});
  auto conv = gw.new_conversation("sys", "c");
  std::unordered_set<std::string> seen;
  auto rec = generate_candidate(conv, PromptTemplates{}, "toy", "find_phone",
                                pair_of({"find", "locate"}), "r", seen, 1.0);
  EXPECT_EQ(rec.status, Status::kGenerated);
  EXPECT_EQ(rec.text, "can i find and locate my pet");
  EXPECT_EQ(conv.messages().size(), 5u);
}

TEST(GenerateCandidate, DuplicateIsRejected) {
  auto gw = gateway_with({{std::nullopt, "find and locate a pet", "c"},
                          {std::nullopt, "Find and locate a pet.", "c"},
                          {std::nullopt, "find and locate a pet!", "c"}});
  auto conv = gw.new_conversation("sys", "c");
  std::unordered_set<std::string> seen;
  auto first = generate_candidate(conv, PromptTemplates{}, "toy", "i", pair_of({"find", "locate"}),
                                  "a", seen, 1.0);
  auto second = generate_candidate(conv, PromptTemplates{}, "toy", "i",
                                   pair_of({"find", "locate"}), "b", seen, 1.0);
  EXPECT_EQ(first.status, Status::kGenerated);
  EXPECT_EQ(second.status, Status::kFailedContainment);
  EXPECT_NE(second.reason.find("duplicate"), std::string::npos);
}

TEST(GenerateCandidate, GatewayFailureMarksFailed) {
  auto gw = gateway_with({});
  auto conv = gw.new_conversation("sys", "c");
  std::unordered_set<std::string> seen;
  auto rec = generate_candidate(conv, PromptTemplates{}, "toy", "i", pair_of({"a", "b"}), "r",
                                seen, 1.0);
  EXPECT_EQ(rec.status, Status::kFailed);
  EXPECT_NE(rec.reason.find("exhausted"), std::string::npos);
  EXPECT_TRUE(llm::well_formed(conv.messages()));
}

TEST(SeedIntent, AppendsOneExchange) {
  auto gw = gateway_with({{"translate", "OK", "c"}});
  auto conv = gw.new_conversation("sys", "c");
  log::ScopedCapture cap;
  seed_intent_context(conv, PromptTemplates{}, "translate", {"a", "b", "c", "d", "e"}, 5, 1.0);
  EXPECT_EQ(conv.messages().size(), 3u);
  EXPECT_NE(conv.messages()[1].content.find("5. e"), std::string::npos);
  EXPECT_TRUE(cap.warnings().empty());
}

TEST(SeedIntent, FewSamplesWarns) {
  auto gw = gateway_with({{std::nullopt, "OK", "c"}});
  auto conv = gw.new_conversation("sys", "c");
  log::ScopedCapture cap;
  seed_intent_context(conv, PromptTemplates{}, "translate", {"a", "b", "c"}, 5, 1.0);
  EXPECT_EQ(conv.messages().size(), 3u);
  ASSERT_EQ(cap.warnings().size(), 1u);
  EXPECT_NE(cap.warnings()[0].find("3 of 5"), std::string::npos);
}

TEST(GenerateForIntent, FiveKeywordsGiveFortyRecords) {
  auto ds = toy();
  auto prof = profile("find_phone", {"phone", "find", "locate", "lost", "ring"});
  GenerationParams params;
  auto gw = gateway_with(scripted::generation_script(ds, {prof}, params));
  GenerateRequest req{&ds, ds.ids(), params, {}, 13, 1.0};
  auto run = generate_for_intent(req, 2, prof, gw);
  ASSERT_EQ(run.records.size(), 40u);
  std::set<std::string> texts;
  for (const auto& r : run.records) {
    EXPECT_EQ(r.status, Status::kGenerated) << r.id << " " << r.reason;
    EXPECT_TRUE(containment_check(r.text, pair_of(r.pair)));
    EXPECT_EQ(r.transcript_ref, "gen-0002-find_phone");
    texts.insert(r.text);
  }
  EXPECT_EQ(texts.size(), 40u);
  EXPECT_EQ(run.records.front().id, "find_phone#000.0");
  EXPECT_EQ(run.records.back().id, "find_phone#009.3");
  EXPECT_EQ(run.records.back().pair, (std::vector<std::string>{"lost", "ring"}));
  // system + seed exchange + 40 exchanges
  EXPECT_EQ(run.transcript.size(), 1u + 2u + 80u);
  EXPECT_TRUE(llm::well_formed(run.transcript));
}

TEST(GenerateForIntent, FourKeywordsAtMostTwentyFour) {
  auto ds = toy();
  auto prof = profile("balance", {"balance", "bank", "account", "money"});
  GenerationParams params;
  auto gw = gateway_with(scripted::generation_script(ds, {prof}, params));
  GenerateRequest req{&ds, ds.ids(), params, {}, 13, 1.0};
  auto run = generate_for_intent(req, 0, prof, gw);
  EXPECT_EQ(run.records.size(), 24u);
  EXPECT_EQ(params.candidate_ceiling(4), 24u);
  EXPECT_EQ(params.candidate_ceiling(9), 40u);
  EXPECT_EQ(params.candidate_ceiling(1), 0u);
}

TEST(GenerateForIntent, SeedFailureFailsEveryRecord) {
  auto ds = toy();
  auto prof = profile("balance", {"balance", "bank", "account"});
  auto gw = gateway_with({});
  GenerateRequest req{&ds, ds.ids(), {}, {}, 13, 1.0};
  auto run = generate_for_intent(req, 0, prof, gw);
  ASSERT_EQ(run.records.size(), 12u);
  for (const auto& r : run.records) {
    EXPECT_EQ(r.status, Status::kFailed);
    EXPECT_NE(r.reason.find("intent context"), std::string::npos);
  }
}

TEST(GenerateForIntent, SamplesComeFromTrainingSplitOnly) {
  auto ds = toy();
  std::vector<std::string> train;
  for (const auto& u : ds.utterances)
    if (u.intent == "translate" && train.size() < 2) train.push_back(u.id);
  std::unordered_set<std::string> train_set(train.begin(), train.end());
  auto picked = sample_intent_examples(ds, train_set, "translate", 5, 13);
  ASSERT_EQ(picked.size(), 2u);
  for (const auto& p : picked)
    EXPECT_TRUE(p == ds.utterances[6].text || p == ds.utterances[7].text);
  EXPECT_EQ(picked, sample_intent_examples(ds, train_set, "translate", 5, 13));
}

TEST(GenerateAll, ParallelMatchesSequential) {
  auto ds = toy();
  auto profiles = keywords::mine_keywords(ds, ds.ids(), 5);
  GenerationParams params;
  auto script = scripted::generation_script(ds, profiles, params);
  GenerateRequest req{&ds, ds.ids(), params, {}, 13, 1.0};
  auto gw1 = gateway_with(script);
  auto gw4 = gateway_with(script);
  auto seq = generate_all(req, profiles, gw1, 1);
  auto par = generate_all(req, profiles, gw4, 4);
  ASSERT_EQ(seq.size(), profiles.size());
  for (size_t i = 0; i < seq.size(); ++i) {
    EXPECT_EQ(seq[i].records, par[i].records);
    EXPECT_EQ(seq[i].transcript, par[i].transcript);
  }
  EXPECT_EQ(std::dynamic_pointer_cast<llm::MockBackend>(gw1.backend())->remaining(), 0u);
}

TEST(GenerateAll, RejectsUnknownIntentAndBadParams) {
  auto ds = toy();
  auto gw = gateway_with({});
  GenerateRequest req{&ds, ds.ids(), {}, {}, 13, 1.0};
  EXPECT_THROW(generate_all(req, {profile("nope", {"a", "b"})}, gw, 1), ContractError);
  req.params.m = 6;
  EXPECT_THROW(generate_all(req, {}, gw, 1), ConfigError);
}
