#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "hardneg/curator.hpp"

using namespace hardneg;
using namespace hardneg::curation;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hardneg_curator_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

GenerationRecord survivor(const std::string& id, const std::string& dataset = "toy") {
  GenerationRecord r;
  r.id = id;
  r.dataset = dataset;
  r.intent = "find_phone";
  r.pair = {"find", "locate"};
  r.text = "candidate " + id;
  r.transcript_ref = "gen-0002-find_phone";
  r.verdicts = {{VerifyStep::kStep1, "q1", "No", Verdict::kUnrelated},
                {VerifyStep::kStep2, "q2", "No", Verdict::kUnrelated}};
  r.status = Status::kPassedStep2;
  return r;
}

ReviewDecision dec(const std::string& id, Decision d, const std::string& who = "ann") {
  return {id, d, who, {}};
}

}  // namespace

TEST(Review, AcceptAllThree) {
  TempDir tmp;
  DecisionStore store(tmp.path / "decisions.jsonl");
  std::vector<GenerationRecord> rs{survivor("a"), survivor("b"), survivor("c")};
  std::istringstream in("a\na\na\n");
  std::ostringstream out;
  auto outcome = review_session(rs, {{"find_phone", {"where is my phone"}}}, store, "ann", in, out);
  EXPECT_FALSE(outcome.quit);
  EXPECT_EQ(outcome.recorded.size(), 3u);
  EXPECT_NE(out.str().find("where is my phone"), std::string::npos);
  EXPECT_NE(out.str().find("find, locate"), std::string::npos);
  auto asm_ = assemble_dataset(rs, store.decisions(), {});
  EXPECT_EQ(asm_.dataset.utterances.size(), 3u);
  for (const auto& u : asm_.dataset.utterances) EXPECT_EQ(u.intent, "oos");
}

TEST(Review, UndecidedIsExcluded) {
  std::vector<GenerationRecord> rs{survivor("a"), survivor("b")};
  auto asm_ = assemble_dataset(rs, {dec("a", Decision::kUndecided), dec("b", Decision::kAccept)}, {});
  ASSERT_EQ(asm_.dataset.utterances.size(), 1u);
  EXPECT_EQ(asm_.dataset.utterances[0].id, "b");
  EXPECT_EQ(asm_.records[0].status, Status::kDiscardedReview);
  // auto-accept does not override an explicit undecided
  AssembleOptions opts;
  opts.auto_accept = true;
  EXPECT_EQ(assemble_dataset(rs, {dec("a", Decision::kUndecided)}, opts).dataset.utterances.size(),
            1u);
}

TEST(Review, BadKeysAreReaskedAndQuitStops) {
  TempDir tmp;
  DecisionStore store(tmp.path / "d.jsonl");
  std::vector<GenerationRecord> rs{survivor("a"), survivor("b")};
  std::istringstream in("x\nr\nq\n");
  std::ostringstream out;
  auto outcome = review_session(rs, {}, store, "ann", in, out);
  EXPECT_TRUE(outcome.quit);
  ASSERT_EQ(outcome.recorded.size(), 1u);
  EXPECT_EQ(outcome.recorded[0], dec("a", Decision::kReject));
  EXPECT_NE(out.str().find("unrecognized key 'x'"), std::string::npos);
}

TEST(Review, ResumesWithoutLosingOrDuplicating) {
  TempDir tmp;
  const auto path = tmp.path / "d.jsonl";
  std::vector<GenerationRecord> rs{survivor("a"), survivor("b"), survivor("c")};
  {
    DecisionStore store(path);
    std::istringstream in("a\n");  // input ends: the session is interrupted
    std::ostringstream out;
    EXPECT_TRUE(review_session(rs, {}, store, "ann", in, out).quit);
  }
  {
    DecisionStore store(path);
    EXPECT_EQ(store.decisions().size(), 1u);
    std::istringstream in("r\nu\n");
    std::ostringstream out;
    auto outcome = review_session(rs, {}, store, "ann", in, out);
    EXPECT_EQ(outcome.recorded.size(), 2u);
    EXPECT_NE(out.str().find("2 record(s) to review"), std::string::npos);
  }
  DecisionStore store(path);
  EXPECT_EQ(store.decisions(),
            (std::vector<ReviewDecision>{dec("a", Decision::kAccept), dec("b", Decision::kReject),
                                         dec("c", Decision::kUndecided)}));
}

TEST(DecisionStoreTest, TruncatedLastLineIsDropped) {
  TempDir tmp;
  const auto path = tmp.path / "d.jsonl";
  write_file_atomic(path,
                    "{\"record\":\"a\",\"decision\":\"accept\",\"reviewer\":\"ann\"}\n"
                    "{\"record\":\"b\",\"decision\":\"rej");
  log::ScopedCapture cap;
  DecisionStore store(path);
  EXPECT_EQ(store.decisions().size(), 1u);
  EXPECT_EQ(cap.warnings().size(), 1u);
  store.append(dec("b", Decision::kReject));
  DecisionStore reopened(path);
  EXPECT_EQ(reopened.decisions().size(), 2u);
}

TEST(DecisionStoreTest, CorruptMiddleLineIsAnError) {
  TempDir tmp;
  const auto path = tmp.path / "d.jsonl";
  write_file_atomic(path, "{oops\n{\"record\":\"a\",\"decision\":\"accept\",\"reviewer\":\"x\"}\n");
  EXPECT_THROW(DecisionStore{path}, ParseError);
}

TEST(DecisionStoreTest, LastDecisionWinsPerReviewer) {
  auto d = dedupe_decisions({dec("a", Decision::kAccept), dec("a", Decision::kReject, "bo"),
                             dec("a", Decision::kReject)});
  EXPECT_EQ(d, (std::vector<ReviewDecision>{dec("a", Decision::kReject),
                                            dec("a", Decision::kReject, "bo")}));
}

TEST(ConsensusTest, QuorumRules) {
  EXPECT_EQ(consensus({}, 1), Consensus::kPending);
  EXPECT_EQ(consensus({dec("a", Decision::kAccept)}, 1), Consensus::kAccepted);
  EXPECT_EQ(consensus({dec("a", Decision::kAccept)}, 2), Consensus::kPending);
  EXPECT_EQ(consensus({dec("a", Decision::kAccept), dec("a", Decision::kAccept, "bo")}, 2),
            Consensus::kAccepted);
  EXPECT_EQ(consensus({dec("a", Decision::kAccept), dec("a", Decision::kReject, "bo")}, 2),
            Consensus::kRejected);
  EXPECT_EQ(consensus({dec("a", Decision::kReject)}, 2), Consensus::kRejected);
  EXPECT_EQ(consensus({dec("a", Decision::kAccept), dec("a", Decision::kUndecided, "bo")}, 2),
            Consensus::kNoConsensus);
}

TEST(Assemble, TwoAcceptedOneRejected) {
  std::vector<GenerationRecord> rs{survivor("a"), survivor("b"), survivor("c")};
  auto out = assemble_dataset(
      rs, {dec("a", Decision::kAccept), dec("b", Decision::kReject), dec("c", Decision::kAccept)},
      {});
  ASSERT_EQ(out.dataset.utterances.size(), 2u);
  EXPECT_EQ(out.dataset.utterances[1].text, "candidate c");
  ASSERT_EQ(out.provenance.size(), 2u);
  EXPECT_EQ(out.provenance[0].target_intent, "find_phone");
  EXPECT_EQ(out.provenance[0].pair, (std::vector<std::string>{"find", "locate"}));
  EXPECT_EQ(out.provenance[0].transcript_ref, "gen-0002-find_phone");
  EXPECT_EQ(out.provenance[0].verification_refs, (std::vector<std::string>{"s1-a", "s2-a"}));
  EXPECT_EQ(out.records[1].status, Status::kDiscardedReview);
}

TEST(Assemble, PendingWithoutAutoAcceptIsIncomplete) {
  std::vector<GenerationRecord> rs{survivor("a"), survivor("b")};
  try {
    assemble_dataset(rs, {dec("a", Decision::kAccept)}, {});
    FAIL() << "expected IncompleteError";
  } catch (const IncompleteError& e) {
    EXPECT_EQ(e.ids(), std::vector<std::string>{"b"});
  }
  AssembleOptions opts;
  opts.auto_accept = true;
  EXPECT_EQ(assemble_dataset(rs, {}, opts).dataset.utterances.size(), 2u);
}

TEST(Assemble, EmptyAcceptedSetWarns) {
  log::ScopedCapture cap;
  auto out = assemble_dataset({survivor("a")}, {dec("a", Decision::kReject)}, {});
  EXPECT_TRUE(out.dataset.utterances.empty());
  ASSERT_EQ(cap.warnings().size(), 1u);
}

TEST(Assemble, OnlyStepTwoSurvivorsAreConsidered) {
  auto early = survivor("x");
  early.status = Status::kDiscardedStep1;
  AssembleOptions opts;
  opts.auto_accept = true;
  auto out = assemble_dataset({early, survivor("a")}, {dec("x", Decision::kAccept)}, opts);
  ASSERT_EQ(out.dataset.utterances.size(), 1u);
  EXPECT_EQ(out.dataset.utterances[0].id, "a");
}

TEST(Funnel, DegenerateAllFailedContainment) {
  std::vector<GenerationRecord> rs(12, survivor("z"));
  for (auto& r : rs) r.status = Status::kFailedContainment;
  auto rep = funnel_report(rs, {});
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].total_prompted, 12u);
  EXPECT_EQ(rep.rows[0].generated, 0u);
  EXPECT_EQ(rep.rows[0].after_step1, 0u);
  EXPECT_EQ(rep.rows[0].after_step2, 0u);
  EXPECT_EQ(rep.rows[0].final_count, 0u);
}

TEST(Funnel, MonotoneUnderRandomLegalHistories) {
  std::mt19937_64 rng(3);
  const Status starts[] = {Status::kFailed, Status::kFailedContainment, Status::kGenerated};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GenerationRecord> rs;
    std::vector<ReviewDecision> ds;
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      auto r = survivor("r" + std::to_string(i), (rng() & 1) ? "A" : "B");
      r.status = starts[rng() % 3];
      // walk forward through random legal transitions
      for (int step = 0; step < 3; ++step) {
        std::vector<Status> next;
        for (const auto& [s, _] : kStatusNames)
          if (legal_transition(r.status, s)) next.push_back(s);
        if (next.empty() || rng() % 4 == 0) break;
        r.advance(next[rng() % next.size()]);
      }
      if (r.status == Status::kPassedStep2 && rng() % 2)
        ds.push_back(dec(r.id, static_cast<Decision>(rng() % 3)));
      rs.push_back(r);
    }
    auto rep = funnel_report(rs, ds);
    uint64_t total = 0;
    for (const auto& row : rep.rows) {
      EXPECT_GE(row.total_prompted, row.generated);
      EXPECT_GE(row.generated, row.after_step1);
      EXPECT_GE(row.after_step1, row.after_step2);
      EXPECT_GE(row.after_step2, row.final_count);
      total += row.total_prompted;
    }
    EXPECT_EQ(rep.overall.total_prompted, total);
    EXPECT_EQ(total, static_cast<uint64_t>(n));
  }
}

TEST(Funnel, CountsFollowStatusesAndDecisions) {
  std::vector<GenerationRecord> rs;
  auto add = [&](const std::string& id, Status s, const std::string& dsname) {
    auto r = survivor(id, dsname);
    r.status = s;
    rs.push_back(r);
  };
  add("1", Status::kFailedContainment, "Snips");
  add("2", Status::kDiscardedStep1, "Snips");
  add("3", Status::kDiscardedStep2, "Snips");
  add("4", Status::kPassedStep2, "Snips");
  add("5", Status::kAccepted, "Snips");
  add("6", Status::kDiscardedReview, "ATIS");
  add("7", Status::kPassedStep2, "ATIS");
  auto rep = funnel_report(rs, {dec("4", Decision::kAccept), dec("7", Decision::kUndecided)});
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0], (FunnelStats{"Snips", 5, 4, 3, 2, 2}));
  EXPECT_EQ(rep.rows[1], (FunnelStats{"ATIS", 2, 2, 2, 2, 0}));
  EXPECT_EQ(rep.overall, (FunnelStats{"Overall", 7, 6, 5, 4, 2}));

  const auto table = funnel_table(rep);
  EXPECT_NE(table.find("Snips"), std::string::npos);
  EXPECT_NE(table.find("Overall"), std::string::npos);
  const auto j = funnel_json(rep);
  EXPECT_EQ(j["overall"]["final"], 2);
  EXPECT_EQ(j["datasets"][1]["review_rejections"], 2);
}

TEST(Funnel, TableUsesThousandsSeparators) {
  FunnelReport rep;
  rep.rows.push_back({"Clinc-150", 6000, 6000, 4442, 2278, 2266});
  rep.overall = rep.rows[0];
  rep.overall.dataset = "Overall";
  const auto table = funnel_table(rep);
  EXPECT_NE(table.find("6,000"), std::string::npos);
  EXPECT_NE(table.find("2,266"), std::string::npos);
}
