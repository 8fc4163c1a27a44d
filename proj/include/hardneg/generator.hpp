#pragma once

#include <cstdio>
#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hardneg/corpus.hpp"
#include "hardneg/keyword_miner.hpp"
#include "hardneg/llm_gateway.hpp"
#include "hardneg/log.hpp"
#include "hardneg/parallel.hpp"
#include "hardneg/prompts.hpp"
#include "hardneg/records.hpp"
#include "hardneg/rng.hpp"

namespace hardneg::generation {

struct GenerationParams {
  size_t n = 5;  // keywords mined per intent
  size_t m = 2;  // keywords per prompt
  size_t x = 4;  // utterances requested per keyword combination
  size_t samples_per_intent = 5;

  void validate() const {
    if (m < 1) throw ConfigError("m must be >= 1");
    if (n < m) throw ConfigError("n must be >= m");
    if (x < 1) throw ConfigError("x must be >= 1");
    if (samples_per_intent < 1)
      throw ConfigError("samples_per_intent must be >= 1");
  }

  Json to_json() const {
    Json j;
    j["n"] = n;
    j["m"] = m;
    j["x"] = x;
    j["samples_per_intent"] = samples_per_intent;
    return j;
  }

  /// C(min(n, keywords), m) * x
  uint64_t candidate_ceiling(size_t keyword_count) const {
    return keywords::binomial(std::min(n, keyword_count), m) * x;
  }
};

/// Lowercases, trims, and strips trailing ".", "?" and "!".
inline std::string normalize_utterance(std::string_view text) {
  std::string s = to_lower_ascii(trim_view(text));
  while (!s.empty() && (s.back() == '.' || s.back() == '?' || s.back() == '!' ||
                        std::isspace(static_cast<unsigned char>(s.back()))))
    s.pop_back();
  return s;
}

/// Members of `pair` missing from `text`. A member is present when it, or its
/// lemma, is among the inflection candidates of some token of the text.
inline std::vector<std::string> missing_keywords(std::string_view text,
                                                 const keywords::KeywordPair& pair) {
  std::unordered_set<std::string> forms;
  for (const auto& tok : keywords::tokenize(text))
    for (auto& c : keywords::inflection_candidates(tok)) forms.insert(std::move(c));
  std::vector<std::string> missing;
  for (const auto& member : pair.members) {
    const auto lower = to_lower_ascii(member);
    if (!forms.contains(lower) && !forms.contains(keywords::lemmatize(lower)))
      missing.push_back(member);
  }
  return missing;
}

inline bool containment_check(std::string_view text,
                              const keywords::KeywordPair& pair) {
  return missing_keywords(text, pair).empty();
}

inline std::string generation_conversation_id(size_t intent_index,
                                              std::string_view intent) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04zu", intent_index);
  return std::string("gen-") + buf + "-" + sanitize_file_component(intent);
}

inline std::string record_id(std::string_view intent, size_t pair_index,
                             size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%03zu.%zu", pair_index, k);
  return std::string(intent) + buf;
}

/// Shows the intent name and its INS samples; the assistant acknowledges.
inline void seed_intent_context(llm::Conversation& conv,
                                const PromptTemplates& prompts,
                                std::string_view intent,
                                const std::vector<std::string>& samples,
                                size_t expected_samples, double temperature) {
  if (samples.size() < expected_samples)
    log::warn("intent '" + std::string(intent) + "': only " +
              std::to_string(samples.size()) + " of " +
              std::to_string(expected_samples) + " INS samples available");
  std::string listing;
  for (size_t i = 0; i < samples.size(); ++i)
    listing += std::to_string(i + 1) + ". " + samples[i] + (i + 1 < samples.size() ? "\n" : "");
  conv.send(render(prompts.seed_intent, {{"intent", std::string(intent)},
                                         {"samples", listing}}),
            temperature);
}

/// Requests one candidate containing every member of `pair`. A reply that
/// misses a keyword or repeats an earlier text of this intent gets exactly one
/// reprompt. `seen` holds the accepted texts of the intent so far.
inline GenerationRecord generate_candidate(
    llm::Conversation& conv, const PromptTemplates& prompts,
    std::string_view dataset, std::string_view intent,
    const keywords::KeywordPair& pair, std::string id,
    std::unordered_set<std::string>& seen, double temperature) {
  GenerationRecord rec;
  rec.id = std::move(id);
  rec.dataset = dataset;
  rec.intent = intent;
  rec.pair = pair.members;
  rec.transcript_ref = conv.id();

  const std::vector<std::pair<std::string, std::string>> vars = {
      {"intent", std::string(intent)}, {"keywords", quoted_list(pair.members)}};
  auto problem = [&](const std::string& text) -> std::string {
    auto missing = missing_keywords(text, pair);
    if (!missing.empty()) return "missing keyword(s): " + join(missing, ", ");
    if (seen.contains(text)) return "duplicate of an earlier utterance";
    return {};
  };

  try {
    rec.text = normalize_utterance(conv.send(render(prompts.generate, vars), temperature));
    rec.reason = problem(rec.text);
    if (!rec.reason.empty()) {
      rec.text = normalize_utterance(
          conv.send(render(prompts.generate_retry, vars), temperature));
      rec.reason = problem(rec.text);
    }
  } catch (const Error& e) {
    rec.status = Status::kFailed;
    rec.reason = e.what();
    return rec;
  }
  if (rec.reason.empty()) {
    rec.status = Status::kGenerated;
    seen.insert(rec.text);
  } else {
    rec.status = Status::kFailedContainment;
  }
  return rec;
}

/// Everything produced for one intent: its records and the conversation that
/// generated them.
struct IntentRun {
  std::vector<GenerationRecord> records;
  std::string conversation_id;
  std::vector<llm::ChatMessage> transcript;
};

/// Picks up to `k` INS examples from the intent's training utterances with a
/// permutation seeded from (seed, intent).
inline std::vector<std::string> sample_intent_examples(
    const corpus::IntentDataset& ds, const std::unordered_set<std::string>& train,
    const std::string& intent, size_t k, uint64_t seed) {
  std::vector<const corpus::Utterance*> pool;
  for (const auto& u : ds.utterances)
    if (u.intent == intent && train.contains(u.id)) pool.push_back(&u);
  const auto perm = seeded_permutation(pool.size(), derive_seed(seed, "samples:" + intent));
  std::vector<std::string> out;
  for (size_t i = 0; i < perm.size() && out.size() < k; ++i)
    out.push_back(pool[perm[i]]->text);
  return out;
}

struct GenerateRequest {
  const corpus::IntentDataset* dataset = nullptr;
  std::vector<std::string> train_ids;
  GenerationParams params;
  PromptTemplates prompts;
  uint64_t seed = 13;
  double temperature = 1.0;
};

/// One conversation per intent, reused across all keyword combinations.
/// Individual failures become records; they never abort the intent.
inline IntentRun generate_for_intent(const GenerateRequest& req,
                                     size_t intent_index,
                                     const keywords::KeywordProfile& profile,
                                     llm::Gateway& gateway) {
  const auto& ds = *req.dataset;
  const auto& intent = profile.intent;
  IntentRun run;
  run.conversation_id = generation_conversation_id(intent_index, intent);

  keywords::KeywordProfile top = profile;
  if (top.keywords.size() > req.params.n) top.keywords.resize(req.params.n);
  const auto pairs = keywords::keyword_pairs(top, req.params.m);

  const std::unordered_set<std::string> train(req.train_ids.begin(), req.train_ids.end());
  const auto samples = sample_intent_examples(ds, train, intent,
                                              req.params.samples_per_intent, req.seed);
  auto conv = gateway.new_conversation(req.prompts.generation_system, run.conversation_id);
  std::string seed_error;
  if (!pairs.empty()) {
    try {
      seed_intent_context(conv, req.prompts, intent, samples,
                          req.params.samples_per_intent, req.temperature);
    } catch (const Error& e) {
      seed_error = std::string("intent context failed: ") + e.what();
    }
  }

  std::unordered_set<std::string> seen;
  for (size_t p = 0; p < pairs.size(); ++p) {
    for (size_t k = 0; k < req.params.x; ++k) {
      auto id = record_id(intent, p, k);
      if (!seed_error.empty()) {
        GenerationRecord rec;
        rec.id = std::move(id);
        rec.dataset = ds.name;
        rec.intent = intent;
        rec.pair = pairs[p].members;
        rec.transcript_ref = run.conversation_id;
        rec.status = Status::kFailed;
        rec.reason = seed_error;
        run.records.push_back(std::move(rec));
        continue;
      }
      run.records.push_back(generate_candidate(conv, req.prompts, ds.name, intent,
                                               pairs[p], std::move(id), seen,
                                               req.temperature));
    }
  }
  run.transcript = conv.messages();
  return run;
}

/// Runs every intent that has a profile. Intents run concurrently (up to
/// `jobs`) unless the backend is order-sensitive; results keep profile order.
inline std::vector<IntentRun> generate_all(
    const GenerateRequest& req, const std::vector<keywords::KeywordProfile>& profiles,
    llm::Gateway& gateway, size_t jobs,
    const std::function<void(const IntentRun&)>& on_intent_done = {}) {
  req.params.validate();
  std::unordered_map<std::string, size_t> intent_index;
  for (size_t i = 0; i < req.dataset->intents.size(); ++i)
    intent_index.emplace(req.dataset->intents[i], i);
  for (const auto& p : profiles)
    if (!intent_index.contains(p.intent))
      throw ContractError("keyword profile for unknown intent '" + p.intent + "'");

  std::vector<IntentRun> runs(profiles.size());
  std::mutex done_mu;
  const size_t workers = gateway.backend()->order_sensitive() ? 1 : jobs;
  parallel_for(profiles.size(), workers, [&](size_t i) {
    runs[i] = generate_for_intent(req, intent_index.at(profiles[i].intent), profiles[i],
                                  gateway);
    if (on_intent_done) {
      std::lock_guard lock(done_mu);
      on_intent_done(runs[i]);
    }
  });
  return runs;
}

}  // namespace hardneg::generation
