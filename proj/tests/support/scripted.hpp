#pragma once

// Builders for conversation-keyed mock scripts used across the pipeline tests.

#include <functional>
#include <string>
#include <vector>

#include "hardneg/corpus.hpp"
#include "hardneg/generator.hpp"
#include "hardneg/keyword_miner.hpp"
#include "hardneg/verifier.hpp"

namespace hardneg::scripted {

/// A pronounceable lowercase word for `i`, never ending in "s".
inline std::string synthetic_word(size_t i) {
  static const char kCons[] = "bcdfghklmnprtvz";
  static const char kVow[] = "aeiou";
  std::string w;
  do {
    w += kCons[i % 15];
    w += kVow[(i / 15) % 5];
    i /= 75;
  } while (i > 0);
  return w + "ko";
}

/// Reply for candidate `k` of keyword pair `pair`: contains every member and
/// is unique per (pair index, k).
inline std::string candidate_reply(const std::vector<std::string>& pair, size_t pair_index,
                                   size_t k) {
  std::string s = "Would the";
  for (const auto& m : pair) s += " " + m;
  s += " question " + synthetic_word(pair_index * 131 + k) + " work?";
  return s;
}

/// Generation script for every profile: one acknowledgment followed by a
/// keyword-containing reply for every planned candidate.
inline std::vector<llm::MockEntry> generation_script(
    const corpus::IntentDataset& ds, const std::vector<keywords::KeywordProfile>& profiles,
    const generation::GenerationParams& params) {
  std::vector<llm::MockEntry> out;
  for (const auto& prof : profiles) {
    size_t index = 0;
    while (ds.intents[index] != prof.intent) ++index;
    const auto conv = generation::generation_conversation_id(index, prof.intent);
    auto top = prof;
    if (top.keywords.size() > params.n) top.keywords.resize(params.n);
    const auto pairs = keywords::keyword_pairs(top, params.m);
    if (pairs.empty()) continue;
    out.push_back({std::string("Intent: ") + prof.intent, "OK", conv});
    for (size_t p = 0; p < pairs.size(); ++p)
      for (size_t k = 0; k < params.x; ++k)
        out.push_back({std::nullopt, candidate_reply(pairs[p].members, p, k), conv});
  }
  return out;
}

/// Verification script: `related(record, step)` decides the scripted verdict
/// for each record that will reach that step.
inline std::vector<llm::MockEntry> verification_script(
    const std::vector<GenerationRecord>& records,
    const std::function<bool(const GenerationRecord&, VerifyStep)>& related) {
  std::vector<llm::MockEntry> out;
  for (const auto& r : records) {
    if (r.status != Status::kGenerated) continue;
    const bool r1 = related(r, VerifyStep::kStep1);
    out.push_back({std::nullopt, r1 ? "Yes." : "No.",
                   step_conversation_id(VerifyStep::kStep1, r.id)});
    if (r1) continue;
    const bool r2 = related(r, VerifyStep::kStep2);
    out.push_back({std::nullopt, r2 ? "Yes, it fits one of them." : "No",
                   step_conversation_id(VerifyStep::kStep2, r.id)});
  }
  return out;
}

/// A dataset of `intents` synthetic intents whose keyword profiles have at
/// least five distinct-count keywords each.
inline corpus::IntentDataset synthetic_dataset(const std::string& name, size_t intents,
                                               size_t offset = 0) {
  corpus::IntentDataset ds;
  ds.name = name;
  for (size_t i = 0; i < intents; ++i) {
    const auto intent = name + "_intent_" + synthetic_word(offset + i);
    ds.intents.push_back(intent);
    std::vector<std::string> vocab;
    for (size_t w = 0; w < 6; ++w) vocab.push_back(synthetic_word((offset + i) * 7 + w + 1000));
    for (size_t u = 0; u < 6; ++u) {
      std::string text;
      for (size_t w = 0; w + u < 6; ++w) text += (text.empty() ? "" : " ") + vocab[w];
      ds.utterances.push_back({name + ":" + std::to_string(i) + ":" + std::to_string(u), text,
                               intent});
    }
  }
  return ds;
}

inline llm::BackendConfig mock_config() {
  llm::BackendConfig c;
  c.kind = llm::BackendConfig::Kind::kMock;
  c.script = "<inline>";
  return c;
}

}  // namespace hardneg::scripted
