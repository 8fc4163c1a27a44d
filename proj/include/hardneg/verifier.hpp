#pragma once

#include <cctype>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "hardneg/llm_gateway.hpp"
#include "hardneg/parallel.hpp"
#include "hardneg/prompts.hpp"
#include "hardneg/records.hpp"

namespace hardneg::verification {

/// Case-insensitive: a reply whose first word is "yes" is related, "no" is
/// unrelated; anything else is unparseable. Leading quotes and whitespace are
/// ignored.
inline Verdict parse_verdict(std::string_view reply) {
  size_t i = 0;
  while (i < reply.size() && !std::isalpha(static_cast<unsigned char>(reply[i])))
    ++i;
  size_t j = i;
  while (j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j]))) ++j;
  const auto word = to_lower_ascii(reply.substr(i, j - i));
  if (word == "yes") return Verdict::kRelated;
  if (word == "no") return Verdict::kUnrelated;
  return Verdict::kUnparseable;
}

using TranscriptSink = std::function<void(const llm::Conversation&)>;

namespace detail {

/// Asks `question` in a fresh conversation; an unparseable answer gets one
/// reprompt. Returns the final verdict; every exchange is appended to
/// record.verdicts.
inline Verdict ask(GenerationRecord& record, VerifyStep step, llm::Gateway& gateway,
                   const std::string& system_prompt, const std::string& question,
                   const PromptTemplates& prompts, double temperature,
                   const TranscriptSink& sink) {
  auto conv = gateway.new_conversation(system_prompt,
                                       step_conversation_id(step, record.id));
  std::vector<VerdictRecord> exchanged;
  auto finish = [&] {
    if (sink) sink(conv);
  };
  try {
    std::string q = question;
    for (int attempt = 0; attempt < 2; ++attempt) {
      auto reply = conv.send(q, temperature);
      exchanged.push_back({step, q, reply, parse_verdict(reply)});
      if (exchanged.back().verdict != Verdict::kUnparseable) break;
      q = prompts.verdict_retry;
    }
  } catch (...) {
    finish();
    throw;
  }
  finish();
  record.verdicts.insert(record.verdicts.end(), exchanged.begin(), exchanged.end());
  return exchanged.back().verdict;
}

inline void apply(GenerationRecord& record, Verdict v, Status pass, Status discard) {
  if (v == Verdict::kUnrelated) {
    record.advance(pass);
    record.reason.clear();
  } else {
    record.advance(discard);
    record.reason = v == Verdict::kRelated ? "judged related"
                                           : "unparseable verdict after retry";
  }
}

}  // namespace detail

/// Checks the candidate against the intent it was generated to avoid. Records
/// that are not in status `generated` are returned unchanged. A gateway error
/// leaves the record pending with the error noted.
inline GenerationRecord verify_step1(GenerationRecord record, llm::Gateway& gateway,
                                     const PromptTemplates& prompts, double temperature,
                                     const TranscriptSink& sink = {}) {
  if (record.status != Status::kGenerated) return record;
  const std::vector<std::pair<std::string, std::string>> vars = {
      {"intent", record.intent}, {"utterance", record.text}};
  try {
    const auto v = detail::ask(record, VerifyStep::kStep1, gateway,
                               render(prompts.step1_system, vars),
                               render(prompts.step1_question, vars), prompts,
                               temperature, sink);
    record.error.clear();
    detail::apply(record, v, Status::kPassedStep1, Status::kDiscardedStep1);
  } catch (const Error& e) {
    record.error = e.what();
  }
  return record;
}

/// Checks a step-1 survivor against every intent of the dataset, named in the
/// system message of a fresh conversation.
inline GenerationRecord verify_step2(GenerationRecord record,
                                     const std::vector<std::string>& all_intents,
                                     llm::Gateway& gateway, const PromptTemplates& prompts,
                                     double temperature, const TranscriptSink& sink = {}) {
  if (all_intents.empty())
    throw ConfigError("step-2 verification needs the dataset's intent list");
  if (record.status != Status::kPassedStep1) return record;
  std::string listing;
  for (const auto& i : all_intents) listing += "- " + i + "\n";
  listing.pop_back();
  const std::vector<std::pair<std::string, std::string>> vars = {
      {"intent", record.intent}, {"utterance", record.text}, {"intents", listing}};
  try {
    const auto v = detail::ask(record, VerifyStep::kStep2, gateway,
                               render(prompts.step2_system, vars),
                               render(prompts.step2_question, vars), prompts,
                               temperature, sink);
    record.error.clear();
    detail::apply(record, v, Status::kPassedStep2, Status::kDiscardedStep2);
  } catch (const Error& e) {
    record.error = e.what();
  }
  return record;
}

struct VerifyRequest {
  std::vector<std::string> all_intents;
  PromptTemplates prompts;
  double temperature = 0.0;
  size_t jobs = 1;
  TranscriptSink transcript_sink;
  /// Called (serialized) whenever a record reaches a new status.
  std::function<void(const GenerationRecord&)> on_decided;
};

/// Runs step 1 over every pending record, then step 2 over every survivor.
/// Already-decided records are skipped, so reruns resume where a previous run
/// stopped.
inline void verify_all(std::vector<GenerationRecord>& records, llm::Gateway& gateway,
                       const VerifyRequest& req) {
  if (req.all_intents.empty())
    throw ConfigError("step-2 verification needs the dataset's intent list");
  const size_t workers = gateway.backend()->order_sensitive() ? 1 : req.jobs;
  std::mutex mu;
  auto run_step = [&](Status pending, auto&& step) {
    std::vector<size_t> todo;
    for (size_t i = 0; i < records.size(); ++i)
      if (records[i].status == pending) todo.push_back(i);
    parallel_for(todo.size(), workers, [&](size_t k) {
      auto& rec = records[todo[k]];
      auto updated = step(rec);
      std::lock_guard lock(mu);
      const bool decided = updated.status != rec.status;
      rec = std::move(updated);
      if (decided && req.on_decided) req.on_decided(rec);
    });
  };
  run_step(Status::kGenerated, [&](const GenerationRecord& r) {
    return verify_step1(r, gateway, req.prompts, req.temperature, req.transcript_sink);
  });
  run_step(Status::kPassedStep1, [&](const GenerationRecord& r) {
    return verify_step2(r, req.all_intents, gateway, req.prompts, req.temperature,
                        req.transcript_sink);
  });
}

/// Verdict log rows: one per question asked, in record order.
inline std::string verdict_log_jsonl(const std::vector<GenerationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    for (const auto& v : r.verdicts) {
      Json j;
      j["record"] = r.id;
      auto vj = verdict_to_json(v);
      for (auto& [k, val] : vj.items()) j[k] = val;
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace hardneg::verification
