#pragma once

#include <string>
#include <vector>

#include "hardneg/error.hpp"
#include "hardneg/util.hpp"

namespace hardneg {

enum class Verdict { kRelated, kUnrelated, kUnparseable };
enum class VerifyStep { kStep1, kStep2 };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kRelated: return "related";
    case Verdict::kUnrelated: return "unrelated";
    case Verdict::kUnparseable: return "unparseable";
  }
  return "?";
}

inline std::string_view to_string(VerifyStep s) {
  return s == VerifyStep::kStep1 ? "step1" : "step2";
}

/// Conversation id of a record's verification question at `step`.
inline std::string step_conversation_id(VerifyStep step, std::string_view record_id) {
  return std::string(step == VerifyStep::kStep1 ? "s1-" : "s2-") +
         sanitize_file_component(record_id);
}

struct VerdictRecord {
  VerifyStep step = VerifyStep::kStep1;
  std::string question;
  std::string raw_reply;
  Verdict verdict = Verdict::kUnparseable;

  bool operator==(const VerdictRecord&) const = default;
};

/// Funnel position of a candidate. Forward-only:
///   generated -> passed_step1 | discarded_step1
///   passed_step1 -> passed_step2 | discarded_step2
///   passed_step2 -> accepted | discarded_review
/// failed (gateway error) and failed_containment are terminal at generation.
enum class Status {
  kGenerated,
  kFailed,
  kFailedContainment,
  kPassedStep1,
  kDiscardedStep1,
  kPassedStep2,
  kDiscardedStep2,
  kAccepted,
  kDiscardedReview,
};

inline constexpr std::pair<Status, std::string_view> kStatusNames[] = {
    {Status::kGenerated, "generated"},
    {Status::kFailed, "failed"},
    {Status::kFailedContainment, "failed_containment"},
    {Status::kPassedStep1, "passed_step1"},
    {Status::kDiscardedStep1, "discarded_step1"},
    {Status::kPassedStep2, "passed_step2"},
    {Status::kDiscardedStep2, "discarded_step2"},
    {Status::kAccepted, "accepted"},
    {Status::kDiscardedReview, "discarded_review"},
};

inline std::string_view to_string(Status s) {
  for (const auto& [k, v] : kStatusNames)
    if (k == s) return v;
  return "?";
}

inline Status parse_status(std::string_view s) {
  for (const auto& [k, v] : kStatusNames)
    if (v == s) return k;
  throw ParseError("unknown record status '" + std::string(s) + "'");
}

/// How far through the funnel a record got: 0 = produced a usable candidate,
/// 1 = survived step 1, 2 = survived step 2, 3 = accepted. -1 for failures.
inline int funnel_depth(Status s) {
  switch (s) {
    case Status::kFailed:
    case Status::kFailedContainment: return -1;
    case Status::kGenerated:
    case Status::kDiscardedStep1: return 0;
    case Status::kPassedStep1:
    case Status::kDiscardedStep2: return 1;
    case Status::kPassedStep2:
    case Status::kDiscardedReview: return 2;
    case Status::kAccepted: return 3;
  }
  return -1;
}

inline bool legal_transition(Status from, Status to) {
  switch (from) {
    case Status::kGenerated:
      return to == Status::kPassedStep1 || to == Status::kDiscardedStep1;
    case Status::kPassedStep1:
      return to == Status::kPassedStep2 || to == Status::kDiscardedStep2;
    case Status::kPassedStep2:
      return to == Status::kAccepted || to == Status::kDiscardedReview;
    default:
      return false;
  }
}

/// True when `to` lies strictly downstream of `from`.
inline bool reachable(Status from, Status to) {
  for (const auto& [next, _] : kStatusNames)
    if (legal_transition(from, next) && (next == to || reachable(next, to))) return true;
  return false;
}

struct GenerationRecord {
  std::string id;
  std::string dataset;
  std::string intent;
  std::vector<std::string> pair;
  std::string text;
  std::string transcript_ref;
  Status status = Status::kGenerated;
  std::string reason;  // why a record failed or was discarded
  std::string error;   // last gateway error while pending verification
  std::vector<VerdictRecord> verdicts;

  bool operator==(const GenerationRecord&) const = default;

  void advance(Status to) {
    if (!legal_transition(status, to))
      throw ContractError("record '" + id + "': illegal status change " +
                          std::string(to_string(status)) + " -> " +
                          std::string(to_string(to)));
    status = to;
  }
};

inline Json verdict_to_json(const VerdictRecord& v) {
  Json j;
  j["step"] = to_string(v.step);
  j["question"] = v.question;
  j["raw_reply"] = v.raw_reply;
  j["verdict"] = to_string(v.verdict);
  return j;
}

inline VerdictRecord verdict_from_json(const Json& j, const std::string& where) {
  VerdictRecord v;
  const auto step = require_string(j, "step", where);
  if (step != "step1" && step != "step2")
    throw ParseError(where + ": unknown step '" + step + "'");
  v.step = step == "step1" ? VerifyStep::kStep1 : VerifyStep::kStep2;
  v.question = require_string(j, "question", where);
  v.raw_reply = require_string(j, "raw_reply", where);
  const auto verdict = require_string(j, "verdict", where);
  if (verdict == "related")
    v.verdict = Verdict::kRelated;
  else if (verdict == "unrelated")
    v.verdict = Verdict::kUnrelated;
  else if (verdict == "unparseable")
    v.verdict = Verdict::kUnparseable;
  else
    throw ParseError(where + ": unknown verdict '" + verdict + "'");
  return v;
}

inline Json record_to_json(const GenerationRecord& r) {
  Json j;
  j["id"] = r.id;
  j["dataset"] = r.dataset;
  j["intent"] = r.intent;
  j["pair"] = r.pair;
  j["text"] = r.text;
  j["transcript_ref"] = r.transcript_ref;
  j["status"] = to_string(r.status);
  if (!r.reason.empty()) j["reason"] = r.reason;
  if (!r.error.empty()) j["error"] = r.error;
  Json vs = Json::array();
  for (const auto& v : r.verdicts) vs.push_back(verdict_to_json(v));
  j["verdicts"] = std::move(vs);
  return j;
}

inline GenerationRecord record_from_json(const Json& j, const std::string& where) {
  GenerationRecord r;
  r.id = require_string(j, "id", where);
  r.dataset = require_string(j, "dataset", where);
  r.intent = require_string(j, "intent", where);
  r.text = require_string(j, "text", where);
  r.transcript_ref = require_string(j, "transcript_ref", where);
  r.status = parse_status(require_string(j, "status", where));
  if (!j.contains("pair") || !j["pair"].is_array())
    throw ParseError(where + ": field 'pair' must be an array");
  for (const auto& p : j["pair"]) {
    if (!p.is_string()) throw ParseError(where + ": pair members must be strings");
    r.pair.push_back(p.get<std::string>());
  }
  if (j.contains("reason")) r.reason = require_string(j, "reason", where);
  if (j.contains("error")) r.error = require_string(j, "error", where);
  if (j.contains("verdicts")) {
    for (const auto& v : j["verdicts"]) r.verdicts.push_back(verdict_from_json(v, where));
  }
  return r;
}

inline std::string records_to_jsonl(const std::vector<GenerationRecord>& rs) {
  std::string out;
  for (const auto& r : rs) out += record_to_json(r).dump() + "\n";
  return out;
}

inline std::vector<GenerationRecord> parse_records(std::string_view text,
                                                   const std::string& source) {
  std::vector<GenerationRecord> out;
  for_each_jsonl(text, source, [&](const Json& j, size_t line) {
    out.push_back(record_from_json(j, source + ":" + std::to_string(line)));
  });
  return out;
}

}  // namespace hardneg
