#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hardneg/corpus.hpp"
#include "hardneg/log.hpp"
#include "hardneg/records.hpp"

namespace hardneg::curation {

enum class Decision { kAccept, kReject, kUndecided };

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kAccept: return "accept";
    case Decision::kReject: return "reject";
    case Decision::kUndecided: return "undecided";
  }
  return "?";
}

inline Decision parse_decision(std::string_view s) {
  if (s == "accept") return Decision::kAccept;
  if (s == "reject") return Decision::kReject;
  if (s == "undecided") return Decision::kUndecided;
  throw ParseError("unknown review decision '" + std::string(s) + "'");
}

struct ReviewDecision {
  std::string record_id;
  Decision decision = Decision::kUndecided;
  std::string reviewer;
  std::string note;

  bool operator==(const ReviewDecision&) const = default;
};

inline Json decision_to_json(const ReviewDecision& d) {
  Json j;
  j["record"] = d.record_id;
  j["decision"] = to_string(d.decision);
  j["reviewer"] = d.reviewer;
  if (!d.note.empty()) j["note"] = d.note;
  return j;
}

/// Keeps the last decision per (record, reviewer), in first-seen order.
inline std::vector<ReviewDecision> dedupe_decisions(const std::vector<ReviewDecision>& all) {
  std::vector<ReviewDecision> out;
  std::map<std::pair<std::string, std::string>, size_t> index;
  for (const auto& d : all) {
    auto key = std::make_pair(d.record_id, d.reviewer);
    if (auto it = index.find(key); it != index.end()) {
      out[it->second] = d;
    } else {
      index.emplace(key, out.size());
      out.push_back(d);
    }
  }
  return out;
}

/// Parses a decision file. A malformed final line (an interrupted write) is
/// dropped with a warning; malformed lines elsewhere are errors.
inline std::vector<ReviewDecision> parse_decisions(std::string_view text,
                                                   const std::string& source) {
  std::vector<ReviewDecision> out;
  bool dropped = false;
  const auto body = without_truncated_tail(text, dropped);
  if (dropped) log::warn(source + ": ignoring truncated last line");
  for_each_jsonl(body, source, [&](const Json& j, size_t line) {
    const auto where = source + ":" + std::to_string(line);
    ReviewDecision d;
    d.record_id = require_string(j, "record", where);
    d.decision = parse_decision(require_string(j, "decision", where));
    d.reviewer = require_string(j, "reviewer", where);
    if (j.contains("note")) d.note = require_string(j, "note", where);
    out.push_back(std::move(d));
  });
  return dedupe_decisions(out);
}

/// Append-only decision file. Each decision is flushed as it is recorded, so
/// an interrupted session keeps everything entered so far.
class DecisionStore {
 public:
  explicit DecisionStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      auto text = read_file(path_);
      decisions_ = parse_decisions(text, path_.string());
      if (!text.empty() && text.back() != '\n') {
        // Rewrite so the next append starts on a clean line.
        std::string clean;
        for (const auto& d : decisions_) clean += decision_to_json(d).dump() + "\n";
        write_file_atomic(path_, clean);
      }
    } else if (path_.has_parent_path()) {
      std::filesystem::create_directories(path_.parent_path());
    }
  }

  const std::vector<ReviewDecision>& decisions() const { return decisions_; }

  void append(const ReviewDecision& d) {
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to " + path_.string());
    out << decision_to_json(d).dump() << '\n';
    out.flush();
    if (!out) throw IoError("write to " + path_.string() + " failed");
    decisions_.push_back(d);
    decisions_ = dedupe_decisions(decisions_);
  }

  bool has(const std::string& record_id, const std::string& reviewer) const {
    for (const auto& d : decisions_)
      if (d.record_id == record_id && d.reviewer == reviewer) return true;
    return false;
  }

 private:
  std::filesystem::path path_;
  std::vector<ReviewDecision> decisions_;
};

enum class Consensus { kAccepted, kRejected, kNoConsensus, kPending };

/// With `quorum` reviewers required: any reject rejects; `quorum` accepts
/// with no other opinion accepts; a record with an undecided vote and no
/// reject has no consensus; fewer than `quorum` decisions is pending.
inline Consensus consensus(const std::vector<ReviewDecision>& for_record, size_t quorum) {
  size_t accepts = 0;
  bool undecided = false;
  for (const auto& d : for_record) {
    if (d.decision == Decision::kReject) return Consensus::kRejected;
    if (d.decision == Decision::kAccept) ++accepts;
    if (d.decision == Decision::kUndecided) undecided = true;
  }
  if (for_record.size() < quorum) return Consensus::kPending;
  if (undecided) return Consensus::kNoConsensus;
  return accepts >= quorum ? Consensus::kAccepted : Consensus::kPending;
}

inline std::unordered_map<std::string, std::vector<ReviewDecision>> group_by_record(
    const std::vector<ReviewDecision>& decisions) {
  std::unordered_map<std::string, std::vector<ReviewDecision>> out;
  for (const auto& d : dedupe_decisions(decisions)) out[d.record_id].push_back(d);
  return out;
}

// ---------------------------------------------------------------------------
// Interactive review

struct ReviewOutcome {
  std::vector<ReviewDecision> recorded;
  bool quit = false;
};

/// Presents every step-2 survivor that `reviewer` has not decided yet, with
/// its intent's INS samples, and reads one key per record:
/// a = accept, r = reject, u = undecided, q = quit.
inline ReviewOutcome review_session(
    const std::vector<GenerationRecord>& records,
    const std::map<std::string, std::vector<std::string>>& ins_context,
    DecisionStore& store, const std::string& reviewer, std::istream& in,
    std::ostream& out) {
  ReviewOutcome outcome;
  std::vector<const GenerationRecord*> pending;
  for (const auto& r : records)
    if (r.status == Status::kPassedStep2 && !store.has(r.id, reviewer))
      pending.push_back(&r);
  out << pending.size() << " record(s) to review as '" << reviewer << "'\n";

  for (size_t i = 0; i < pending.size(); ++i) {
    const auto& r = *pending[i];
    out << "\n[" << (i + 1) << "/" << pending.size() << "] " << r.id << "\n"
        << "  candidate : " << r.text << "\n"
        << "  intent    : " << r.intent << "\n"
        << "  keywords  : " << join(r.pair, ", ") << "\n";
    if (auto it = ins_context.find(r.intent); it != ins_context.end()) {
      out << "  INS samples:\n";
      for (const auto& s : it->second) out << "    - " << s << "\n";
    }
    for (;;) {
      out << "Out of scope? [a]ccept / [r]eject / [u]ndecided / [q]uit: " << std::flush;
      std::string line;
      if (!std::getline(in, line)) {
        outcome.quit = true;
        return outcome;
      }
      const auto key = trim(line);
      if (key == "q") {
        outcome.quit = true;
        return outcome;
      }
      Decision d;
      if (key == "a") {
        d = Decision::kAccept;
      } else if (key == "r") {
        d = Decision::kReject;
      } else if (key == "u") {
        d = Decision::kUndecided;
      } else {
        out << "unrecognized key '" << key << "'\n";
        continue;
      }
      ReviewDecision rd{r.id, d, reviewer, {}};
      store.append(rd);
      outcome.recorded.push_back(std::move(rd));
      break;
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Assembly and funnel statistics

struct AssembleOptions {
  size_t quorum = 1;
  bool auto_accept = false;
  std::string name = "hard_negative_oos";
};

struct ProvenanceRow {
  std::string id;
  std::string dataset;
  std::string target_intent;
  std::vector<std::string> pair;
  std::string transcript_ref;
  std::vector<std::string> verification_refs;  // verification conversation ids
};

struct Assembly {
  corpus::IntentDataset dataset;        // accepted utterances labeled "oos"
  std::vector<ProvenanceRow> provenance; // aligned with dataset.utterances
  std::vector<GenerationRecord> records; // survivors moved to accepted / discarded_review
};

/// Applies review consensus to step-2 survivors. In auto-accept mode every
/// survivor still awaiting decisions is accepted.
inline Assembly assemble_dataset(const std::vector<GenerationRecord>& records,
                                 const std::vector<ReviewDecision>& decisions,
                                 const AssembleOptions& opts) {
  if (opts.quorum < 1) throw ConfigError("reviewer quorum must be >= 1");
  const auto by_record = group_by_record(decisions);
  std::vector<std::string> pending;
  Assembly out;
  out.dataset.name = opts.name;
  out.records = records;
  for (auto& r : out.records) {
    if (r.status != Status::kPassedStep2) continue;
    auto it = by_record.find(r.id);
    static const std::vector<ReviewDecision> kNone;
    auto c = consensus(it == by_record.end() ? kNone : it->second, opts.quorum);
    if (opts.auto_accept && c == Consensus::kPending) c = Consensus::kAccepted;
    switch (c) {
      case Consensus::kAccepted:
        r.advance(Status::kAccepted);
        break;
      case Consensus::kRejected:
        r.advance(Status::kDiscardedReview);
        r.reason = "rejected in review";
        break;
      case Consensus::kNoConsensus:
        r.advance(Status::kDiscardedReview);
        r.reason = "no review consensus";
        break;
      case Consensus::kPending:
        pending.push_back(r.id);
        break;
    }
  }
  if (!pending.empty()) {
    std::string msg = std::to_string(pending.size()) + " record(s) await review:";
    for (size_t i = 0; i < pending.size() && i < 20; ++i) msg += " " + pending[i];
    if (pending.size() > 20) msg += " ...";
    throw IncompleteError(msg, pending);
  }
  for (const auto& r : out.records) {
    if (r.status != Status::kAccepted) continue;
    out.dataset.utterances.push_back({r.id, r.text, std::string(corpus::kOosLabel)});
    ProvenanceRow p{r.id, r.dataset, r.intent, r.pair, r.transcript_ref, {}};
    for (const auto& v : r.verdicts) {
      const auto step_ref = step_conversation_id(v.step, r.id);
      if (std::find(p.verification_refs.begin(), p.verification_refs.end(), step_ref) ==
          p.verification_refs.end())
        p.verification_refs.push_back(step_ref);
    }
    out.provenance.push_back(std::move(p));
  }
  if (out.dataset.utterances.empty()) log::warn("assemble: no accepted utterances");
  return out;
}

inline std::string provenance_jsonl(const std::vector<ProvenanceRow>& rows) {
  std::string out;
  for (const auto& p : rows) {
    Json j;
    j["id"] = p.id;
    j["dataset"] = p.dataset;
    j["target_intent"] = p.target_intent;
    j["pair"] = p.pair;
    j["transcript_ref"] = p.transcript_ref;
    j["verification_refs"] = p.verification_refs;
    out += j.dump() + "\n";
  }
  return out;
}

struct FunnelStats {
  std::string dataset;
  uint64_t total_prompted = 0;  // every candidate requested
  uint64_t generated = 0;       // candidates that passed containment
  uint64_t after_step1 = 0;
  uint64_t after_step2 = 0;
  uint64_t final_count = 0;

  bool operator==(const FunnelStats&) const = default;

  FunnelStats& operator+=(const FunnelStats& o) {
    total_prompted += o.total_prompted;
    generated += o.generated;
    after_step1 += o.after_step1;
    after_step2 += o.after_step2;
    final_count += o.final_count;
    return *this;
  }
};

struct FunnelReport {
  std::vector<FunnelStats> rows;  // one per dataset, in first-seen order
  FunnelStats overall;
};

/// Counts funnel survivors per dataset. Step-2 survivors that have not been
/// assembled yet are counted as final when `decisions` accept them under
/// `quorum`.
inline FunnelReport funnel_report(const std::vector<GenerationRecord>& records,
                                  const std::vector<ReviewDecision>& decisions,
                                  size_t quorum = 1) {
  const auto by_record = group_by_record(decisions);
  FunnelReport rep;
  rep.overall.dataset = "Overall";
  std::map<std::string, size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.emplace(r.dataset, rep.rows.size());
    if (inserted) rep.rows.push_back(FunnelStats{r.dataset});
    auto& row = rep.rows[it->second];
    ++row.total_prompted;
    const int depth = funnel_depth(r.status);
    if (depth >= 0) ++row.generated;
    if (depth >= 1) ++row.after_step1;
    if (depth >= 2) ++row.after_step2;
    bool final_accept = r.status == Status::kAccepted;
    if (r.status == Status::kPassedStep2) {
      auto d = by_record.find(r.id);
      final_accept = d != by_record.end() &&
                     consensus(d->second, quorum) == Consensus::kAccepted;
    }
    if (final_accept) ++row.final_count;
  }
  for (const auto& row : rep.rows) rep.overall += row;
  return rep;
}

inline std::string funnel_table(const FunnelReport& rep) {
  auto fmt_count = [](uint64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<size_t>(i), ",");
    return s;
  };
  size_t width = 7;
  for (const auto& r : rep.rows) width = std::max(width, r.dataset.size());
  std::string out;
  char buf[256];
  auto line = [&](const std::string& name, const std::string& a, const std::string& b,
                  const std::string& c, const std::string& d, const std::string& e) {
    std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %9s  %9s\n", static_cast<int>(width),
                  name.c_str(), a.c_str(), b.c_str(), c.c_str(), d.c_str(), e.c_str());
    out += buf;
  };
  line("Dataset", "Total", "Generated", "Step 1", "Step 2", "Final");
  auto row = [&](const FunnelStats& s) {
    line(s.dataset, fmt_count(s.total_prompted), fmt_count(s.generated),
         fmt_count(s.after_step1), fmt_count(s.after_step2), fmt_count(s.final_count));
  };
  for (const auto& r : rep.rows) row(r);
  out += std::string(width + 55, '-') + "\n";
  row(rep.overall);
  return out;
}

inline Json funnel_json(const FunnelReport& rep) {
  auto one = [](const FunnelStats& s) {
    Json j;
    j["dataset"] = s.dataset;
    j["total_prompted"] = s.total_prompted;
    j["generated"] = s.generated;
    j["after_step1"] = s.after_step1;
    j["after_step2"] = s.after_step2;
    j["final"] = s.final_count;
    j["review_rejections"] = s.after_step2 - s.final_count;
    return j;
  };
  Json j;
  j["datasets"] = Json::array();
  for (const auto& r : rep.rows) j["datasets"].push_back(one(r));
  j["overall"] = one(rep.overall);
  return j;
}

}  // namespace hardneg::curation
