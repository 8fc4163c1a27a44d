#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hardneg/corpus.hpp"
#include "hardneg/error.hpp"
#include "hardneg/util.hpp"

namespace hardneg::scoring {

enum class GoldScope { kIns, kOosGeneral, kOosHardNegative };

inline std::string_view to_string(GoldScope g) {
  switch (g) {
    case GoldScope::kIns: return "ins";
    case GoldScope::kOosGeneral: return "oos_general";
    case GoldScope::kOosHardNegative: return "oos_hard_negative";
  }
  return "?";
}

inline GoldScope parse_gold_scope(std::string_view s) {
  if (s == "ins") return GoldScope::kIns;
  if (s == "oos_general") return GoldScope::kOosGeneral;
  if (s == "oos_hard_negative") return GoldScope::kOosHardNegative;
  throw ParseError("unknown gold_scope '" + std::string(s) + "'");
}

struct PredictionRecord {
  std::string id;
  std::string text;
  GoldScope gold_scope = GoldScope::kIns;
  std::vector<std::string> label_names;
  std::vector<double> logits;
};

enum class ScoreFunction { kSoftmax, kEnergy };

inline std::string_view to_string(ScoreFunction f) {
  return f == ScoreFunction::kSoftmax ? "softmax" : "energy";
}

inline ScoreFunction parse_score_function(std::string_view s) {
  if (s == "softmax") return ScoreFunction::kSoftmax;
  if (s == "energy") return ScoreFunction::kEnergy;
  throw ConfigError("unknown score function '" + std::string(s) +
                    "' (expected softmax or energy)");
}

struct ScoringParams {
  ScoreFunction function = ScoreFunction::kSoftmax;
  double temperature = 1.0;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw ConfigError("energy temperature must be a positive finite number");
  }
};

namespace detail {

inline void check_logits(std::span<const double> logits) {
  if (logits.size() < 2) throw DataError("need at least 2 logits");
  for (double l : logits)
    if (!std::isfinite(l)) throw DataError("non-finite logit");
}

/// log sum exp(l_k / T), max-shifted.
inline double logsumexp(std::span<const double> logits, double T) {
  double m = -INFINITY;
  for (double l : logits) m = std::max(m, l / T);
  double s = 0.0;
  for (double l : logits) s += std::exp(l / T - m);
  return m + std::log(s);
}

}  // namespace detail

/// Softmax probabilities, max-shifted.
inline std::vector<double> softmax(std::span<const double> logits) {
  detail::check_logits(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) s += (p[k] = std::exp(logits[k] - m));
  for (auto& v : p) v /= s;
  return p;
}

inline double softmax_confidence(std::span<const double> logits) {
  const auto p = softmax(logits);
  return *std::max_element(p.begin(), p.end());
}

/// Negative energy, T * log sum exp(l / T). Larger means more in-scope.
inline double energy_confidence(std::span<const double> logits, double T = 1.0) {
  detail::check_logits(logits);
  if (!(T > 0.0)) throw ArgumentError("energy temperature must be positive");
  return T * detail::logsumexp(logits, T);
}

struct ScoredPrediction {
  std::string id;
  GoldScope gold_scope;
  double score;
};

/// Scores every record. When the label set contains "oos", the score only
/// looks at in-scope labels: softmax takes the largest in-scope probability of
/// the full distribution, energy drops the "oos" logit.
inline std::vector<ScoredPrediction> score_predictions(
    const std::vector<PredictionRecord>& records, const ScoringParams& params) {
  params.validate();
  std::vector<ScoredPrediction> out;
  if (records.empty()) return out;
  const auto& labels = records.front().label_names;
  const auto oos_it = std::find(labels.begin(), labels.end(), corpus::kOosLabel);
  const std::ptrdiff_t oos =
      oos_it == labels.end() ? -1 : static_cast<std::ptrdiff_t>(oos_it - labels.begin());
  out.reserve(records.size());
  std::vector<double> ins_logits;
  for (const auto& r : records) {
    if (r.label_names != labels)
      throw ContractError("prediction '" + r.id + "' has a different label set");
    if (r.logits.size() != labels.size())
      throw DataError("prediction '" + r.id + "': " + std::to_string(r.logits.size()) +
                      " logits for " + std::to_string(labels.size()) + " labels");
    double score;
    if (oos < 0) {
      score = params.function == ScoreFunction::kSoftmax
                  ? softmax_confidence(r.logits)
                  : energy_confidence(r.logits, params.temperature);
    } else if (params.function == ScoreFunction::kSoftmax) {
      auto p = softmax(r.logits);
      p.erase(p.begin() + oos);
      score = *std::max_element(p.begin(), p.end());
    } else {
      detail::check_logits(r.logits);
      ins_logits.assign(r.logits.begin(), r.logits.end());
      ins_logits.erase(ins_logits.begin() + oos);
      if (ins_logits.size() < 2) {
        // A single in-scope label: its energy is its own logit.
        score = ins_logits.at(0);
      } else {
        score = energy_confidence(ins_logits, params.temperature);
      }
    }
    out.push_back({r.id, r.gold_scope, score});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction files

/// JSON Lines of {"id","text","gold_scope","label_names","logits"}. The first
/// line may instead be a header {"label_names":[...]} that applies to every
/// record lacking its own.
inline std::vector<PredictionRecord> parse_predictions(std::string_view text,
                                                       const std::string& source) {
  std::vector<PredictionRecord> out;
  std::vector<std::string> header_labels;
  bool first = true;
  auto read_labels = [](const Json& arr, const std::string& where) {
    if (!arr.is_array()) throw ParseError(where + ": 'label_names' must be an array");
    std::vector<std::string> names;
    for (const auto& n : arr) {
      if (!n.is_string()) throw ParseError(where + ": label names must be strings");
      names.push_back(n.get<std::string>());
    }
    if (names.size() < 2) throw DataError(where + ": need at least 2 labels");
    return names;
  };
  for_each_jsonl(text, source, [&](const Json& j, size_t line) {
    const auto where = source + ":" + std::to_string(line);
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    if (first && !j.contains("id") && j.contains("label_names")) {
      header_labels = read_labels(j["label_names"], where);
      first = false;
      return;
    }
    first = false;
    PredictionRecord r;
    r.id = require_string(j, "id", where);
    if (j.contains("text")) r.text = require_string(j, "text", where);
    r.gold_scope = parse_gold_scope(require_string(j, "gold_scope", where));
    if (j.contains("label_names")) {
      r.label_names = read_labels(j["label_names"], where);
    } else if (!header_labels.empty()) {
      r.label_names = header_labels;
    } else {
      throw ParseError(where + ": missing 'label_names' and no header line");
    }
    if (!j.contains("logits") || !j["logits"].is_array())
      throw ParseError(where + ": field 'logits' must be an array");
    for (const auto& v : j["logits"]) {
      if (!v.is_number()) throw DataError(where + ": logits must be numbers");
      r.logits.push_back(v.get<double>());
    }
    if (r.logits.size() != r.label_names.size())
      throw DataError(where + ": " + std::to_string(r.logits.size()) + " logits for " +
                      std::to_string(r.label_names.size()) + " labels");
    for (double l : r.logits)
      if (!std::isfinite(l)) throw DataError(where + ": non-finite logit");
    out.push_back(std::move(r));
  });
  return out;
}

inline std::string scores_to_jsonl(const std::vector<ScoredPrediction>& scores) {
  std::string out;
  for (const auto& s : scores) {
    Json j;
    j["id"] = s.id;
    j["gold_scope"] = to_string(s.gold_scope);
    j["score"] = s.score;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<ScoredPrediction> parse_scores(std::string_view text,
                                                  const std::string& source) {
  std::vector<ScoredPrediction> out;
  for_each_jsonl(text, source, [&](const Json& j, size_t line) {
    const auto where = source + ":" + std::to_string(line);
    ScoredPrediction s;
    s.id = require_string(j, "id", where);
    s.gold_scope = parse_gold_scope(require_string(j, "gold_scope", where));
    if (!j.contains("score") || !j["score"].is_number())
      throw ParseError(where + ": field 'score' must be a number");
    s.score = j["score"].get<double>();
    if (!std::isfinite(s.score)) throw DataError(where + ": non-finite score");
    out.push_back(std::move(s));
  });
  return out;
}

}  // namespace hardneg::scoring
