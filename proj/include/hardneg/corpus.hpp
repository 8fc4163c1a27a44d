#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hardneg/error.hpp"
#include "hardneg/log.hpp"
#include "hardneg/rng.hpp"
#include "hardneg/util.hpp"

namespace hardneg::corpus {

/// Reserved scope label. Never a member of IntentDataset::intents.
inline constexpr std::string_view kOosLabel = "oos";

struct Utterance {
  std::string id;
  std::string text;
  std::string intent;

  bool operator==(const Utterance&) const = default;
};

struct IntentDataset {
  std::string name;
  std::vector<std::string> intents;  // canonical label order
  std::vector<Utterance> utterances;
  std::vector<std::string> excluded_intents;

  bool operator==(const IntentDataset&) const = default;

  bool has_intent(std::string_view intent) const {
    return std::find(intents.begin(), intents.end(), intent) != intents.end();
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(utterances.size());
    for (const auto& u : utterances) out.push_back(u.id);
    return out;
  }
};

struct SplitPair {
  std::vector<std::string> train;
  std::vector<std::string> test;
  uint64_t seed = 0;
  double fraction = 0.8;

  bool operator==(const SplitPair&) const = default;
};

enum class Format { kCanonical, kClincJson };

inline Format parse_format(std::string_view s) {
  if (s == "canonical") return Format::kCanonical;
  if (s == "clinc_json") return Format::kClincJson;
  throw ConfigError("unknown dataset format '" + std::string(s) +
                    "' (expected canonical or clinc_json)");
}

namespace detail {

inline void add_utterance(IntentDataset& ds,
                          std::unordered_set<std::string>& seen_ids,
                          std::unordered_set<std::string>& seen_intents,
                          Utterance u, const std::string& where) {
  if (trim_view(u.text).empty())
    throw ParseError(where + ": field 'text' is empty");
  if (trim_view(u.intent).empty())
    throw ParseError(where + ": field 'intent' is empty");
  if (!seen_ids.insert(u.id).second)
    throw IntegrityError(where + ": duplicate utterance id '" + u.id + "'");
  if (u.intent != kOosLabel && seen_intents.insert(u.intent).second)
    ds.intents.push_back(u.intent);
  ds.utterances.push_back(std::move(u));
}

}  // namespace detail

/// Parses canonical JSONL: one {"id", "text", "intent"} object per line.
/// Missing ids become "<name>:<index>" with a zero-based record index.
inline IntentDataset parse_canonical(std::string_view text, std::string name,
                                     const std::string& source) {
  IntentDataset ds;
  ds.name = std::move(name);
  std::unordered_set<std::string> seen_ids, seen_intents;
  size_t index = 0;
  for_each_jsonl(text, source, [&](const Json& j, size_t line) {
    const std::string where = source + ":" + std::to_string(line);
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    Utterance u;
    u.text = require_string(j, "text", where);
    u.intent = require_string(j, "intent", where);
    if (j.contains("id"))
      u.id = require_string(j, "id", where);
    else
      u.id = ds.name + ":" + std::to_string(index);
    detail::add_utterance(ds, seen_ids, seen_intents, std::move(u), where);
    ++index;
  });
  return ds;
}

/// Parses the published Clinc-150 layout: a JSON object mapping split names
/// ("train", "val", "oos_test", ...) to lists of [text, intent] pairs. All
/// splits are flattened in file order; ids are "<name>:<split>:<index>".
inline IntentDataset parse_clinc(std::string_view text, std::string name,
                                 const std::string& source) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": invalid JSON (" + e.what() + ")");
  }
  if (!root.is_object())
    throw ParseError(source + ": expected an object of split name -> pairs");
  IntentDataset ds;
  ds.name = std::move(name);
  std::unordered_set<std::string> seen_ids, seen_intents;
  for (const auto& [split, rows] : root.items()) {
    if (!rows.is_array())
      throw ParseError(source + ": split '" + split + "' must be an array");
    for (size_t i = 0; i < rows.size(); ++i) {
      const std::string where =
          source + ": split '" + split + "' entry " + std::to_string(i);
      const auto& row = rows[i];
      if (!row.is_array() || row.size() != 2 || !row[0].is_string() ||
          !row[1].is_string())
        throw ParseError(where + ": expected [text, intent]");
      Utterance u{ds.name + ":" + split + ":" + std::to_string(i),
                   row[0].get<std::string>(), row[1].get<std::string>()};
      detail::add_utterance(ds, seen_ids, seen_intents, std::move(u), where);
    }
  }
  return ds;
}

inline IntentDataset load_dataset(const std::filesystem::path& path,
                                  Format format) {
  if (!std::filesystem::exists(path))
    throw IoError("dataset file not found: " + path.string());
  const auto text = read_file(path);
  auto name = path.stem().string();
  return format == Format::kCanonical
             ? parse_canonical(text, std::move(name), path.string())
             : parse_clinc(text, std::move(name), path.string());
}

inline std::string to_canonical_jsonl(const IntentDataset& ds) {
  std::string out;
  for (const auto& u : ds.utterances) {
    Json j;
    j["id"] = u.id;
    j["text"] = u.text;
    j["intent"] = u.intent;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void write_dataset(const IntentDataset& ds,
                          const std::filesystem::path& path) {
  write_file_atomic(path, to_canonical_jsonl(ds));
}

/// Drops every utterance labeled with one of `names`. Names that are not
/// intents of the dataset are reported and otherwise ignored.
inline IntentDataset exclude_intents(const IntentDataset& ds,
                                     const std::vector<std::string>& names) {
  IntentDataset out = ds;
  std::unordered_set<std::string> drop;
  for (const auto& n : names) {
    if (!ds.has_intent(n)) {
      log::warn("exclude_intents: '" + n + "' is not an intent of dataset '" +
                ds.name + "'");
      continue;
    }
    if (drop.insert(n).second) out.excluded_intents.push_back(n);
  }
  if (drop.empty()) return out;
  std::erase_if(out.intents, [&](const auto& i) { return drop.contains(i); });
  std::erase_if(out.utterances,
                [&](const auto& u) { return drop.contains(u.intent); });
  return out;
}

/// Seeded train/test split. |train| = floor(fraction * N + 0.5); the train
/// members are the first |train| entries of seeded_permutation(N, seed).
/// Both lists keep the input order.
inline SplitPair split_dataset(const std::vector<std::string>& ids,
                               double fraction, uint64_t seed) {
  if (ids.empty()) throw ArgumentError("split_dataset: ids must be non-empty");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ArgumentError("split_dataset: fraction must lie in (0, 1)");
  {
    std::unordered_set<std::string> uniq(ids.begin(), ids.end());
    if (uniq.size() != ids.size())
      throw ArgumentError("split_dataset: ids must be unique");
  }
  const size_t n = ids.size();
  const auto n_train =
      static_cast<size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
  const auto perm = seeded_permutation(n, seed);
  std::vector<bool> in_train(n, false);
  for (size_t i = 0; i < n_train; ++i) in_train[perm[i]] = true;

  SplitPair sp;
  sp.seed = seed;
  sp.fraction = fraction;
  for (size_t i = 0; i < n; ++i)
    (in_train[i] ? sp.train : sp.test).push_back(ids[i]);
  return sp;
}

/// Restricts a dataset to the given ids, keeping the canonical intent order.
inline IntentDataset subset(const IntentDataset& ds,
                            const std::vector<std::string>& ids) {
  std::unordered_set<std::string> keep(ids.begin(), ids.end());
  IntentDataset out;
  out.name = ds.name;
  out.intents = ds.intents;
  out.excluded_intents = ds.excluded_intents;
  for (const auto& u : ds.utterances)
    if (keep.contains(u.id)) out.utterances.push_back(u);
  return out;
}

inline Json split_to_json(const SplitPair& sp) {
  Json j;
  j["seed"] = sp.seed;
  j["fraction"] = sp.fraction;
  j["train"] = sp.train;
  j["test"] = sp.test;
  return j;
}

inline SplitPair split_from_json(const Json& j) {
  try {
    SplitPair sp;
    sp.seed = j.at("seed").get<uint64_t>();
    sp.fraction = j.at("fraction").get<double>();
    sp.train = j.at("train").get<std::vector<std::string>>();
    sp.test = j.at("test").get<std::vector<std::string>>();
    return sp;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("split file: ") + e.what());
  }
}

}  // namespace hardneg::corpus
