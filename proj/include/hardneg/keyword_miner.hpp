#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hardneg/corpus.hpp"
#include "hardneg/error.hpp"
#include "hardneg/lemmatizer.hpp"
#include "hardneg/log.hpp"
#include "hardneg/stopwords.hpp"
#include "hardneg/util.hpp"

namespace hardneg::keywords {

/// Mined keywords and their counts never fall below this length.
inline constexpr size_t kMinKeywordLength = 3;

struct Keyword {
  std::string lemma;
  uint64_t count = 0;

  bool operator==(const Keyword&) const = default;
};

struct KeywordProfile {
  std::string intent;
  std::vector<Keyword> keywords;  // count descending, then lemma ascending
  size_t n = 0;

  bool operator==(const KeywordProfile&) const = default;
};

struct KeywordPair {
  std::vector<std::string> members;

  bool operator==(const KeywordPair&) const = default;
};

/// Lowercased maximal runs of ASCII letters. Everything else, including
/// apostrophes, digits and non-ASCII bytes, separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (c < 0x80 && std::isalpha(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline bool is_content_word(std::string_view w) {
  return w.size() >= kMinKeywordLength && !is_stopword(w);
}

/// Ranks lemma counts: higher count first, ties broken lexicographically.
inline std::vector<Keyword> rank_counts(
    const std::unordered_map<std::string, uint64_t>& counts, size_t n) {
  std::vector<Keyword> ranked;
  ranked.reserve(counts.size());
  for (const auto& [lemma, c] : counts) ranked.push_back({lemma, c});
  const auto by_rank = [](const Keyword& a, const Keyword& b) {
    return a.count != b.count ? a.count > b.count : a.lemma < b.lemma;
  };
  const size_t keep = std::min(n, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(keep),
                    ranked.end(), by_rank);
  ranked.resize(keep);
  return ranked;
}

/// Token-level lemma frequencies per intent over the training utterances;
/// stopwords and words shorter than three characters are dropped both before
/// and after lemmatization. Profiles follow the dataset's intent order.
inline std::vector<KeywordProfile> mine_keywords(
    const corpus::IntentDataset& ds, const std::vector<std::string>& train_ids,
    size_t n) {
  if (n < 1) throw ArgumentError("mine_keywords: n must be >= 1");
  const std::unordered_set<std::string> train(train_ids.begin(),
                                              train_ids.end());
  std::unordered_map<std::string, std::unordered_map<std::string, uint64_t>>
      per_intent;
  std::unordered_map<std::string, size_t> utterance_counts;
  for (const auto& u : ds.utterances) {
    if (u.intent == corpus::kOosLabel || !train.contains(u.id)) continue;
    ++utterance_counts[u.intent];
    auto& counts = per_intent[u.intent];
    for (const auto& tok : tokenize(u.text)) {
      if (!is_content_word(tok)) continue;
      auto lemma = lemmatize(tok);
      if (!is_content_word(lemma)) continue;
      ++counts[lemma];
    }
  }

  std::vector<KeywordProfile> profiles;
  profiles.reserve(ds.intents.size());
  for (const auto& intent : ds.intents) {
    if (!utterance_counts.contains(intent))
      throw ArgumentError("mine_keywords: intent '" + intent +
                          "' has no training utterances");
    KeywordProfile p{intent, rank_counts(per_intent[intent], n), n};
    if (p.keywords.empty())
      log::warn("mine_keywords: intent '" + intent +
                "' has no content words after filtering");
    profiles.push_back(std::move(p));
  }
  return profiles;
}

/// All size-m combinations of the profile's lemmas, in lexicographic order of
/// member indices.
inline std::vector<KeywordPair> keyword_pairs(const KeywordProfile& profile,
                                              size_t m) {
  if (m < 1) throw ArgumentError("keyword_pairs: m must be >= 1");
  std::vector<KeywordPair> out;
  const size_t k = profile.keywords.size();
  if (k < m) return out;
  std::vector<size_t> idx(m);
  for (size_t i = 0; i < m; ++i) idx[i] = i;
  for (;;) {
    KeywordPair pair;
    pair.members.reserve(m);
    for (auto i : idx) pair.members.push_back(profile.keywords[i].lemma);
    out.push_back(std::move(pair));
    // Advance the rightmost index that still has room.
    size_t pos = m;
    while (pos > 0 && idx[pos - 1] == k - m + (pos - 1)) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (size_t j = pos; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

inline uint64_t binomial(uint64_t n, uint64_t k) {
  if (k > n) return 0;
  uint64_t r = 1;
  for (uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// ---------------------------------------------------------------------------
// Profile file: one {"intent": ..., "keywords": [[lemma, count], ...]} per line.

inline Json profile_to_json(const KeywordProfile& p) {
  Json j;
  j["intent"] = p.intent;
  Json kws = Json::array();
  for (const auto& k : p.keywords) kws.push_back(Json::array({k.lemma, k.count}));
  j["keywords"] = std::move(kws);
  return j;
}

inline std::string profiles_to_jsonl(const std::vector<KeywordProfile>& ps) {
  std::string out;
  for (const auto& p : ps) out += profile_to_json(p).dump() + "\n";
  return out;
}

inline std::vector<KeywordProfile> parse_profiles(std::string_view text,
                                                  const std::string& source) {
  std::vector<KeywordProfile> out;
  for_each_jsonl(text, source, [&](const Json& j, size_t line) {
    const std::string where = source + ":" + std::to_string(line);
    KeywordProfile p;
    p.intent = require_string(j, "intent", where);
    if (!j.contains("keywords") || !j["keywords"].is_array())
      throw ParseError(where + ": field 'keywords' must be an array");
    for (const auto& kw : j["keywords"]) {
      if (!kw.is_array() || kw.size() != 2 || !kw[0].is_string() ||
          !kw[1].is_number_unsigned())
        throw ParseError(where + ": keywords entries must be [lemma, count]");
      p.keywords.push_back({kw[0].get<std::string>(), kw[1].get<uint64_t>()});
    }
    p.n = p.keywords.size();
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace hardneg::keywords
