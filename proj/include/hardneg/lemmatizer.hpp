#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hardneg::keywords {

namespace detail {

using Entry = std::pair<std::string_view, std::string_view>;

// Irregular noun plurals plus words that end in "s" but are not plurals.
// Every value is a fixed point of lemmatize().
inline constexpr auto kNounExceptions = [] {
  auto table = std::to_array<Entry>({
      {"afterwards", "afterwards"}, {"always", "always"},
      {"analyses", "analysis"},     {"besides", "besides"},
      {"canvas", "canvas"},         {"children", "child"},
      {"christmas", "christmas"},   {"cookies", "cookie"},
      {"crises", "crisis"},         {"criteria", "criterion"},
      {"dice", "die"},              {"dies", "die"},
      {"diagnoses", "diagnosis"},   {"echoes", "echo"},
      {"economics", "economics"},   {"elves", "elf"},
      {"feet", "foot"},             {"geese", "goose"},
      {"goes", "go"},               {"halves", "half"},
      {"heroes", "hero"},           {"knives", "knife"},
      {"leaves", "leaf"},           {"lens", "lens"},
      {"lice", "louse"},            {"lies", "lie"},
      {"lives", "life"},            {"loaves", "loaf"},
      {"mathematics", "mathematics"}, {"means", "means"},
      {"men", "man"},               {"mice", "mouse"},
      {"movies", "movie"},          {"news", "news"},
      {"nowadays", "nowadays"},     {"oxen", "ox"},
      {"perhaps", "perhaps"},       {"phenomena", "phenomenon"},
      {"physics", "physics"},       {"pies", "pie"},
      {"politics", "politics"},     {"potatoes", "potato"},
      {"sometimes", "sometimes"},   {"selves", "self"},
      {"series", "series"},         {"sheep", "sheep"},
      {"shelves", "shelf"},         {"species", "species"},
      {"teeth", "tooth"},           {"texas", "texas"},
      {"theses", "thesis"},         {"thieves", "thief"},
      {"ties", "tie"},              {"tomatoes", "tomato"},
      {"towards", "towards"},       {"wives", "wife"},
      {"wolves", "wolf"},           {"women", "woman"},
      {"whereas", "whereas"},       {"various", "various"},
      {"previous", "previous"},     {"famous", "famous"},
      {"unless", "unless"},         {"less", "less"},
      {"across", "across"},         {"thus", "thus"},
      {"plus", "plus"},             {"yes", "yes"},
      {"bus", "bus"},               {"gas", "gas"},
      {"alias", "alias"},           {"atlas", "atlas"},
      {"ios", "ios"},               {"status", "status"},
  });
  std::sort(table.begin(), table.end());
  return table;
}();

// Irregular past forms; consulted only by inflection_candidates().
inline constexpr auto kIrregularVerbs = [] {
  auto table = std::to_array<Entry>({
      {"ate", "eat"},       {"bought", "buy"},  {"brought", "bring"},
      {"built", "build"},   {"came", "come"},   {"chose", "choose"},
      {"did", "do"},        {"drove", "drive"}, {"felt", "feel"},
      {"flew", "fly"},      {"forgot", "forget"}, {"found", "find"},
      {"gave", "give"},     {"got", "get"},     {"gone", "go"},
      {"had", "have"},      {"heard", "hear"},  {"held", "hold"},
      {"kept", "keep"},     {"knew", "know"},   {"left", "leave"},
      {"lost", "lose"},     {"made", "make"},   {"meant", "mean"},
      {"met", "meet"},      {"paid", "pay"},    {"ran", "run"},
      {"said", "say"},      {"saw", "see"},     {"sent", "send"},
      {"sold", "sell"},     {"spent", "spend"}, {"stole", "steal"},
      {"taken", "take"},    {"thought", "think"}, {"told", "tell"},
      {"took", "take"},     {"went", "go"},     {"woke", "wake"},
      {"wrote", "write"},
  });
  std::sort(table.begin(), table.end());
  return table;
}();

template <size_t N>
const std::string_view* lookup(const std::array<Entry, N>& table,
                               std::string_view key) {
  auto it = std::lower_bound(
      table.begin(), table.end(), key,
      [](const Entry& e, std::string_view k) { return e.first < k; });
  if (it != table.end() && it->first == key) return &it->second;
  return nullptr;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

}  // namespace detail

/// Noun lemma of a lowercase token, approximating WordNet's noun morphology
/// without its dictionary:
///   1. exception table (irregular plurals, non-plural words ending in "s"),
///      also applied to the output of step 3;
///   2. tokens of length <= 3, or ending in "ss", "us", "is", are kept;
///   3. "ies" -> "y"; "sses" -> "ss"; "xes"/"ches"/"shes" -> drop "es";
///      any other "s" -> drop "s" (so "phones" -> "phone", "cards" -> "card").
/// Outputs never end in a strippable "s" and table values are fixed points,
/// so the function is idempotent.
inline std::string lemmatize(std::string_view token) {
  using detail::ends_with;
  if (const auto* hit = detail::lookup(detail::kNounExceptions, token))
    return std::string(*hit);
  // A stripped form can itself be an irregular plural ("childrens").
  auto finish = [](std::string s) {
    if (const auto* hit = detail::lookup(detail::kNounExceptions, s))
      return std::string(*hit);
    return s;
  };
  if (token.size() <= 3 || ends_with(token, "ss") || ends_with(token, "us") ||
      ends_with(token, "is") || !ends_with(token, "s"))
    return std::string(token);
  if (ends_with(token, "ies") && token.size() > 4)
    return finish(std::string(token.substr(0, token.size() - 3)) + "y");
  if (ends_with(token, "sses") || ends_with(token, "xes") ||
      ends_with(token, "ches") || ends_with(token, "shes"))
    return finish(std::string(token.substr(0, token.size() - 2)));
  return finish(std::string(token.substr(0, token.size() - 1)));
}

/// Every base form a token could be an inflection of: the token itself, its
/// noun lemma, and verb stems for "-ing"/"-ed" endings and irregular past
/// forms. Used for keyword containment, where a generated sentence may use a
/// mined keyword in a different part of speech ("tracking" for "track").
inline std::vector<std::string> inflection_candidates(std::string_view token) {
  using detail::ends_with;
  std::vector<std::string> out;
  auto add = [&](std::string s) {
    if (s.size() >= 2 && std::find(out.begin(), out.end(), s) == out.end())
      out.push_back(std::move(s));
  };
  add(std::string(token));
  add(lemmatize(token));
  if (const auto* hit = detail::lookup(detail::kIrregularVerbs, token))
    add(std::string(*hit));

  auto add_stem_variants = [&](std::string_view stem) {
    if (stem.size() < 2) return;
    add(std::string(stem));
    add(std::string(stem) + "e");
    const auto n = stem.size();
    if (n >= 3 && stem[n - 1] == stem[n - 2] && !detail::is_vowel(stem[n - 1]))
      add(std::string(stem.substr(0, n - 1)));
  };
  if (ends_with(token, "ing") && token.size() >= 5)
    add_stem_variants(token.substr(0, token.size() - 3));
  if (ends_with(token, "ied") && token.size() >= 5)
    add(std::string(token.substr(0, token.size() - 3)) + "y");
  else if (ends_with(token, "ed") && token.size() >= 4)
    add_stem_variants(token.substr(0, token.size() - 2));
  if (ends_with(token, "es") && token.size() >= 4)
    add(std::string(token.substr(0, token.size() - 2)));
  return out;
}

}  // namespace hardneg::keywords
