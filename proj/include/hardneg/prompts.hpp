#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hardneg/error.hpp"
#include "hardneg/util.hpp"

namespace hardneg {

/// Prompt templates for generation and verification. Placeholders:
/// {intent}, {samples}, {keywords}, {utterance}, {intents}. The wording is
/// configuration; any field can be overridden from a JSON file.
struct PromptTemplates {
  std::string generation_system =
      "You write single user utterances for testing an intent classifier. "
      "Answer with only the requested sentence and nothing else.";
  std::string seed_intent =
      "Here is an intent from a task-oriented dialog dataset.\n"
      "Intent: {intent}\n"
      "Example utterances:\n{samples}\n"
      "Reply with \"OK\" once you understand what this intent covers.";
  std::string generate =
      "Write one question that contains the words {keywords} and is not "
      "related to the intent \"{intent}\".";
  std::string generate_retry =
      "The sentence must contain the words {keywords}, must not be related to "
      "the intent \"{intent}\", and must differ from your earlier sentences. "
      "Answer with only the new sentence.";
  std::string step1_system =
      "You decide whether a user utterance belongs to an intent category. "
      "Answer with only \"yes\" or \"no\".";
  std::string step1_question =
      "Intent: {intent}\nUtterance: \"{utterance}\"\n"
      "Is this utterance related to the intent \"{intent}\"?";
  std::string step2_system =
      "These are all the intent categories supported by a dialog system:\n"
      "{intents}\nAnswer every question with only \"yes\" or \"no\".";
  std::string step2_question =
      "Utterance: \"{utterance}\"\n"
      "Is this utterance related to any of these intent categories?";
  std::string verdict_retry = "Please answer with only \"yes\" or \"no\".";

  static PromptTemplates from_json(const Json& j) {
    PromptTemplates p;
    const std::pair<const char*, std::string*> fields[] = {
        {"generation_system", &p.generation_system},
        {"seed_intent", &p.seed_intent},
        {"generate", &p.generate},
        {"generate_retry", &p.generate_retry},
        {"step1_system", &p.step1_system},
        {"step1_question", &p.step1_question},
        {"step2_system", &p.step2_system},
        {"step2_question", &p.step2_question},
        {"verdict_retry", &p.verdict_retry},
    };
    if (!j.is_object()) throw ConfigError("prompt file must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for (const auto& [name, dst] : fields) {
        if (key == name) {
          if (!value.is_string())
            throw ConfigError("prompt '" + key + "' must be a string");
          *dst = value.get<std::string>();
          known = true;
        }
      }
      if (!known) throw ConfigError("unknown prompt template '" + key + "'");
    }
    return p;
  }
};

/// Substitutes {name} placeholders; unknown placeholders are left as-is.
inline std::string render(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [k, v] : vars) {
          if (k == name) {
            out += v;
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

/// "a" / "a" and "b" / "a", "b" and "c"
inline std::string quoted_list(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += (i + 1 == words.size()) ? " and " : ", ";
    out += "\"" + words[i] + "\"";
  }
  return out;
}

}  // namespace hardneg
