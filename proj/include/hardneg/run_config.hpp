#pragma once

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hardneg/error.hpp"
#include "hardneg/util.hpp"

namespace hardneg::cli {

enum class OptKind { kString, kPath, kInt, kDouble, kBool, kList };

/// One run-configuration key. The same name is the config-file key and the
/// command-line flag (--name); flags override the file.
struct OptionSpec {
  std::string key;
  OptKind kind;
  Json fallback;  // null when the key has no default
  std::string help;
  std::vector<std::string> commands;
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"mine",  "generate", "verify", "review",
                                                 "assemble", "split", "score", "eval",
                                                 "report", "replay"};
  return names;
}

inline const std::vector<OptionSpec>& option_specs() {
  using K = OptKind;
  static const std::vector<std::string> ds_cmds = {"mine", "generate", "verify", "review",
                                                   "split"};
  static const std::vector<std::string> llm_cmds = {"generate", "verify"};
  static const std::vector<OptionSpec> specs = {
      {"dataset", K::kPath, nullptr, "intent dataset file", ds_cmds},
      {"format", K::kString, "canonical", "dataset format: canonical or clinc_json", ds_cmds},
      {"exclude-intents", K::kList, Json::array(), "comma-separated intents to drop at load",
       ds_cmds},
      {"split", K::kPath, nullptr,
       "split file whose train ids restrict mining and INS samples (default: all ids)",
       {"mine", "generate", "review"}},
      {"out", K::kPath, "hardneg-out", "output directory", command_names()},
      {"seed", K::kInt, 13, "seed for splits and INS sample selection",
       {"generate", "review", "split"}},
      {"jobs", K::kInt, 1, "worker threads", {"generate", "verify"}},
      {"n", K::kInt, 5, "keywords mined per intent", {"mine", "generate"}},
      {"m", K::kInt, 2, "keywords per generation prompt", {"generate"}},
      {"x", K::kInt, 4, "utterances requested per keyword combination", {"generate"}},
      {"samples-per-intent", K::kInt, 5, "INS examples shown per intent",
       {"generate", "review"}},
      {"profiles", K::kPath, nullptr, "keyword profile file (default: <out>/profiles.jsonl)",
       {"generate"}},
      {"backend", K::kString, nullptr, "chat backend: http or mock", llm_cmds},
      {"endpoint", K::kString, nullptr, "chat-completion URL (http backend)", llm_cmds},
      {"model", K::kString, nullptr, "model name (http backend)", llm_cmds},
      {"api-key-env", K::kString, "OPENAI_API_KEY",
       "environment variable holding the API key (http backend)", llm_cmds},
      {"timeout-ms", K::kInt, 60000, "per-request timeout in milliseconds", llm_cmds},
      {"max-retries", K::kInt, 4, "retries after a retryable failure", llm_cmds},
      {"retry-backoff-ms", K::kInt, 500, "first retry delay; doubles per retry", llm_cmds},
      {"max-concurrency", K::kInt, 4, "requests in flight at once", llm_cmds},
      {"requests-per-second", K::kDouble, 0.0, "request rate cap (0 = unlimited)", llm_cmds},
      {"script", K::kPath, nullptr, "mock backend script (JSON array or JSONL)", llm_cmds},
      {"generation-temperature", K::kDouble, 1.0, "sampling temperature for generation",
       {"generate"}},
      {"verification-temperature", K::kDouble, 0.0, "sampling temperature for verification",
       {"verify"}},
      {"prompts", K::kPath, nullptr, "JSON file overriding prompt templates", llm_cmds},
      {"records", K::kPath, nullptr,
       "record file (default: <out>/records.jsonl for verify, <out>/verified.jsonl otherwise)",
       {"verify", "review", "assemble"}},
      {"decisions", K::kPath, nullptr, "review decision file (default: <out>/decisions.jsonl)",
       {"review", "assemble"}},
      {"reviewer", K::kString, nullptr, "reviewer name (default: $USER)", {"review"}},
      {"quorum", K::kInt, 1, "accepting reviewers required per record", {"assemble"}},
      {"auto-accept", K::kBool, false, "accept every survivor still awaiting review",
       {"assemble"}},
      {"name", K::kString, "hard_negatives", "name of the assembled dataset", {"assemble"}},
      {"fraction", K::kDouble, 0.8, "training fraction", {"split"}},
      {"predictions", K::kPath, nullptr, "prediction file (JSONL with logits)",
       {"score", "eval"}},
      {"score-function", K::kString, "softmax", "softmax or energy", {"score"}},
      {"temperature", K::kDouble, 1.0, "energy temperature T", {"score", "eval"}},
      {"eval-dataset", K::kString, nullptr,
       "dataset name in reports (default: prediction file stem)", {"eval"}},
      {"thresholds", K::kList, nullptr, "comma-separated F1 thresholds (default 0.5..0.95)",
       {"eval"}},
      {"target-tpr", K::kDouble, 0.95, "recall level for the FPR metric", {"eval"}},
      {"run", K::kPath, nullptr, "directory of a recorded generate/verify run", {"replay"}},
  };
  return specs;
}

inline const OptionSpec* find_spec(std::string_view key) {
  for (const auto& s : option_specs())
    if (s.key == key) return &s;
  return nullptr;
}

inline bool applies_to(const OptionSpec& spec, std::string_view command) {
  for (const auto& c : spec.commands)
    if (c == command) return true;
  return false;
}

/// Converts a flag string or a config-file value to the key's JSON type.
inline Json coerce(const OptionSpec& spec, const Json& v, const std::string& where) {
  auto bad = [&](const char* expected) {
    return ConfigError(where + ": '" + spec.key + "' must be " + expected);
  };
  const bool is_str = v.is_string();
  const std::string s = is_str ? v.get<std::string>() : std::string();
  switch (spec.kind) {
    case OptKind::kString:
    case OptKind::kPath:
      if (!is_str) throw bad("a string");
      if (s.empty()) throw bad("non-empty");
      return s;
    case OptKind::kInt: {
      if (v.is_number_integer()) return v.get<int64_t>();
      if (!is_str) throw bad("an integer");
      char* end = nullptr;
      errno = 0;
      const long long n = std::strtoll(s.c_str(), &end, 10);
      if (s.empty() || *end != '\0' || errno) throw bad("an integer");
      return static_cast<int64_t>(n);
    }
    case OptKind::kDouble: {
      if (v.is_number()) return v.get<double>();
      if (!is_str) throw bad("a number");
      char* end = nullptr;
      const double d = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0' || !std::isfinite(d)) throw bad("a number");
      return d;
    }
    case OptKind::kBool:
      if (v.is_boolean()) return v.get<bool>();
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      throw bad("a boolean");
    case OptKind::kList: {
      Json out = Json::array();
      if (v.is_array()) {
        for (const auto& e : v) {
          if (e.is_string()) out.push_back(e.get<std::string>());
          else if (e.is_number()) out.push_back(e.dump());
          else throw bad("a list of strings");
        }
        return out;
      }
      if (!is_str) throw bad("a list");
      size_t pos = 0;
      while (pos <= s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        auto item = trim(std::string_view(s).substr(pos, comma - pos));
        if (!item.empty()) out.push_back(item);
        pos = comma + 1;
      }
      return out;
    }
  }
  return v;
}

/// Resolved key/value settings for one subcommand.
class Settings {
 public:
  Settings(std::string command, Json values)
      : command_(std::move(command)), values_(std::move(values)) {}

  const std::string& command() const { return command_; }
  const Json& values() const { return values_; }

  bool has(const std::string& key) const {
    return values_.contains(key) || !spec(key).fallback.is_null();
  }
  bool explicitly_set(const std::string& key) const { return values_.contains(key); }

  std::string str(const std::string& key) const { return get(key).get<std::string>(); }
  int64_t integer(const std::string& key) const { return get(key).get<int64_t>(); }
  double number(const std::string& key) const { return get(key).get<double>(); }
  bool flag(const std::string& key) const { return get(key).get<bool>(); }

  size_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError("'" + key + "' must be >= 0");
    return static_cast<size_t>(v);
  }

  std::vector<std::string> list(const std::string& key) const {
    if (!has(key)) return {};
    return get(key).get<std::vector<std::string>>();
  }

  std::filesystem::path path(const std::string& key) const { return str(key); }

  /// A path that must exist now.
  std::filesystem::path input(const std::string& key) const {
    auto p = path(key);
    if (!std::filesystem::exists(p))
      throw ConfigError("'" + key + "' refers to a missing file: " + p.string());
    return p;
  }

  std::optional<std::filesystem::path> optional_input(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return input(key);
  }

  /// Value of `key`, or the input file `fallback` which must exist.
  std::filesystem::path input_or(const std::string& key,
                                 const std::filesystem::path& fallback) const {
    if (has(key)) return input(key);
    if (!std::filesystem::exists(fallback))
      throw ConfigError("'" + key + "' not set and " + fallback.string() + " does not exist");
    return fallback;
  }

 private:
  static const OptionSpec& spec(const std::string& key) {
    const auto* s = find_spec(key);
    if (!s) throw ContractError("unknown setting '" + key + "'");
    return *s;
  }

  const Json& get(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return *it;
    const auto& s = spec(key);
    if (s.fallback.is_null())
      throw ConfigError("missing required field '" + key + "' (set --" + key +
                        " or \"" + key + "\" in the config file)");
    return s.fallback;
  }

  std::string command_;
  Json values_;
};

/// Reads a flat JSON config file. Keys must be known settings; keys that the
/// running subcommand does not use are ignored, so one file can drive a whole
/// pipeline.
inline Json load_config_file(const std::filesystem::path& path, std::string_view command) {
  if (!std::filesystem::exists(path))
    throw ConfigError("config file not found: " + path.string());
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
  Json out = Json::object();
  for (const auto& [key, value] : j.items()) {
    const auto* spec = find_spec(key);
    if (!spec) throw ConfigError(path.string() + ": unknown key '" + key + "'");
    if (!applies_to(*spec, command)) continue;
    out[key] = coerce(*spec, value, path.string());
  }
  return out;
}

}  // namespace hardneg::cli
