#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hardneg/error.hpp"
#include "json.hpp"

namespace hardneg {

using Json = nlohmann::ordered_json;

inline std::string_view trim_view(std::string_view s) {
  constexpr std::string_view kWs = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(kWs);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kWs);
  return s.substr(b, e - b + 1);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

inline std::string join(const std::vector<std::string>& parts,
                        std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Replaces characters outside [A-Za-z0-9_.-] so the result is a safe file name.
inline std::string sanitize_file_component(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    out += (std::isalnum(c) || c == '_' || c == '-' || c == '.')
               ? static_cast<char>(c)
               : '_';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary sibling and renames, so readers never observe
/// a half-written file.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Splits JSONL text into parsed objects. Blank lines are skipped; line
/// numbers in errors are 1-based.
template <typename F>
void for_each_jsonl(std::string_view text, const std::string& source, F&& fn) {
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    auto line = trim_view(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source + ":" + std::to_string(line_no) +
                       ": invalid JSON (" + e.what() + ")");
    }
    fn(j, line_no);
    if (nl == text.size()) break;
  }
}

/// Drops a final line that is not valid JSON and lacks its newline, the mark
/// of an interrupted append. Sets `dropped` when that happens.
inline std::string_view without_truncated_tail(std::string_view text, bool& dropped) {
  dropped = false;
  if (text.empty() || text.back() == '\n') return text;
  const auto nl = text.rfind('\n');
  const size_t start = nl == std::string_view::npos ? 0 : nl + 1;
  if (Json::accept(text.substr(start))) return text;
  dropped = true;
  return text.substr(0, start);
}

inline std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

/// Reads a required string field, naming the location on failure.
inline std::string require_string(const Json& j, const char* field,
                                  const std::string& where) {
  auto it = j.find(field);
  if (it == j.end())
    throw ParseError(where + ": missing field '" + field + "'");
  if (!it->is_string())
    throw ParseError(where + ": field '" + field + "' must be a string");
  return it->get<std::string>();
}

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

}  // namespace hardneg
