#ifndef AVSAL_KV_HPP
#define AVSAL_KV_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "avsal/common.hpp"

namespace avsal {

// Flat key=value text. Blank lines and lines starting with '#' are skipped;
// whitespace around key and value is trimmed. Duplicate keys are an error so
// a typo cannot silently override an earlier line.
inline std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text,
                                                                      const char* what) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(cat(what, " line ", lineno, ": expected key=value, got \"", t, "\""));
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(cat(what, " line ", lineno, ": empty key"));
    for (const auto& [k, v] : out)
      if (k == key) throw ConfigError(cat(what, ": duplicate key ", key));
    out.emplace_back(key, val);
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot open ", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::int64_t kv_int(const std::string& key, const std::string& val) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(val, &pos);
    if (pos != val.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(cat(key, ": expected integer, got \"", val, "\""));
  }
}

inline double kv_double(const std::string& key, const std::string& val) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(val, &pos);
    if (pos != val.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(cat(key, ": expected number, got \"", val, "\""));
  }
}

inline bool kv_bool(const std::string& key, const std::string& val) {
  if (val == "1" || val == "true") return true;
  if (val == "0" || val == "false") return false;
  throw ConfigError(cat(key, ": expected 0/1/true/false, got \"", val, "\""));
}

// Comma-separated list of numbers, e.g. "16,32,64,128" or "0.5,0.25".
inline std::vector<double> kv_list(const std::string& key, const std::string& val) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(val);
  while (std::getline(in, item, ',')) out.push_back(kv_double(key, item));
  if (out.empty()) throw ConfigError(cat(key, ": expected a comma-separated list"));
  return out;
}

}  // namespace avsal

#endif  // AVSAL_KV_HPP
