#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace residual {

// Line-oriented structured text used by every schema (maps/v1, sim/v1,
// exp/v1): `key = value` entries, `[section]` headers opening repeatable
// blocks, `#` comments. Values keep their raw text; typed access is on the
// caller.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const;
  std::string require(const std::string& key) const;
};

struct ConfigDoc {
  std::string schema;
  ConfigSection root;  // entries before the first section header
  std::vector<ConfigSection> sections;

  std::vector<const ConfigSection*> sections_named(const std::string& name) const;
};

ConfigDoc parse_config_text(const std::string& text, const std::string& expected_schema = "");
ConfigDoc load_config_file(const std::string& path, const std::string& expected_schema = "");

// Typed value helpers; all throw ConfigError with the offending key.
double config_double(const ConfigSection& s, const std::string& key);
double config_double_or(const ConfigSection& s, const std::string& key, double fallback);
std::int64_t config_int(const ConfigSection& s, const std::string& key);
std::int64_t config_int_or(const ConfigSection& s, const std::string& key, std::int64_t fallback);
bool config_bool_or(const ConfigSection& s, const std::string& key, bool fallback);
std::vector<std::string> split_list(const std::string& value);
std::vector<double> config_double_list(const ConfigSection& s, const std::string& key);

// FNV-1a over the canonicalized (comment-stripped, whitespace-normalized)
// document; stamped into output headers so results are traceable to their
// exact configuration.
std::uint64_t config_hash(const ConfigDoc& doc);

}  // namespace residual
