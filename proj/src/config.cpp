#include "residual/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace residual {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

const std::string* ConfigSection::find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

std::string ConfigSection::require(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ConfigError("missing required key '" + key + "'" +
                            (name.empty() ? "" : " in [" + name + "]"));
  return *v;
}

std::vector<const ConfigSection*> ConfigDoc::sections_named(const std::string& name) const {
  std::vector<const ConfigSection*> out;
  for (const auto& s : sections)
    if (s.name == name) out.push_back(&s);
  return out;
}

ConfigDoc parse_config_text(const std::string& text, const std::string& expected_schema) {
  ConfigDoc doc;
  ConfigSection* current = &doc.root;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header '" + s + "'");
      doc.sections.push_back({trim(s.substr(1, s.size() - 2)), {}});
      current = &doc.sections.back();
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + s + "'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    current->entries.emplace_back(key, value);
  }
  if (const std::string* sc = doc.root.find("schema")) doc.schema = *sc;
  if (!expected_schema.empty() && doc.schema != expected_schema)
    throw ConfigError("expected schema '" + expected_schema + "', document declares '" +
                      (doc.schema.empty() ? "<none>" : doc.schema) + "'");
  return doc;
}

ConfigDoc load_config_file(const std::string& path, const std::string& expected_schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), expected_schema);
}

double config_double(const ConfigSection& s, const std::string& key) {
  const std::string v = s.require(key);
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a real number");
  }
}

double config_double_or(const ConfigSection& s, const std::string& key, double fallback) {
  return s.find(key) ? config_double(s, key) : fallback;
}

std::int64_t config_int(const ConfigSection& s, const std::string& key) {
  const std::string v = s.require(key);
  try {
    std::size_t pos = 0;
    // Accept scientific notation for counts (1e6 paths etc.) when integral.
    if (v.find_first_of("eE.") != std::string::npos) {
      double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      auto n = static_cast<std::int64_t>(x);
      if (static_cast<double>(n) != x) throw std::invalid_argument(v);
      return n;
    }
    std::int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + v + "' as an integer");
  }
}

std::int64_t config_int_or(const ConfigSection& s, const std::string& key, std::int64_t fallback) {
  return s.find(key) ? config_int(s, key) : fallback;
}

bool config_bool_or(const ConfigSection& s, const std::string& key, bool fallback) {
  const std::string* v = s.find(key);
  if (!v) return fallback;
  std::string t = *v;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("key '" + key + "': cannot parse '" + *v + "' as a boolean");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> config_double_list(const ConfigSection& s, const std::string& key) {
  std::vector<double> out;
  for (const std::string& item : split_list(s.require(key))) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': cannot parse list item '" + item + "'");
    }
  }
  return out;
}

std::uint64_t config_hash(const ConfigDoc& doc) {
  std::string canon = "schema=" + doc.schema + "\n";
  auto emit = [&canon](const ConfigSection& s) {
    if (!s.name.empty()) canon += "[" + s.name + "]\n";
    for (const auto& [k, v] : s.entries) canon += k + "=" + v + "\n";
  };
  emit(doc.root);
  for (const auto& s : doc.sections) emit(s);

  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace residual
