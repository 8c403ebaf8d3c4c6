#include "llvd/config_file.hpp"

#include <fstream>
#include <sstream>

namespace llvd {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) bad_value(key, value, "an integer");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "an integer");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                        line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv.entries_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string KeyValues::get_str(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

int64_t KeyValues::get_int(const std::string& key, int64_t fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_int(key, it->second);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_double(key, it->second);
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  bad_value(key, v, "a boolean (true/false/1/0)");
}

std::vector<int64_t> KeyValues::get_int_list(const std::string& key,
                                             std::vector<int64_t> fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<int64_t> out;
  for (const std::string& tok : split_commas(it->second)) out.push_back(parse_int(key, tok));
  return out;
}

std::vector<double> KeyValues::get_double_list(const std::string& key,
                                               std::vector<double> fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& tok : split_commas(it->second)) out.push_back(parse_double(key, tok));
  return out;
}

std::string KeyValues::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
  return os.str();
}

ModelConfig model_config_from(const KeyValues& kv) {
  ModelConfig cfg;
  cfg.stage_widths = kv.get_int_list("model.stage_widths", cfg.stage_widths);
  cfg.lstm_hidden = kv.get_int("model.lstm_hidden", cfg.lstm_hidden);
  cfg.lstm_layers = static_cast<int>(kv.get_int("model.lstm_layers", cfg.lstm_layers));
  cfg.kernel = static_cast<int>(kv.get_int("model.kernel", cfg.kernel));
  cfg.in_channels = kv.get_int("model.in_channels", cfg.in_channels);
  cfg.shuffle = static_cast<int>(kv.get_int("model.shuffle", cfg.shuffle));
  cfg.conv_per_stage = static_cast<int>(kv.get_int("model.conv_per_stage", cfg.conv_per_stage));
  cfg.validate();
  return cfg;
}

KeyValues model_config_to_kv(const ModelConfig& cfg) {
  KeyValues kv;
  std::string widths;
  for (size_t i = 0; i < cfg.stage_widths.size(); ++i) {
    if (i) widths += ",";
    widths += std::to_string(cfg.stage_widths[i]);
  }
  kv.set("model.stage_widths", widths);
  kv.set("model.lstm_hidden", std::to_string(cfg.lstm_hidden));
  kv.set("model.lstm_layers", std::to_string(cfg.lstm_layers));
  kv.set("model.kernel", std::to_string(cfg.kernel));
  kv.set("model.in_channels", std::to_string(cfg.in_channels));
  kv.set("model.shuffle", std::to_string(cfg.shuffle));
  kv.set("model.conv_per_stage", std::to_string(cfg.conv_per_stage));
  return kv;
}

}  // namespace llvd
