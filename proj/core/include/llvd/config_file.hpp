#pragma once

#include <map>
#include <string>
#include <vector>

#include "llvd/model.hpp"

// Flat "key = value" configuration text: one pair per line, '#' starts a
// comment, blank lines are ignored, later assignments override earlier
// ones. The same format travels inside checkpoints, so a model can always
// be rebuilt from its own file.

namespace llvd {

class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Typed getters fall back to the default when the key is absent and
  // throw ConfigError (naming the key) when the value does not parse.
  std::string get_str(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int64_t> get_int_list(const std::string& key,
                                    std::vector<int64_t> fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> fallback) const;

  /// One "key = value" line per entry, keys sorted.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// model.* keys <-> ModelConfig. Unknown keys are left untouched; absent
/// keys keep the ModelConfig defaults. An explicitly empty
/// model.stage_widths means "no stages" (the recurrence-only variant).
ModelConfig model_config_from(const KeyValues& kv);
KeyValues model_config_to_kv(const ModelConfig& cfg);

}  // namespace llvd
