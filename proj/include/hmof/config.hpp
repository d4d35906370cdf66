#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hmof {

/// Parses "section.key = value" lines; '#' starts a comment. Throws ConfigError on
/// malformed lines or repeated keys.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin);

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognized key with its default, in display order.
const std::vector<ConfigKey>& config_keys();

/// Resolved pipeline configuration. Every key always has a value; unknown keys are rejected.
class Config {
 public:
  Config();

  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  /// Applies a "section.key=value" override.
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// True when the value is the literal "auto".
  bool is_auto(const std::string& key) const { return get(key) == "auto"; }

  /// "key = value" lines in key order.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Formats a double so that parsing it back yields the same value.
std::string format_double(double value);

}  // namespace hmof
