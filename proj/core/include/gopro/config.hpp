#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gopro {

// Layered run configuration: compiled-in defaults <- YAML file <- command
// line overrides. Every tunable in the framework is addressable by a dotted
// path ("loss.temperature", "rho.context_length", ...). Keys are validated
// against a fixed registry; unknown paths are reported exhaustively.
//
// Values are stored in canonical string form so that serialize -> parse is
// an exact round trip and the config hash is stable across processes.
class RunConfig {
 public:
  enum class Type { Int, Float, Bool, Str, Enum };

  struct KeySpec {
    std::string key;
    Type type;
    std::string default_value;
    std::vector<std::string> enum_values;  // only for Type::Enum
    std::string help;
  };

  // All keys at their registry defaults.
  static RunConfig defaults();

  static const std::vector<KeySpec>& registry();

  // Merges a YAML file over the current values. Nested maps are flattened
  // to dotted paths; sequences become comma-joined scalars.
  void load_file(const std::string& path);
  void load_yaml_string(const std::string& text, const std::string& origin);

  // Applies one "dotted.key=value" override.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_str(const std::string& key) const;
  std::vector<std::int64_t> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::string> get_str_list(const std::string& key) const;

  // FNV-1a over the sorted resolved key=value lines.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  // Nested YAML document of the fully resolved config, keys sorted.
  std::string to_yaml() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  const KeySpec& spec_for(const std::string& key) const;
  std::string canonicalize(const KeySpec& spec, const std::string& raw) const;

  std::map<std::string, std::string> values_;
};

// 64-bit FNV-1a; used for config hashes and parameter checksums.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace gopro
