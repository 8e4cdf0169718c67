#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tritcal {

// Line-oriented `key = value` text configuration. Values holding several
// numbers are whitespace or comma separated. Lines starting with `#` are
// comments.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text, std::string source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;
  void set(std::string key, std::string value);
  void merge(const KeyValueConfig& overrides);

  std::optional<std::string> find(std::string_view key) const;
  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_seed(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  // Empty optional if the key is absent; parse error if present with the
  // wrong count (expected == 0 accepts any nonzero count).
  std::optional<std::vector<double>> get_doubles(std::string_view key,
                                                 std::size_t expected = 0) const;
  std::optional<std::vector<std::int64_t>> get_ints(std::string_view key) const;

  std::vector<std::string> keys() const;

  // Sorted `key = value` dump; stable across runs.
  std::string echo() const;

 private:
  std::string where(std::string_view key) const;

  std::map<std::string, std::string, std::less<>> values_;
  std::map<std::string, int, std::less<>> lines_;
  std::string source_ = "<memory>";
};

// 17 significant digits (trailing zeros dropped); reads back bit-exactly.
std::string format_real(double value);

// Strict full-string number parsing; empty optional on any trailing junk.
std::optional<double> parse_real(std::string_view text);
std::optional<std::int64_t> parse_integer(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char delimiter);
std::string_view trim(std::string_view text);

}  // namespace tritcal
