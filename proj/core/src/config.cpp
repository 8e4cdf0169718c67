#include "tritcal/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tritcal/error.hpp"

namespace tritcal {

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_integer(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string format_real(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value,
                                       std::chars_format::general, 17);
  if (ec != std::errc()) fail(ErrorCategory::invalid_parameter, "cannot format real");
  return std::string(buffer, ptr);
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string source) {
  KeyValueConfig config;
  config.source_ = std::move(source);
  int line_number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(start, end - start));
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    ++line_number;
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCategory::parse, config.source_ + ":" + std::to_string(line_number) +
                                     ": expected `key = value`");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      fail(ErrorCategory::parse,
           config.source_ + ":" + std::to_string(line_number) + ": empty key");
    }
    config.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    config.lines_[std::string(key)] = line_number;
    if (end == text.size()) break;
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

bool KeyValueConfig::contains(std::string_view key) const {
  return values_.find(key) != values_.end();
}

void KeyValueConfig::set(std::string key, std::string value) {
  lines_.erase(key);
  values_[std::move(key)] = std::move(value);
}

void KeyValueConfig::merge(const KeyValueConfig& overrides) {
  for (const auto& [key, value] : overrides.values_) set(key, value);
}

std::optional<std::string> KeyValueConfig::find(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::where(std::string_view key) const {
  const auto it = lines_.find(key);
  if (it == lines_.end()) return source_ + ": key `" + std::string(key) + "`";
  return source_ + ":" + std::to_string(it->second) + ": key `" + std::string(key) + "`";
}

std::string KeyValueConfig::get_string(std::string_view key, std::string fallback) const {
  auto value = find(key);
  return value ? *value : std::move(fallback);
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  const auto parsed = parse_real(*value);
  if (!parsed) fail(ErrorCategory::parse, where(key) + ": expected a real number");
  return *parsed;
}

std::int64_t KeyValueConfig::get_int(std::string_view key, std::int64_t fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  const auto parsed = parse_integer(*value);
  if (!parsed) fail(ErrorCategory::parse, where(key) + ": expected an integer");
  return *parsed;
}

std::uint64_t KeyValueConfig::get_seed(std::string_view key, std::uint64_t fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  std::uint64_t seed = 0;
  const auto text = trim(*value);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCategory::parse, where(key) + ": expected a non-negative integer seed");
  }
  return seed;
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  if (*value == "true" || *value == "1" || *value == "yes" || *value == "on") return true;
  if (*value == "false" || *value == "0" || *value == "no" || *value == "off") return false;
  fail(ErrorCategory::parse, where(key) + ": expected a boolean");
}

namespace {

std::vector<std::string_view> tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',')) ++i;
    const auto start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != ',') ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::optional<std::vector<double>> KeyValueConfig::get_doubles(std::string_view key,
                                                               std::size_t expected) const {
  const auto value = find(key);
  if (!value) return std::nullopt;
  std::vector<double> out;
  for (const auto token : tokens(*value)) {
    const auto parsed = parse_real(token);
    if (!parsed) fail(ErrorCategory::parse, where(key) + ": bad number `" + std::string(token) + "`");
    out.push_back(*parsed);
  }
  if (out.empty() || (expected != 0 && out.size() != expected)) {
    fail(ErrorCategory::parse, where(key) + ": expected " + std::to_string(expected) +
                                   " values, got " + std::to_string(out.size()));
  }
  return out;
}

std::optional<std::vector<std::int64_t>> KeyValueConfig::get_ints(std::string_view key) const {
  const auto value = find(key);
  if (!value) return std::nullopt;
  std::vector<std::int64_t> out;
  for (const auto token : tokens(*value)) {
    const auto parsed = parse_integer(token);
    if (!parsed) fail(ErrorCategory::parse, where(key) + ": bad integer `" + std::string(token) + "`");
    out.push_back(*parsed);
  }
  if (out.empty()) fail(ErrorCategory::parse, where(key) + ": empty list");
  return out;
}

std::vector<std::string> KeyValueConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) out.push_back(key);
  return out;
}

std::string KeyValueConfig::echo() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace tritcal
