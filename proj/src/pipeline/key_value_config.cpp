#include "coverid/pipeline/key_value_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace coverid::pipeline {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* type) {
  throw Error(ErrorCode::InvalidConfig, "key '" + key + "': '" + value + "' is not a valid " + type);
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate key '" + key + "'");
    }
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_key_values(buffer.str());
}

std::string format_key_values(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

const std::string* ConfigReader::take(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

void ConfigReader::read(const std::string& key, int& target) {
  if (const std::string* v = take(key)) {
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), target);
    if (ec != std::errc{} || ptr != v->data() + v->size()) bad_value(key, *v, "integer");
  }
}

void ConfigReader::read(const std::string& key, std::uint64_t& target) {
  if (const std::string* v = take(key)) {
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), target);
    if (ec != std::errc{} || ptr != v->data() + v->size()) bad_value(key, *v, "unsigned integer");
  }
}

void ConfigReader::read(const std::string& key, double& target) {
  if (const std::string* v = take(key)) {
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), target);
    if (ec != std::errc{} || ptr != v->data() + v->size()) bad_value(key, *v, "number");
  }
}

void ConfigReader::read(const std::string& key, bool& target) {
  if (const std::string* v = take(key)) {
    if (*v == "true" || *v == "1") {
      target = true;
    } else if (*v == "false" || *v == "0") {
      target = false;
    } else {
      bad_value(key, *v, "boolean");
    }
  }
}

void ConfigReader::read(const std::string& key, std::string& target) {
  if (const std::string* v = take(key)) target = *v;
}

void ConfigReader::finish() const {
  for (const auto& [k, v] : values_) {
    if (!consumed_.contains(k)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + k + "'");
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace coverid::pipeline
