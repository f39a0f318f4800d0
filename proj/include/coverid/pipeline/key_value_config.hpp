#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "coverid/error.hpp"

namespace coverid::pipeline {

// Flat `key = value` text: one pair per line, '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& values);

// Pulls typed values out of a KeyValues map; finish() rejects leftovers.
class ConfigReader {
 public:
  explicit ConfigReader(KeyValues values) : values_(std::move(values)) {}

  void read(const std::string& key, int& target);
  void read(const std::string& key, double& target);
  void read(const std::string& key, bool& target);
  void read(const std::string& key, std::uint64_t& target);
  void read(const std::string& key, std::string& target);

  void finish() const;

 private:
  const std::string* take(const std::string& key);

  KeyValues values_;
  std::set<std::string> consumed_;
};

std::string format_number(double v);

}  // namespace coverid::pipeline
