#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "coverid/error.hpp"

namespace coverid::pipeline {

enum class Split { Train, Validation, TestQuery, TestDummy };

const char* to_string(Split split);
Split parse_split(std::string_view text);

struct SongEntry {
  std::string song_id;
  std::string clique_id;  // cover group; dummies get a clique of their own
  std::filesystem::path chroma_path;
  Split split = Split::Train;
};

struct SongManifest {
  std::vector<SongEntry> entries;
  // Relative chroma paths resolve against this directory.
  std::filesystem::path base_dir;

  std::vector<const SongEntry*> in_split(Split split) const;
  const SongEntry* find(std::string_view song_id) const;
  std::filesystem::path resolve(const SongEntry& entry) const;
  bool has_split(Split split) const { return !in_split(split).empty(); }
};

// CSV with the header `song_id,clique_id,chroma_path,split`.
SongManifest parse_manifest(std::string_view text, std::filesystem::path base_dir = {});
SongManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const SongManifest& manifest);

// Unique ids, every clique confined to one split, at least two members per
// train/validation clique. Throws InvalidManifest.
void validate_manifest(const SongManifest& manifest);

}  // namespace coverid::pipeline
