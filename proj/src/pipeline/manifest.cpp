#include "coverid/pipeline/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace coverid::pipeline {

namespace {

constexpr std::string_view kHeader = "song_id,clique_id,chroma_path,split";

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::TestQuery: return "test-query";
    case Split::TestDummy: return "test-dummy";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  for (Split s : {Split::Train, Split::Validation, Split::TestQuery, Split::TestDummy}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorCode::InvalidManifest, "unknown split '" + std::string(text) + "'");
}

std::vector<const SongEntry*> SongManifest::in_split(Split split) const {
  std::vector<const SongEntry*> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(&e);
  }
  return out;
}

const SongEntry* SongManifest::find(std::string_view song_id) const {
  for (const auto& e : entries) {
    if (e.song_id == song_id) return &e;
  }
  return nullptr;
}

std::filesystem::path SongManifest::resolve(const SongEntry& entry) const {
  return entry.chroma_path.is_absolute() ? entry.chroma_path : base_dir / entry.chroma_path;
}

SongManifest parse_manifest(std::string_view text, std::filesystem::path base_dir) {
  SongManifest manifest;
  manifest.base_dir = std::move(base_dir);
  bool header_seen = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kHeader) throw Error(ErrorCode::InvalidManifest, "missing header line '" + std::string(kHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw Error(ErrorCode::InvalidManifest, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw Error(ErrorCode::InvalidManifest, "line " + std::to_string(line_no) + ": empty field");
    }
    manifest.entries.push_back({fields[0], fields[1], fields[2], parse_split(fields[3])});
  }
  if (!header_seen) throw Error(ErrorCode::InvalidManifest, "empty manifest");
  validate_manifest(manifest);
  return manifest;
}

SongManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

std::string format_manifest(const SongManifest& manifest) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& e : manifest.entries) {
    out += e.song_id + ',' + e.clique_id + ',' + e.chroma_path.generic_string() + ',' + to_string(e.split) + '\n';
  }
  return out;
}

void validate_manifest(const SongManifest& manifest) {
  std::set<std::string> ids;
  std::map<std::string, Split> clique_split;
  std::map<std::string, int> clique_size;
  for (const auto& e : manifest.entries) {
    if (!ids.insert(e.song_id).second) throw Error(ErrorCode::InvalidManifest, "duplicate song id " + e.song_id);
    const auto [it, fresh] = clique_split.emplace(e.clique_id, e.split);
    if (!fresh && it->second != e.split) {
      throw Error(ErrorCode::InvalidManifest, "clique " + e.clique_id + " spans splits " + to_string(it->second) +
                                                  " and " + to_string(e.split));
    }
    ++clique_size[e.clique_id];
  }
  for (const auto& [clique, split] : clique_split) {
    if ((split == Split::Train || split == Split::Validation) && clique_size[clique] < 2) {
      throw Error(ErrorCode::InvalidManifest, "clique " + clique + " in " + to_string(split) + " has one member");
    }
  }
}

}  // namespace coverid::pipeline
