#include "coverid/pipeline/matrix_provider.hpp"

#include <cstdio>

namespace coverid::pipeline {

PairMatrixProvider::PairMatrixProvider(std::optional<std::filesystem::path> cache_dir)
    : cache_dir_(std::move(cache_dir)) {
  if (cache_dir_) std::filesystem::create_directories(*cache_dir_);
}

std::unique_ptr<PairMatrixProvider> PairMatrixProvider::from_manifest(const SongManifest& manifest,
                                                                      std::optional<std::filesystem::path> cache_dir) {
  auto provider = std::make_unique<PairMatrixProvider>(std::move(cache_dir));
  for (const auto& e : manifest.entries) provider->add_file(e.song_id, manifest.resolve(e));
  return provider;
}

void PairMatrixProvider::add_file(const std::string& song_id, std::filesystem::path chroma_path) {
  std::lock_guard lock(mutex_);
  files_[song_id] = std::move(chroma_path);
  loaded_.erase(song_id);
}

void PairMatrixProvider::add_chroma(ChromaSequence chroma) {
  std::lock_guard lock(mutex_);
  const std::string id = chroma.song_id;
  files_.erase(id);
  loaded_[id] = std::make_shared<const ChromaSequence>(std::move(chroma));
}

std::shared_ptr<const ChromaSequence> PairMatrixProvider::chroma(const std::string& song_id) {
  std::filesystem::path path;
  {
    std::lock_guard lock(mutex_);
    if (auto it = loaded_.find(song_id); it != loaded_.end()) return it->second;
    auto file = files_.find(song_id);
    if (file == files_.end()) throw Error(ErrorCode::MissingMatrix, "no chroma registered for song " + song_id);
    path = file->second;
  }
  ChromaSequence seq;
  try {
    seq = read_chroma(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::MissingMatrix, "cannot load chroma for " + song_id + ": " + e.what());
  }
  seq.song_id = song_id;
  std::lock_guard lock(mutex_);
  auto [it, fresh] = loaded_.emplace(song_id, std::make_shared<const ChromaSequence>(std::move(seq)));
  return it->second;
}

std::filesystem::path PairMatrixProvider::cache_path(const std::string& query_id,
                                                     const std::string& candidate_id) const {
  if (!cache_dir_) return {};
  std::string key(kPipelineVersion);
  key += '\0' + query_id + '\0' + candidate_id;
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.xsim", static_cast<unsigned long long>(fnv1a64(key)));
  return *cache_dir_ / name;
}

std::size_t PairMatrixProvider::cache_hits() const {
  std::lock_guard lock(mutex_);
  return cache_hits_;
}

CrossSimilarityMatrix PairMatrixProvider::matrix(const std::string& query_id, const std::string& candidate_id) {
  const std::filesystem::path cached = cache_path(query_id, candidate_id);
  if (!cached.empty() && std::filesystem::exists(cached)) {
    try {
      CrossSimilarityMatrix s = read_xsim(cached);
      if (s.query_id == query_id && s.candidate_id == candidate_id && s.standardized) {
        std::lock_guard lock(mutex_);
        ++cache_hits_;
        return s;
      }
    } catch (const Error&) {
      // unreadable cache entries are rebuilt below
    }
  }
  CrossSimilarityMatrix s = build_pair_matrix(*chroma(query_id), *chroma(candidate_id));
  if (!cached.empty()) {
    auto tmp = cached;
    tmp += ".tmp";
    write_xsim(tmp, s);
    std::filesystem::rename(tmp, cached);
  }
  return s;
}

}  // namespace coverid::pipeline
