#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "coverid/cross_similarity.hpp"
#include "coverid/pipeline/manifest.hpp"

namespace coverid::pipeline {

// Anything that can produce the network input for a (query, candidate) pair.
// Implementations must be safe to call from several threads.
class MatrixSource {
 public:
  virtual ~MatrixSource() = default;
  virtual CrossSimilarityMatrix matrix(const std::string& query_id, const std::string& candidate_id) = 0;
};

// Identifies the matrix construction; part of every cache key.
inline constexpr std::string_view kPipelineVersion = "xsim-pipeline-v1";

// Builds standardized pair matrices from CHRM files (or registered in-memory
// sequences), optionally persisting them as XSIM files under `cache_dir`.
// Cached matrices are bit-identical to recomputation.
class PairMatrixProvider : public MatrixSource {
 public:
  explicit PairMatrixProvider(std::optional<std::filesystem::path> cache_dir = std::nullopt);
  static std::unique_ptr<PairMatrixProvider> from_manifest(const SongManifest& manifest,
                                                           std::optional<std::filesystem::path> cache_dir = std::nullopt);

  void add_file(const std::string& song_id, std::filesystem::path chroma_path);
  void add_chroma(ChromaSequence chroma);

  CrossSimilarityMatrix matrix(const std::string& query_id, const std::string& candidate_id) override;

  std::filesystem::path cache_path(const std::string& query_id, const std::string& candidate_id) const;
  std::size_t cache_hits() const;

 private:
  std::shared_ptr<const ChromaSequence> chroma(const std::string& song_id);

  std::optional<std::filesystem::path> cache_dir_;
  std::map<std::string, std::filesystem::path> files_;
  std::map<std::string, std::shared_ptr<const ChromaSequence>> loaded_;
  mutable std::mutex mutex_;
  std::size_t cache_hits_ = 0;
};

}  // namespace coverid::pipeline
