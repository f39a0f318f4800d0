#pragma once

#include <string>
#include <vector>

#include "coverid/pipeline/manifest.hpp"
#include "coverid/random.hpp"

namespace coverid::pipeline {

inline constexpr int kNonCover = 0;
inline constexpr int kCover = 1;

struct PairRecord {
  std::string song_a;
  std::string song_b;
  int label = kNonCover;

  bool operator==(const PairRecord&) const = default;
};

struct PairDataset {
  std::vector<PairRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t cover_count() const;
  std::size_t non_cover_count() const { return size() - cover_count(); }
};

// Every unordered intra-clique pair of the split is a cover record; the same
// number of inter-clique pairs is drawn uniformly without replacement. Pairs
// are oriented in manifest order. Throws InsufficientCliques when the split
// has fewer than two cliques or too few inter-clique pairs.
PairDataset build_pairs(const SongManifest& manifest, Split split, Rng& rng);

// `song_a,song_b,label` with label cover / non-cover.
std::string format_pairs(const PairDataset& pairs);

}  // namespace coverid::pipeline
