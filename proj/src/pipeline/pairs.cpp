#include "coverid/pipeline/pairs.hpp"

#include <algorithm>
#include <set>

namespace coverid::pipeline {

std::size_t PairDataset::cover_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const PairRecord& r) { return r.label == kCover; }));
}

PairDataset build_pairs(const SongManifest& manifest, Split split, Rng& rng) {
  const auto songs = manifest.in_split(split);
  std::set<std::string> cliques;
  for (const auto* s : songs) cliques.insert(s->clique_id);
  if (cliques.size() < 2) {
    throw Error(ErrorCode::InsufficientCliques, std::string("split ") + to_string(split) + " has " +
                                                    std::to_string(cliques.size()) + " clique(s), need 2");
  }

  PairDataset out;
  std::vector<PairRecord> inter;
  for (std::size_t i = 0; i < songs.size(); ++i) {
    for (std::size_t j = i + 1; j < songs.size(); ++j) {
      PairRecord r{songs[i]->song_id, songs[j]->song_id, kNonCover};
      if (songs[i]->clique_id == songs[j]->clique_id) {
        r.label = kCover;
        out.records.push_back(std::move(r));
      } else {
        inter.push_back(std::move(r));
      }
    }
  }
  const std::size_t wanted = out.records.size();
  if (inter.size() < wanted) {
    throw Error(ErrorCode::InsufficientCliques, "not enough inter-clique pairs to balance " +
                                                    std::to_string(wanted) + " cover pairs");
  }
  // Partial Fisher-Yates: the first `wanted` slots become a uniform sample.
  for (std::size_t i = 0; i < wanted; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, inter.size() - 1);
    std::swap(inter[i], inter[pick(rng)]);
    out.records.push_back(inter[i]);
  }
  return out;
}

std::string format_pairs(const PairDataset& pairs) {
  std::string out = "song_a,song_b,label\n";
  for (const auto& r : pairs.records) {
    out += r.song_a + ',' + r.song_b + ',' + (r.label == kCover ? "cover" : "non-cover") + '\n';
  }
  return out;
}

}  // namespace coverid::pipeline
