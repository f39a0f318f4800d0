#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "coverid/chroma.hpp"
#include "coverid/pipeline/key_value_config.hpp"
#include "coverid/pipeline/manifest.hpp"
#include "coverid/random.hpp"

namespace coverid::pipeline {

struct SyntheticConfig {
  int cliques = 10;
  int versions_per_clique = 5;
  int dummies = 50;
  int min_duration = 180;  // seconds, i.e. frames
  int max_duration = 180;
  double min_warp = 0.8;
  double max_warp = 1.25;
  int min_transpose = 0;
  int max_transpose = 11;
  // RMS norm of the additive frame noise, relative to a unit frame.
  double noise = 0.05;
  int min_segment = 2;
  int max_segment = 10;
  std::uint64_t seed = 1;
  // Leading cliques go to train, the next ones to validation, the rest are
  // test queries; dummies are always test-dummy.
  int train_cliques = 5;
  int validation_cliques = 2;
};

SyntheticConfig synthetic_config_from(const KeyValues& values);
KeyValues to_key_values(const SyntheticConfig& config);
// Throws InvalidConfig.
void validate(const SyntheticConfig& config);

struct VersionTransform {
  int transpose = 0;
  double warp = 1.0;  // > 1 plays faster (fewer frames)
  double noise = 0.0;
};

// Piecewise-constant chroma: segments of random length, each sounding 1-3
// pitch classes at random amplitudes.
ChromaSequence random_base_song(const SyntheticConfig& config, Rng& rng, std::string song_id);

// Version frame j is base frame floor(j * warp), then rotated up by
// `transpose` and perturbed by clipped Gaussian noise before renormalizing.
ChromaSequence derive_version(const ChromaSequence& base, const VersionTransform& transform, Rng& rng,
                              std::string song_id);

struct SyntheticSong {
  ChromaSequence chroma;
  std::string clique_id;
  Split split = Split::Train;
  VersionTransform transform;  // identity for dummies
};

struct SyntheticCorpus {
  std::vector<ChromaSequence> bases;  // one per clique
  std::vector<SyntheticSong> songs;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config);

// Writes chroma/<song_id>.chrm plus manifest.csv under `out_dir` and returns
// the manifest (paths relative to `out_dir`).
SongManifest write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir);

}  // namespace coverid::pipeline
