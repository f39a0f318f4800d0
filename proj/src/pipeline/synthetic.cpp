#include "coverid/pipeline/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "coverid/binary_io.hpp"
#include "coverid/cross_similarity.hpp"

namespace coverid::pipeline {

SyntheticConfig synthetic_config_from(const KeyValues& values) {
  SyntheticConfig c;
  ConfigReader r(values);
  r.read("cliques", c.cliques);
  r.read("versions_per_clique", c.versions_per_clique);
  r.read("dummies", c.dummies);
  r.read("min_duration", c.min_duration);
  r.read("max_duration", c.max_duration);
  r.read("min_warp", c.min_warp);
  r.read("max_warp", c.max_warp);
  r.read("min_transpose", c.min_transpose);
  r.read("max_transpose", c.max_transpose);
  r.read("noise", c.noise);
  r.read("min_segment", c.min_segment);
  r.read("max_segment", c.max_segment);
  r.read("seed", c.seed);
  r.read("train_cliques", c.train_cliques);
  r.read("validation_cliques", c.validation_cliques);
  r.finish();
  validate(c);
  return c;
}

KeyValues to_key_values(const SyntheticConfig& c) {
  return {{"cliques", std::to_string(c.cliques)},
          {"versions_per_clique", std::to_string(c.versions_per_clique)},
          {"dummies", std::to_string(c.dummies)},
          {"min_duration", std::to_string(c.min_duration)},
          {"max_duration", std::to_string(c.max_duration)},
          {"min_warp", format_number(c.min_warp)},
          {"max_warp", format_number(c.max_warp)},
          {"min_transpose", std::to_string(c.min_transpose)},
          {"max_transpose", std::to_string(c.max_transpose)},
          {"noise", format_number(c.noise)},
          {"min_segment", std::to_string(c.min_segment)},
          {"max_segment", std::to_string(c.max_segment)},
          {"seed", std::to_string(c.seed)},
          {"train_cliques", std::to_string(c.train_cliques)},
          {"validation_cliques", std::to_string(c.validation_cliques)}};
}

void validate(const SyntheticConfig& c) {
  const auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (c.cliques < 1) bad("cliques must be >= 1");
  if (c.versions_per_clique < 2) bad("versions_per_clique must be >= 2 (no cover pairs otherwise)");
  if (c.dummies < 0) bad("dummies must be >= 0");
  if (c.min_duration < 1 || c.max_duration < c.min_duration) bad("duration range must be non-empty and >= 1 s");
  if (!(c.min_warp > 0.0) || c.max_warp < c.min_warp) bad("warp range must be non-empty and positive");
  if (c.min_transpose < 0 || c.max_transpose > 11 || c.max_transpose < c.min_transpose) {
    bad("transpose range must be a non-empty subrange of 0..11");
  }
  if (!(c.noise >= 0.0) || !std::isfinite(c.noise)) bad("noise must be >= 0");
  if (c.min_segment < 1 || c.max_segment < c.min_segment) bad("segment range must be non-empty and >= 1 s");
  if (c.train_cliques < 0 || c.validation_cliques < 0 || c.train_cliques + c.validation_cliques > c.cliques) {
    bad("train_cliques + validation_cliques exceeds cliques");
  }
  // A warped version must keep at least one frame.
  if (static_cast<int>(std::floor(c.min_duration / c.max_warp)) < 1) bad("warp leaves an empty version");
}

ChromaSequence random_base_song(const SyntheticConfig& config, Rng& rng, std::string song_id) {
  std::uniform_int_distribution<int> duration(config.min_duration, config.max_duration);
  std::uniform_int_distribution<int> segment(config.min_segment, config.max_segment);
  std::uniform_int_distribution<int> voices(1, 3);
  std::uniform_int_distribution<int> pitch(0, 11);
  std::uniform_real_distribution<double> amplitude(0.2, 1.0);

  const int length = duration(rng);
  ChromaSequence song;
  song.song_id = std::move(song_id);
  song.frames = ChromaMatrix<float>::Zero(12, length);
  for (int start = 0; start < length;) {
    const int len = std::min(segment(rng), length - start);
    PitchVector<double> frame = PitchVector<double>::Zero();
    const int n = voices(rng);
    for (int v = 0; v < n; ++v) frame[pitch(rng)] += amplitude(rng);
    frame.normalize();
    song.frames.middleCols(start, len).colwise() = frame.cast<float>();
    start += len;
  }
  return song;
}

ChromaSequence derive_version(const ChromaSequence& base, const VersionTransform& t, Rng& rng, std::string song_id) {
  if (!(t.warp > 0.0)) throw Error(ErrorCode::InvalidArgument, "warp must be positive");
  const auto length = static_cast<Eigen::Index>(std::floor(static_cast<double>(base.length()) / t.warp));
  if (length < 1) throw Error(ErrorCode::InvalidArgument, "warp leaves an empty version");

  ChromaSequence out;
  out.song_id = std::move(song_id);
  out.frames.resize(12, length);
  for (Eigen::Index j = 0; j < length; ++j) {
    const auto src = std::min(base.length() - 1, static_cast<Eigen::Index>(std::floor(static_cast<double>(j) * t.warp)));
    out.frames.col(j) = base.frames.col(src);
  }
  out = transpose_chroma(out, t.transpose);

  if (t.noise > 0.0) {
    // Per-component sigma chosen so the 12-vector noise has RMS norm `noise`.
    std::normal_distribution<double> gauss(0.0, t.noise / std::sqrt(12.0));
    for (Eigen::Index j = 0; j < length; ++j) {
      PitchVector<double> frame = out.frames.col(j).cast<double>();
      for (int c = 0; c < 12; ++c) frame[c] = std::max(0.0, frame[c] + gauss(rng));
      const double norm = frame.norm();
      if (norm > 0.0) frame /= norm;
      out.frames.col(j) = frame.cast<float>();
    }
  }
  return out;
}

namespace {

std::string numbered(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
  return buf;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config) {
  validate(config);
  Rng rng = make_stream(config.seed, streams::kSynthetic);
  std::uniform_real_distribution<double> warp(config.min_warp, config.max_warp);
  std::uniform_int_distribution<int> transpose(config.min_transpose, config.max_transpose);

  SyntheticCorpus corpus;
  for (int c = 0; c < config.cliques; ++c) {
    const std::string clique = numbered("c", c, 3);
    const Split split = c < config.train_cliques                                 ? Split::Train
                        : c < config.train_cliques + config.validation_cliques ? Split::Validation
                                                                                 : Split::TestQuery;
    corpus.bases.push_back(random_base_song(config, rng, clique + "_base"));
    for (int v = 0; v < config.versions_per_clique; ++v) {
      VersionTransform t;
      t.warp = warp(rng);
      t.transpose = transpose(rng);
      t.noise = config.noise;
      SyntheticSong song;
      song.chroma = derive_version(corpus.bases.back(), t, rng, clique + numbered("_v", v, 2));
      song.clique_id = clique;
      song.split = split;
      song.transform = t;
      corpus.songs.push_back(std::move(song));
    }
  }
  for (int d = 0; d < config.dummies; ++d) {
    const std::string id = numbered("d", d, 3);
    SyntheticSong song;
    song.chroma = random_base_song(config, rng, id);
    song.clique_id = id;
    song.split = Split::TestDummy;
    corpus.songs.push_back(std::move(song));
  }
  return corpus;
}

SongManifest write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "chroma");
  SongManifest manifest;
  manifest.base_dir = out_dir;
  for (const auto& song : corpus.songs) {
    const std::filesystem::path rel = std::filesystem::path("chroma") / (song.chroma.song_id + ".chrm");
    write_chroma(out_dir / rel, song.chroma);
    manifest.entries.push_back({song.chroma.song_id, song.clique_id, rel, song.split});
  }
  validate_manifest(manifest);
  write_text_file(out_dir / "manifest.csv", format_manifest(manifest));
  return manifest;
}

}  // namespace coverid::pipeline
