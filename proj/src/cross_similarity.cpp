#include "coverid/cross_similarity.hpp"

#include <cmath>

namespace coverid {

namespace {

constexpr std::uint32_t kXsimVersion = 1;

}  // namespace

int compute_oti(const PitchProfile& query, const PitchProfile& candidate) {
  // Scored in double with a fixed summation order so ties are exact.
  const auto score = [&](int k) {
    double s = 0.0;
    for (int j = 0; j < kPitchClasses; ++j) {
      s += double(query.energies[j]) * double(candidate.energies[(j - k + kPitchClasses) % kPitchClasses]);
    }
    return s;
  };
  int best = 0;
  double best_score = score(0);
  for (int k = 1; k < kPitchClasses; ++k) {
    const double s = score(k);
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

ChromaSequence transpose_chroma(const ChromaSequence& chroma, int k) {
  if (k < 0 || k >= kPitchClasses) {
    throw Error(ErrorCode::InvalidArgument,
                "transposition " + std::to_string(k) + " outside [0, 11]");
  }
  ChromaSequence out;
  out.song_id = chroma.song_id;
  out.frames.resize(kPitchClasses, chroma.length());
  for (int c = 0; c < kPitchClasses; ++c) {
    out.frames.row((c + k) % kPitchClasses) = chroma.frames.row(c);
  }
  return out;
}

DistanceMatrix distance_matrix(const ChromaSequence& a, const ChromaSequence& b) {
  if (a.length() < 1 || b.length() < 1) {
    throw Error(ErrorCode::InvalidArgument, "distance matrix needs non-empty sequences");
  }
  return {pairwise_distances(a.frames.cast<double>(), b.frames.cast<double>()), a.song_id,
          b.song_id};
}

CrossSimilarityMatrix similarity_from_distance(const DistanceMatrix& delta) {
  if (!delta.values.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "distance matrix has non-finite entries");
  }
  CrossSimilarityMatrix s;
  s.values = similarity_from_distances(delta.values).cast<float>();
  s.query_id = delta.row_song;
  s.candidate_id = delta.col_song;
  return s;
}

ChromaSequence fix_length(const ChromaSequence& chroma, Eigen::Index target) {
  if (chroma.length() < 1) throw Error(ErrorCode::InvalidArgument, "empty chroma sequence");
  ChromaSequence out;
  out.song_id = chroma.song_id;
  out.frames = ChromaMatrix<float>::Zero(kPitchClasses, target);
  const Eigen::Index kept = std::min(target, chroma.length());
  out.frames.leftCols(kept) = chroma.frames.leftCols(kept);
  return out;
}

CrossSimilarityMatrix standardize(CrossSimilarityMatrix s) {
  const auto values = s.values.cast<double>().array();
  const double mean = values.mean();
  const double stddev = std::sqrt((values - mean).square().mean());
  return standardize_with(std::move(s), {mean, stddev});
}

StandardizationStats corpus_statistics(std::span<const CrossSimilarityMatrix> matrices) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& m : matrices) {
    sum += m.values.cast<double>().sum();
    count += static_cast<double>(m.values.size());
  }
  if (count == 0.0) return {};
  const double mean = sum / count;
  double squares = 0.0;
  for (const auto& m : matrices) {
    squares += (m.values.cast<double>().array() - mean).square().sum();
  }
  return {mean, std::sqrt(squares / count)};
}

CrossSimilarityMatrix standardize_with(CrossSimilarityMatrix s, const StandardizationStats& stats) {
  if (stats.stddev < 1e-12) {
    s.values.setZero();
  } else {
    s.values = ((s.values.cast<double>().array() - stats.mean) / stats.stddev).cast<float>();
  }
  s.standardized = true;
  return s;
}

CrossSimilarityMatrix build_raw_pair_matrix(const ChromaSequence& query,
                                            const ChromaSequence& candidate) {
  if (query.length() < 1 || candidate.length() < 1) {
    throw Error(ErrorCode::InvalidArgument, "pair matrix needs non-empty sequences");
  }
  // Key alignment uses the full songs; only then is the 180-frame policy applied.
  const int k = compute_oti(global_profile(query), global_profile(candidate));
  const ChromaSequence aligned = transpose_chroma(candidate, k);
  return similarity_from_distance(distance_matrix(fix_length(query), fix_length(aligned)));
}

CrossSimilarityMatrix build_pair_matrix(const ChromaSequence& query,
                                        const ChromaSequence& candidate) {
  return standardize(build_raw_pair_matrix(query, candidate));
}

Bytes encode_xsim(const CrossSimilarityMatrix& s) {
  if (s.values.rows() != kMatrixFrames || s.values.cols() != kMatrixFrames) {
    throw Error(ErrorCode::ShapeMismatch, "XSIM stores 180x180 grids only");
  }
  ByteWriter out;
  out.magic("XSIM");
  out.u32(kXsimVersion);
  out.u8(s.standardized ? 1 : 0);
  out.string(s.query_id);
  out.string(s.candidate_id);
  for (Eigen::Index i = 0; i < s.values.size(); ++i) out.f32(s.values.data()[i]);
  return out.take();
}

CrossSimilarityMatrix decode_xsim(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, ErrorCode::MalformedFile);
  if (!in.expect_magic("XSIM")) in.fail("bad XSIM magic");
  const std::uint32_t version = in.u32();
  if (version != kXsimVersion) in.fail("unsupported XSIM version " + std::to_string(version));
  CrossSimilarityMatrix s;
  const std::uint8_t flag = in.u8();
  if (flag > 1) in.fail("bad standardized flag");
  s.standardized = flag == 1;
  s.query_id = in.string(4096);
  s.candidate_id = in.string(4096);
  if (in.remaining() != kMatrixFrames * kMatrixFrames * 4) in.fail("bad XSIM payload size");
  s.values.resize(kMatrixFrames, kMatrixFrames);
  for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = in.f32();
  return s;
}

void write_xsim(const std::filesystem::path& path, const CrossSimilarityMatrix& s) {
  write_file(path, encode_xsim(s));
}

CrossSimilarityMatrix read_xsim(const std::filesystem::path& path) {
  return decode_xsim(read_file(path));
}

}  // namespace coverid
