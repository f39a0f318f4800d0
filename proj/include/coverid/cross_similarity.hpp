#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>

#include "coverid/chroma.hpp"

namespace coverid {

// Songs are compared over their first 180 one-second frames.
inline constexpr Eigen::Index kMatrixFrames = 180;

using SimilarityGrid = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Moves the energy at class c to class (c + k) mod 12.
template <typename Derived>
PitchVector<typename Derived::Scalar> rotate_up(const Eigen::MatrixBase<Derived>& v, int k) {
  PitchVector<typename Derived::Scalar> out;
  for (int c = 0; c < kPitchClasses; ++c) out[(c + k) % kPitchClasses] = v[c];
  return out;
}

// Optimal transposition index: the k maximising <a, rotate_up(b, k)>, smallest
// k on ties. Rotating the candidate up by the result aligns it with the query.
int compute_oti(const PitchProfile& query, const PitchProfile& candidate);

// Rotates every frame up by k classes; k must lie in [0, 11].
ChromaSequence transpose_chroma(const ChromaSequence& chroma, int k);

// Euclidean distance between every column of `a` (rows) and of `b` (columns).
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> pairwise_distances(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.cols(), b.cols());
  for (Eigen::Index m = 0; m < b.cols(); ++m) {
    for (Eigen::Index l = 0; l < a.cols(); ++l) out(l, m) = (a.col(l) - b.col(m)).norm();
  }
  return out;
}

// S = (max(D) - D) / max(D); a zero maximum means identical inputs and maps to
// an all-ones grid.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> similarity_from_distances(
    const Eigen::MatrixBase<Derived>& delta) {
  using Scalar = typename Derived::Scalar;
  using Result = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (delta.size() == 0) return Result(delta.rows(), delta.cols());
  const Scalar peak = delta.maxCoeff();
  if (!(peak > Scalar(0))) return Result::Ones(delta.rows(), delta.cols());
  return ((Scalar(peak) - delta.array()) / peak).matrix();
}

struct DistanceMatrix {
  Eigen::MatrixXd values;
  std::string row_song;
  std::string col_song;
};

// Rows index the query song, columns the candidate.
struct CrossSimilarityMatrix {
  SimilarityGrid values;
  std::string query_id;
  std::string candidate_id;
  bool standardized = false;
};

DistanceMatrix distance_matrix(const ChromaSequence& a, const ChromaSequence& b);
CrossSimilarityMatrix similarity_from_distance(const DistanceMatrix& delta);

// Truncates to, or zero-pads at the end up to, `target` frames.
ChromaSequence fix_length(const ChromaSequence& chroma, Eigen::Index target = kMatrixFrames);

// Per-matrix zero-mean, unit population variance. Grids with std < 1e-12
// become all zeros.
CrossSimilarityMatrix standardize(CrossSimilarityMatrix s);

// Corpus-global alternative to the per-matrix statistics above.
struct StandardizationStats {
  double mean = 0.0;
  double stddev = 1.0;
};
StandardizationStats corpus_statistics(std::span<const CrossSimilarityMatrix> matrices);
CrossSimilarityMatrix standardize_with(CrossSimilarityMatrix s, const StandardizationStats& stats);

// Profile -> OTI -> rotate candidate -> 180-frame policy -> D -> S, without the
// final standardization.
CrossSimilarityMatrix build_raw_pair_matrix(const ChromaSequence& query,
                                            const ChromaSequence& candidate);
// The network input: build_raw_pair_matrix followed by standardize.
CrossSimilarityMatrix build_pair_matrix(const ChromaSequence& query, const ChromaSequence& candidate);

// XSIM: "XSIM", u32 version (1), u8 standardized flag, two length-prefixed
// UTF-8 ids, then 180x180 float32 row-major.
Bytes encode_xsim(const CrossSimilarityMatrix& s);
CrossSimilarityMatrix decode_xsim(std::span<const std::uint8_t> bytes);
void write_xsim(const std::filesystem::path& path, const CrossSimilarityMatrix& s);
CrossSimilarityMatrix read_xsim(const std::filesystem::path& path);

}  // namespace coverid
