#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>

#include "coverid/audio.hpp"

namespace coverid {

inline constexpr int kPitchClasses = 12;

template <typename Scalar>
using ChromaMatrix = Eigen::Matrix<Scalar, kPitchClasses, Eigen::Dynamic>;
template <typename Scalar>
using PitchVector = Eigen::Matrix<Scalar, kPitchClasses, 1>;

// One column per second, rows in pitch-class order C, C#, ..., B. Columns are
// unit-norm or exactly zero.
struct ChromaSequence {
  ChromaMatrix<float> frames;
  std::string song_id;

  Eigen::Index length() const { return frames.cols(); }
};

// Global pitch-class distribution of a song; unit norm unless all-zero.
struct PitchProfile {
  PitchVector<float> energies = PitchVector<float>::Zero();
};

struct ChromaOptions {
  int window = 4096;
  int hop = 2048;
  // Zero-padded transform length; a multiple of `window`.
  int fft_size = 16384;
  double min_hz = 55.0;
  double max_hz = 1760.0;
};

// Nearest equal-tempered pitch class (A4 = 440 Hz, C = 0).
int pitch_class_of_frequency(double hz);

ChromaSequence compute_chroma(const AudioClip& clip, std::string song_id = {},
                              const ChromaOptions& options = {});

PitchProfile global_profile(const ChromaSequence& chroma);

// Scales each column to unit Euclidean norm; zero columns stay zero.
template <typename Derived>
void normalize_columns(Eigen::MatrixBase<Derived>& frames) {
  for (Eigen::Index c = 0; c < frames.cols(); ++c) {
    const auto norm = frames.col(c).norm();
    if (norm > 0) frames.col(c) /= norm;
  }
}

// CHRM: "CHRM", u32 version (1), u32 frame count, then frame-major float32.
Bytes encode_chroma(const ChromaSequence& chroma);
ChromaSequence decode_chroma(std::span<const std::uint8_t> bytes, std::string song_id = {});
void write_chroma(const std::filesystem::path& path, const ChromaSequence& chroma);
// The song id defaults to the file stem.
ChromaSequence read_chroma(const std::filesystem::path& path);

std::string chroma_to_csv(const ChromaSequence& chroma);

}  // namespace coverid
