#include "coverid/chroma.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <vector>

namespace coverid {

namespace {

constexpr std::uint32_t kChromaVersion = 1;

}  // namespace

int pitch_class_of_frequency(double hz) {
  const double midi = 69.0 + 12.0 * std::log2(hz / 440.0);
  const auto pitch = static_cast<long>(std::lround(midi));
  return static_cast<int>(((pitch % 12) + 12) % 12);
}

ChromaSequence compute_chroma(const AudioClip& clip, std::string song_id,
                              const ChromaOptions& options) {
  if (clip.sample_rate != kReferenceSampleRate) {
    throw Error(ErrorCode::InvalidArgument, "chroma expects 44100 Hz audio, got " +
                                                std::to_string(clip.sample_rate));
  }
  if (options.window <= 0 || options.hop <= 0 || options.fft_size < options.window) {
    throw Error(ErrorCode::InvalidArgument, "bad chroma window configuration");
  }
  const Eigen::Index frames = clip.size() / kReferenceSampleRate;
  if (frames < 1) {
    throw Error(ErrorCode::TooShort, "need at least one second of audio, got " +
                                         std::to_string(clip.duration_seconds()) + " s");
  }

  const int window = options.window;
  const int nfft = options.fft_size;
  std::vector<float> hann(static_cast<std::size_t>(window));
  for (int i = 0; i < window; ++i) {
    hann[static_cast<std::size_t>(i)] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(window)));
  }

  const int bins = nfft / 2 + 1;
  std::vector<int> bin_class(static_cast<std::size_t>(bins), -1);
  for (int k = 1; k < bins; ++k) {
    const double hz = static_cast<double>(k) * kReferenceSampleRate / nfft;
    if (hz >= options.min_hz && hz <= options.max_hz) {
      bin_class[static_cast<std::size_t>(k)] = pitch_class_of_frequency(hz);
    }
  }

  Eigen::FFT<float> fft;
  fft.SetFlag(Eigen::FFT<float>::HalfSpectrum);
  std::vector<float> buffer(static_cast<std::size_t>(nfft), 0.0f);
  std::vector<std::complex<float>> spectrum;

  ChromaMatrix<double> acc = ChromaMatrix<double>::Zero(kPitchClasses, frames);
  for (Eigen::Index start = 0; start + window <= clip.size(); start += options.hop) {
    const Eigen::Index slot = (start + window / 2) / kReferenceSampleRate;
    if (slot >= frames) break;
    for (int i = 0; i < window; ++i) {
      buffer[static_cast<std::size_t>(i)] = clip.samples[start + i] * hann[static_cast<std::size_t>(i)];
    }
    fft.fwd(spectrum, buffer);
    for (int k = 1; k < bins; ++k) {
      const int pc = bin_class[static_cast<std::size_t>(k)];
      if (pc >= 0) acc(pc, slot) += std::abs(spectrum[static_cast<std::size_t>(k)]);
    }
  }

  normalize_columns(acc);
  ChromaSequence out;
  out.frames = acc.cast<float>();
  out.song_id = std::move(song_id);
  return out;
}

PitchProfile global_profile(const ChromaSequence& chroma) {
  PitchProfile profile;
  if (chroma.length() == 0) return profile;
  PitchVector<double> mean = chroma.frames.cast<double>().rowwise().mean();
  const double norm = mean.norm();
  if (norm > 0) mean /= norm;
  profile.energies = mean.cast<float>();
  return profile;
}

Bytes encode_chroma(const ChromaSequence& chroma) {
  ByteWriter out;
  out.magic("CHRM");
  out.u32(kChromaVersion);
  out.u32(static_cast<std::uint32_t>(chroma.length()));
  // Column-major storage makes frame-major order contiguous.
  for (Eigen::Index i = 0; i < chroma.frames.size(); ++i) out.f32(chroma.frames.data()[i]);
  return out.take();
}

ChromaSequence decode_chroma(std::span<const std::uint8_t> bytes, std::string song_id) {
  ByteReader in(bytes, ErrorCode::MalformedFile);
  if (!in.expect_magic("CHRM")) in.fail("bad CHRM magic");
  const std::uint32_t version = in.u32();
  if (version != kChromaVersion) in.fail("unsupported CHRM version " + std::to_string(version));
  const std::uint32_t frames = in.u32();
  if (static_cast<std::uint64_t>(frames) * kPitchClasses * 4 != in.remaining()) {
    in.fail("payload size does not match frame count " + std::to_string(frames));
  }
  ChromaSequence out;
  out.song_id = std::move(song_id);
  out.frames.resize(kPitchClasses, frames);
  for (Eigen::Index i = 0; i < out.frames.size(); ++i) {
    const float v = in.f32();
    if (!std::isfinite(v) || v < 0.0f) in.fail("chroma values must be finite and non-negative");
    out.frames.data()[i] = v;
  }
  return out;
}

void write_chroma(const std::filesystem::path& path, const ChromaSequence& chroma) {
  write_file(path, encode_chroma(chroma));
}

ChromaSequence read_chroma(const std::filesystem::path& path) {
  return decode_chroma(read_file(path), path.stem().string());
}

std::string chroma_to_csv(const ChromaSequence& chroma) {
  std::string out;
  char cell[32];
  for (Eigen::Index f = 0; f < chroma.length(); ++f) {
    for (int c = 0; c < kPitchClasses; ++c) {
      std::snprintf(cell, sizeof cell, "%.9g", static_cast<double>(chroma.frames(c, f)));
      if (c > 0) out += ',';
      out += cell;
    }
    out += '\n';
  }
  return out;
}

}  // namespace coverid
