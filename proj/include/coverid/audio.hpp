#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>

#include "coverid/binary_io.hpp"

namespace coverid {

inline constexpr int kReferenceSampleRate = 44100;

// Mono PCM audio, samples in [-1, 1].
struct AudioClip {
  Eigen::VectorXf samples;
  int sample_rate = kReferenceSampleRate;

  Eigen::Index size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// RIFF/WAVE with PCM16 or IEEE float32 payload, one or two channels. Stereo is
// downmixed by averaging the channels; 16-bit values are scaled by 1/32768.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip load_audio_wav(const std::filesystem::path& path);

Bytes encode_wav_pcm16(const AudioClip& clip);
Bytes encode_wav_float32(const AudioClip& clip);

// Linear-interpolation resampling to 44.1 kHz. Output length is
// floor(n * 44100 / rate); positions past the last input sample hold it.
AudioClip resample_to_reference(const AudioClip& clip);

}  // namespace coverid
