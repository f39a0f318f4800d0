#include "coverid/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <optional>

namespace coverid {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  std::uint16_t block_align = 0;
};

std::uint16_t read_u16(ByteReader& in) {
  const std::uint8_t lo = in.u8();
  const std::uint8_t hi = in.u8();
  return static_cast<std::uint16_t>(lo | (hi << 8));
}

FormatChunk parse_format(std::span<const std::uint8_t> body) {
  ByteReader in(body, ErrorCode::MalformedContainer);
  FormatChunk fmt;
  fmt.format = read_u16(in);
  fmt.channels = read_u16(in);
  fmt.sample_rate = in.u32();
  in.u32();  // byte rate
  fmt.block_align = read_u16(in);
  fmt.bits_per_sample = read_u16(in);
  if (fmt.format == kFormatExtensible) {
    if (in.remaining() < 2 + 2 + 4 + 16) in.fail("truncated WAVE_FORMAT_EXTENSIBLE block");
    read_u16(in);  // cbSize
    read_u16(in);  // valid bits
    in.u32();      // channel mask
    fmt.format = read_u16(in);  // leading two bytes of the sub-format GUID
  }
  return fmt;
}

void write_header(ByteWriter& out, std::uint16_t format, std::uint16_t bits, int rate,
                  std::size_t frames) {
  const std::uint32_t block_align = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(frames * block_align);
  auto u16 = [&](std::uint16_t v) {
    out.u8(static_cast<std::uint8_t>(v & 0xFF));
    out.u8(static_cast<std::uint8_t>(v >> 8));
  };
  out.magic("RIFF");
  out.u32(36 + data_size);
  out.magic("WAVE");
  out.magic("fmt ");
  out.u32(16);
  u16(format);
  u16(1);
  out.u32(static_cast<std::uint32_t>(rate));
  out.u32(static_cast<std::uint32_t>(rate) * block_align);
  u16(static_cast<std::uint16_t>(block_align));
  u16(bits);
  out.magic("data");
  out.u32(data_size);
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, ErrorCode::MalformedContainer);
  if (!in.expect_magic("RIFF")) in.fail("missing RIFF tag");
  in.u32();  // riff size; trust chunk sizes instead
  if (!in.expect_magic("WAVE")) in.fail("missing WAVE tag");

  std::optional<FormatChunk> fmt;
  std::optional<std::span<const std::uint8_t>> data;
  while (in.remaining() >= 8 && !(fmt && data)) {
    auto id = in.bytes(4);
    const std::uint32_t size = in.u32();
    const std::string tag(id.begin(), id.end());
    if (tag == "data" && size > in.remaining()) in.fail("data chunk exceeds file size");
    auto body = in.bytes(size);
    if (size % 2 == 1 && in.remaining() > 0) in.u8();  // RIFF pad byte
    if (tag == "fmt ") {
      fmt = parse_format(body);
    } else if (tag == "data") {
      data = body;
    }
  }
  if (!fmt) in.fail("missing fmt chunk");
  if (!data) in.fail("missing data chunk");

  const bool pcm16 = fmt->format == kFormatPcm && fmt->bits_per_sample == 16;
  const bool float32 = fmt->format == kFormatFloat && fmt->bits_per_sample == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorCode::UnsupportedEncoding,
                "format tag " + std::to_string(fmt->format) + " with " +
                    std::to_string(fmt->bits_per_sample) + " bits per sample");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw Error(ErrorCode::UnsupportedEncoding,
                std::to_string(fmt->channels) + " channels (expected 1 or 2)");
  }
  if (fmt->sample_rate == 0) throw Error(ErrorCode::MalformedContainer, "zero sample rate");

  const std::size_t sample_bytes = fmt->bits_per_sample / 8;
  const std::size_t frame_bytes = sample_bytes * fmt->channels;
  const std::size_t frames = data->size() / frame_bytes;
  if (frames == 0) throw Error(ErrorCode::EmptyAudio, "no sample frames in data chunk");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(static_cast<Eigen::Index>(frames));
  const std::uint8_t* p = data->data();
  for (std::size_t f = 0; f < frames; ++f) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < fmt->channels; ++c) {
      const std::uint8_t* s = p + f * frame_bytes + c * sample_bytes;
      float v;
      if (pcm16) {
        const auto raw = static_cast<std::int16_t>(s[0] | (s[1] << 8));
        v = static_cast<float>(raw) / 32768.0f;
      } else {
        std::uint32_t bits;
        std::memcpy(&bits, s, 4);
        v = std::bit_cast<float>(bits);
        if (!std::isfinite(v)) throw Error(ErrorCode::MalformedContainer, "non-finite sample");
      }
      acc += v;
    }
    clip.samples[static_cast<Eigen::Index>(f)] = acc / static_cast<float>(fmt->channels);
  }
  return clip;
}

AudioClip load_audio_wav(const std::filesystem::path& path) {
  return decode_wav(read_file(path));
}

Bytes encode_wav_pcm16(const AudioClip& clip) {
  ByteWriter out;
  write_header(out, kFormatPcm, 16, clip.sample_rate, static_cast<std::size_t>(clip.size()));
  for (float s : clip.samples) {
    const float scaled = std::clamp(s, -1.0f, 1.0f) * 32768.0f;
    const auto v = static_cast<std::int16_t>(std::clamp(std::lround(scaled), -32768L, 32767L));
    out.u8(static_cast<std::uint8_t>(v & 0xFF));
    out.u8(static_cast<std::uint8_t>((static_cast<std::uint16_t>(v) >> 8) & 0xFF));
  }
  return out.take();
}

Bytes encode_wav_float32(const AudioClip& clip) {
  ByteWriter out;
  write_header(out, kFormatFloat, 32, clip.sample_rate, static_cast<std::size_t>(clip.size()));
  for (float s : clip.samples) out.f32(s);
  return out.take();
}

AudioClip resample_to_reference(const AudioClip& clip) {
  if (clip.size() == 0) throw Error(ErrorCode::EmptyAudio, "cannot resample an empty clip");
  if (clip.sample_rate <= 0) throw Error(ErrorCode::InvalidArgument, "non-positive sample rate");
  if (clip.sample_rate == kReferenceSampleRate) return clip;

  const auto n_in = static_cast<std::int64_t>(clip.size());
  const std::int64_t n_out = n_in * kReferenceSampleRate / clip.sample_rate;
  AudioClip out;
  out.sample_rate = kReferenceSampleRate;
  out.samples.resize(n_out);
  const double step = static_cast<double>(clip.sample_rate) / kReferenceSampleRate;
  for (std::int64_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto left = static_cast<std::int64_t>(pos);
    if (left >= n_in - 1) {
      out.samples[i] = clip.samples[n_in - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(left);
    out.samples[i] = static_cast<float>((1.0 - frac) * clip.samples[left] +
                                        frac * clip.samples[left + 1]);
  }
  return out;
}

}  // namespace coverid
