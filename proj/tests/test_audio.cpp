#include <cstring>
#include <filesystem>

#include "coverid/audio.hpp"
#include "coverid/binary_io.hpp"
#include "doctest.h"

using namespace coverid;

namespace {

// RIFF/WAVE bytes assembled field by field, independent of the encoders.
Bytes wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                const Bytes& data) {
  Bytes out;
  const auto put = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  };
  const auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  const auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  put("RIFF", 4);
  u32(static_cast<std::uint32_t>(36 + data.size()));
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  put("data", 4);
  u32(static_cast<std::uint32_t>(data.size()));
  put(data.data(), data.size());
  return out;
}

Bytes pcm16(std::initializer_list<std::int16_t> values) {
  Bytes out;
  for (std::int16_t v : values) {
    const auto u = static_cast<std::uint16_t>(v);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

}  // namespace

TEST_SUITE("audio") {
  TEST_CASE("one second of 16-bit stereo silence decodes to 44100 zeros") {
    const Bytes silence(44100 * 2 * 2, 0);
    const AudioClip clip = decode_wav(wav_bytes(1, 2, 44100, 16, silence));
    CHECK(clip.sample_rate == 44100);
    CHECK(clip.size() == 44100);
    CHECK(clip.samples.cwiseAbs().maxCoeff() == 0.0f);
    CHECK(clip.duration_seconds() == doctest::Approx(1.0));
  }

  TEST_CASE("16-bit samples scale by 1/32768") {
    const AudioClip clip = decode_wav(wav_bytes(1, 1, 8000, 16, pcm16({32767, -32768, 16384})));
    REQUIRE(clip.size() == 3);
    CHECK(clip.samples[0] == 32767.0f / 32768.0f);
    CHECK(clip.samples[1] == -1.0f);
    CHECK(clip.samples[2] == 0.5f);
  }

  TEST_CASE("stereo is downmixed by channel mean") {
    const AudioClip clip = decode_wav(wav_bytes(1, 2, 44100, 16, pcm16({16384, 0, -16384, -16384})));
    REQUIRE(clip.size() == 2);
    CHECK(clip.samples[0] == 0.25f);
    CHECK(clip.samples[1] == -0.5f);
  }

  TEST_CASE("float32 payload") {
    Bytes data(8);
    const float v[2] = {0.25f, -0.75f};
    std::memcpy(data.data(), v, 8);
    const AudioClip clip = decode_wav(wav_bytes(3, 1, 22050, 32, data));
    CHECK(clip.sample_rate == 22050);
    CHECK(clip.samples[0] == 0.25f);
    CHECK(clip.samples[1] == -0.75f);
  }

  TEST_CASE("encoders round-trip through the decoder") {
    AudioClip clip;
    clip.sample_rate = 44100;
    clip.samples = Eigen::VectorXf::LinSpaced(100, -0.5f, 0.5f);
    const AudioClip f = decode_wav(encode_wav_float32(clip));
    CHECK(f.samples == clip.samples);
    const AudioClip i = decode_wav(encode_wav_pcm16(clip));
    CHECK((i.samples - clip.samples).cwiseAbs().maxCoeff() < 1.0f / 32768.0f);
  }

  TEST_CASE("error paths") {
    const Bytes good = wav_bytes(1, 1, 44100, 16, pcm16({1, 2, 3}));
    const Bytes truncated(good.begin(), good.begin() + 20);
    CHECK_THROWS_WITH_AS(decode_wav(truncated), doctest::Contains("MalformedContainer"), Error);
    Bytes not_riff = good;
    not_riff[0] = 'X';
    CHECK_THROWS_AS(decode_wav(not_riff), Error);
    try {
      decode_wav(wav_bytes(0x55, 1, 44100, 16, pcm16({1, 2})));
      FAIL("expected UnsupportedEncoding");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnsupportedEncoding);
    }
    try {
      decode_wav(wav_bytes(1, 1, 44100, 16, {}));
      FAIL("expected EmptyAudio");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyAudio);
    }
  }

  TEST_CASE("load_audio_wav reads from disk") {
    const auto path = std::filesystem::temp_directory_path() / "coverid_test_audio.wav";
    write_file(path, wav_bytes(1, 1, 44100, 16, pcm16({100, 200})));
    CHECK(load_audio_wav(path).size() == 2);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_audio_wav(path), Error);
  }

  TEST_CASE("resampling") {
    AudioClip same;
    same.sample_rate = 44100;
    same.samples = Eigen::VectorXf::Random(1000);
    CHECK(resample_to_reference(same).samples == same.samples);

    AudioClip constant;
    constant.sample_rate = 22050;
    constant.samples = Eigen::VectorXf::Constant(2205, 0.5f);
    const AudioClip up = resample_to_reference(constant);
    CHECK(up.sample_rate == 44100);
    CHECK(up.size() == 4410);
    CHECK((up.samples.array() - 0.5f).abs().maxCoeff() < 1e-7f);

    AudioClip ramp;
    ramp.sample_rate = 22050;
    ramp.samples = Eigen::VectorXf(2);
    ramp.samples << 0.0f, 1.0f;
    const AudioClip r = resample_to_reference(ramp);
    REQUIRE(r.size() == 4);
    CHECK(r.samples[0] == 0.0f);
    CHECK(r.samples[1] == 0.5f);
    CHECK(r.samples[2] == 1.0f);
  }
}
