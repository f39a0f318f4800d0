#include "coverid/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace coverid {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void ByteWriter::bytes(std::span<const std::uint8_t> data) {
  buffer_.insert(buffer_.end(), data.begin(), data.end());
}

void ByteWriter::magic(std::string_view tag) {
  buffer_.insert(buffer_.end(), tag.begin(), tag.end());
}

void ByteWriter::u8(std::uint8_t v) { buffer_.push_back(v); }

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buffer_.insert(buffer_.end(), s.begin(), s.end());
}

void ByteReader::fail(const std::string& what) const {
  throw Error(on_error_, what + " at byte " + std::to_string(pos_));
}

void ByteReader::require(std::size_t count) const {
  if (count > remaining()) fail("unexpected end of data");
}

bool ByteReader::expect_magic(std::string_view tag) {
  if (remaining() < tag.size()) return false;
  const bool ok = std::memcmp(data_.data() + pos_, tag.data(), tag.size()) == 0;
  if (ok) pos_ += tag.size();
  return ok;
}

std::uint8_t ByteReader::u8() {
  require(1);
  return data_[pos_++];
}

std::uint32_t ByteReader::u32() {
  require(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  require(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::string(std::size_t max_length) {
  const std::uint32_t length = u32();
  if (length > max_length) fail("string length " + std::to_string(length) + " too large");
  auto raw = bytes(length);
  return std::string(raw.begin(), raw.end());
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t count) {
  require(count);
  auto out = data_.subspan(pos_, count);
  pos_ += count;
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint32_t fnv1a32(std::span<const std::uint8_t> data, std::uint32_t state) {
  for (std::uint8_t b : data) {
    state ^= b;
    state *= 16777619u;
  }
  return state;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t state) {
  for (char c : text) {
    state ^= static_cast<std::uint8_t>(c);
    state *= 1099511628211ull;
  }
  return state;
}

}  // namespace coverid
