#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coverid/error.hpp"

namespace coverid {

using Bytes = std::vector<std::uint8_t>;

// Little-endian encoder for the on-disk formats (CHRM, XSIM, CNNW).
class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> data);
  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void string(std::string_view s);  // u32 length prefix + UTF-8 bytes

  const Bytes& buffer() const { return buffer_; }
  Bytes take() { return std::move(buffer_); }

 private:
  Bytes buffer_;
};

// Bounds-checked decoder; overruns throw Error with the configured code.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, ErrorCode on_error)
      : data_(data), on_error_(on_error) {}

  bool expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string string(std::size_t max_length = 1u << 20);
  std::span<const std::uint8_t> bytes(std::size_t count);

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void require(std::size_t count) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  ErrorCode on_error_;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::uint32_t fnv1a32(std::span<const std::uint8_t> data, std::uint32_t state = 2166136261u);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t state = 14695981039346656037ull);

}  // namespace coverid
