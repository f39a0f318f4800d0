#pragma once

#include <filesystem>
#include <span>

#include "coverid/binary_io.hpp"
#include "coverid/nn/params.hpp"

namespace coverid::nn {

struct LoadedModel {
  ModelSpec spec;
  ModelParams<float> params;
};

// CNNW layout: "CNNW", u32 version (1), u64 spec hash, u32 tensor count, then
// per tensor a length-prefixed name, u32 rank, u32 dims and float32 payload,
// closed by the FNV-1a 32 checksum of all payload bytes. The architecture is
// itself stored as the tensors "spec.input" and "spec.layers" so a file is
// self-describing.
Bytes encode_model(const ModelSpec& spec, const ModelParams<float>& params);
LoadedModel decode_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const ModelSpec& spec, const ModelParams<float>& params);
LoadedModel load_model(const std::filesystem::path& path);
// Throws SpecMismatch when the file was written for another architecture.
LoadedModel load_model(const std::filesystem::path& path, const ModelSpec& expected);

}  // namespace coverid::nn
