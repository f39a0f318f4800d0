#include "coverid/nn/model_io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <map>

namespace coverid::nn {

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kMaxRank = 8;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

std::vector<NamedTensor> spec_tensors(const ModelSpec& spec) {
  Tensor<float> input({3});
  input[0] = static_cast<float>(spec.input_channels);
  input[1] = static_cast<float>(spec.input_height);
  input[2] = static_cast<float>(spec.input_width);
  const auto rows = static_cast<Index>(spec.layers.size());
  Tensor<float> layers({rows, 6});
  for (Index i = 0; i < rows; ++i) {
    const LayerSpec& l = spec.layers[static_cast<std::size_t>(i)];
    const float row[6] = {static_cast<float>(l.kind),     static_cast<float>(l.filters),
                          static_cast<float>(l.kernel_h), static_cast<float>(l.kernel_w),
                          static_cast<float>(l.units),    static_cast<float>(l.rate)};
    for (Index j = 0; j < 6; ++j) layers[i * 6 + j] = row[j];
  }
  return {{"spec.input", std::move(input)}, {"spec.layers", std::move(layers)}};
}

// Rates are stored at float precision; the shortest decimal that reproduces
// the float recovers rates like 0.3 exactly.
double widen_rate(float stored) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, stored).ptr;
  double rate = 0.0;
  std::from_chars(buf, end, rate);
  return rate;
}

ModelSpec spec_from_tensors(const Tensor<float>& input, const Tensor<float>& layers) {
  if (input.shape() != Shape{3} || layers.rank() != 2 || layers.dim(1) != 6) {
    throw Error(ErrorCode::MalformedModelFile, "malformed architecture tensors");
  }
  const auto as_int = [](float v) {
    if (!(v >= 0.0f && v < 1e7f) || v != std::floor(v)) {
      throw Error(ErrorCode::MalformedModelFile, "architecture field is not a small integer");
    }
    return static_cast<int>(v);
  };
  ModelSpec spec;
  spec.input_channels = as_int(input[0]);
  spec.input_height = as_int(input[1]);
  spec.input_width = as_int(input[2]);
  for (Index i = 0; i < layers.dim(0); ++i) {
    const int kind = as_int(layers[i * 6]);
    if (kind > static_cast<int>(LayerKind::Softmax)) throw Error(ErrorCode::MalformedModelFile, "unknown layer kind");
    LayerSpec l;
    l.kind = static_cast<LayerKind>(kind);
    l.filters = as_int(layers[i * 6 + 1]);
    l.kernel_h = as_int(layers[i * 6 + 2]);
    l.kernel_w = as_int(layers[i * 6 + 3]);
    l.units = as_int(layers[i * 6 + 4]);
    l.rate = widen_rate(layers[i * 6 + 5]);
    spec.layers.push_back(l);
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedModelFile, std::string("stored architecture is invalid: ") + e.what());
  }
  return spec;
}

}  // namespace

Bytes encode_model(const ModelSpec& spec, const ModelParams<float>& params) {
  std::vector<NamedTensor> tensors = spec_tensors(spec);
  params.visit_all([&](const std::string& name, const Tensor<float>& t) { tensors.push_back({name, t}); });

  ByteWriter out;
  out.magic("CNNW");
  out.u32(kModelVersion);
  out.u64(spec.hash());
  out.u32(static_cast<std::uint32_t>(tensors.size()));
  std::uint32_t checksum = 2166136261u;
  for (const auto& [name, t] : tensors) {
    out.string(name);
    out.u32(static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
    const auto payload = std::span(reinterpret_cast<const std::uint8_t*>(t.data().data()),
                                   static_cast<std::size_t>(t.size()) * sizeof(float));
    out.bytes(payload);
    checksum = fnv1a32(payload, checksum);
  }
  out.u32(checksum);
  return out.take();
}

LoadedModel decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, ErrorCode::MalformedModelFile);
  if (!in.expect_magic("CNNW")) in.fail("bad CNNW magic");
  const std::uint32_t version = in.u32();
  if (version != kModelVersion) in.fail("unsupported CNNW version " + std::to_string(version));
  const std::uint64_t stored_hash = in.u64();
  const std::uint32_t count = in.u32();

  std::map<std::string, Tensor<float>> tensors;
  std::vector<std::string> order;
  std::uint32_t checksum = 2166136261u;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.string(256);
    const std::uint32_t rank = in.u32();
    if (rank > kMaxRank) in.fail("tensor rank too large");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<Index>(in.u32()));
    const Index elements = element_count(shape);
    if (static_cast<std::uint64_t>(elements) * 4 > in.remaining()) in.fail("tensor payload exceeds file");
    const auto payload = in.bytes(static_cast<std::size_t>(elements) * 4);
    checksum = fnv1a32(payload, checksum);
    Vector<float> data(elements);
    std::memcpy(data.data(), payload.data(), payload.size());
    if (tensors.contains(name)) in.fail("duplicate tensor " + name);
    order.push_back(name);
    tensors.emplace(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  if (in.u32() != checksum) in.fail("payload checksum mismatch");
  if (in.remaining() != 0) in.fail("trailing bytes after checksum");

  if (!tensors.contains("spec.input") || !tensors.contains("spec.layers")) {
    throw Error(ErrorCode::MalformedModelFile, "missing architecture tensors");
  }
  LoadedModel model;
  model.spec = spec_from_tensors(tensors.at("spec.input"), tensors.at("spec.layers"));
  if (model.spec.hash() != stored_hash) {
    throw Error(ErrorCode::MalformedModelFile, "header hash does not match stored architecture");
  }
  model.params = make_params<float>(model.spec);
  std::size_t used = 2;
  model.params.visit_all([&](const std::string& name, Tensor<float>& t) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorCode::MalformedModelFile, "missing tensor " + name);
    if (it->second.shape() != t.shape()) {
      throw Error(ErrorCode::MalformedModelFile, "tensor " + name + " has shape " + to_string(it->second.shape()));
    }
    t = it->second;
    ++used;
  });
  if (used != tensors.size()) throw Error(ErrorCode::MalformedModelFile, "unexpected extra tensors");
  return model;
}

void save_model(const std::filesystem::path& path, const ModelSpec& spec, const ModelParams<float>& params) {
  write_file(path, encode_model(spec, params));
}

LoadedModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

LoadedModel load_model(const std::filesystem::path& path, const ModelSpec& expected) {
  LoadedModel model = load_model(path);
  if (model.spec.hash() != expected.hash()) {
    throw Error(ErrorCode::SpecMismatch, "model file " + path.string() + " was written for a different architecture");
  }
  return model;
}

}  // namespace coverid::nn
