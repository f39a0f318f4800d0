#pragma once

#include <cstdint>
#include <vector>

#include "coverid/nn/layers.hpp"
#include "coverid/nn/params.hpp"

namespace coverid::nn {

// Everything a train-mode forward pass leaves behind for backward. Layer
// outputs are retained only where a later backward step reads them.
template <typename Scalar>
struct ForwardCache {
  Mode mode = Mode::Infer;
  std::uint64_t spec_hash = 0;
  Tensor<Scalar> input;
  std::vector<Tensor<Scalar>> outputs;
  std::vector<Shape> output_shapes;  // observed, including the batch axis
  std::vector<std::vector<std::int32_t>> argmax;
  std::vector<BatchNormCache<Scalar>> batch_norm;
  std::vector<Tensor<Scalar>> masks;
  Tensor<Scalar> logits;

  Index batch_size() const { return input.empty() ? 0 : input.dim(0); }
};

template <typename Scalar>
class Network {
 public:
  explicit Network(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Shape>& layer_shapes() const { return shapes_; }

  // batch is [N, C, H, W]; returns class probabilities [N, classes]. Train mode
  // uses batch statistics and needs `rng` for dropout. Samples are spread over
  // `jobs` threads; results do not depend on `jobs`.
  Tensor<Scalar> forward(const ModelParams<Scalar>& params, const Tensor<Scalar>& batch, Mode mode,
                         Rng* rng = nullptr, ForwardCache<Scalar>* cache = nullptr, int jobs = 1) const;

  // Gradients of every trainable tensor given dLoss/dlogits. Throws StaleCache
  // unless `cache` came from a train-mode forward of this architecture with a
  // matching batch.
  ModelParams<Scalar> backward(const ModelParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                               const Tensor<Scalar>& grad_logits, int jobs = 1) const;

  // Folds the cached batch statistics into the running averages.
  void update_running_stats(ModelParams<Scalar>& params, const ForwardCache<Scalar>& cache) const;

 private:
  bool keep_output(std::size_t layer) const;

  ModelSpec spec_;
  std::vector<Shape> shapes_;
  std::uint64_t hash_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace coverid::nn
