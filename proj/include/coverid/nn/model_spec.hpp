#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coverid/nn/tensor.hpp"

namespace coverid::nn {

enum class LayerKind : int {
  Conv = 0,
  ReLU = 1,
  MaxPool = 2,
  BatchNorm = 3,
  Dropout = 4,
  Flatten = 5,
  Dense = 6,
  Softmax = 7,
};

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int filters = 0;   // Conv
  int kernel_h = 0;  // Conv
  int kernel_w = 0;  // Conv
  int units = 0;     // Dense
  double rate = 0;   // Dropout

  static LayerSpec conv(int filters, int kernel_h, int kernel_w) {
    return {LayerKind::Conv, filters, kernel_h, kernel_w, 0, 0.0};
  }
  static LayerSpec relu() { return {LayerKind::ReLU}; }
  static LayerSpec maxpool() { return {LayerKind::MaxPool}; }
  static LayerSpec batch_norm() { return {LayerKind::BatchNorm}; }
  static LayerSpec dropout(double rate) { return {LayerKind::Dropout, 0, 0, 0, 0, rate}; }
  static LayerSpec flatten() { return {LayerKind::Flatten}; }
  static LayerSpec dense(int units) { return {LayerKind::Dense, 0, 0, 0, units, 0.0}; }
  static LayerSpec softmax() { return {LayerKind::Softmax}; }

  bool operator==(const LayerSpec&) const = default;
};

// Sequential architecture over a [channels, height, width] input. The last
// layer is always Softmax.
struct ModelSpec {
  Index input_channels = 1;
  Index input_height = 180;
  Index input_width = 180;
  std::vector<LayerSpec> layers;

  // Five conv blocks (5x5 stem, then 3x3 blocks narrowing to 16 channels),
  // each closed by 2x2 pooling and batch norm, then the dropout/dense head.
  static ModelSpec standard(double dropout_p = 0.5, double dropout_q = 0.5);

  // One 5x5 block on an 18x18 input with a small head; used where a full-size
  // network is too slow (finite-difference checks).
  static ModelSpec reduced(Index input_size = 18, int filters = 4, int hidden = 8,
                           double dropout_p = 0.5, double dropout_q = 0.5);

  Shape input_shape() const { return {input_channels, input_height, input_width}; }

  // Per-sample output shape of every layer; throws ShapeMismatch if the
  // layers do not compose.
  std::vector<Shape> output_shapes() const;
  void validate() const { output_shapes(); }

  Index num_classes() const;
  int conv_layer_count() const;

  // Rates of the first and second Dropout layers (0 when absent).
  double dropout_p() const;
  double dropout_q() const;
  void set_dropout(double p, double q);

  // Architecture fingerprint. Dropout rates are excluded: they do not change
  // the parameter set or inference.
  std::uint64_t hash() const;
  std::string describe() const;

  bool operator==(const ModelSpec&) const = default;
};

// Trainable element count: conv and dense weights and biases, batch-norm scale
// and shift.
std::int64_t count_params(const ModelSpec& spec);

}  // namespace coverid::nn
