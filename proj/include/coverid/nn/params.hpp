#pragma once

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "coverid/nn/model_spec.hpp"
#include "coverid/random.hpp"

namespace coverid::nn {

// Parameters of one layer; only the members its kind uses are non-empty.
template <typename Scalar>
struct LayerParams {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;
};

template <typename Scalar>
struct ModelParams {
  std::vector<LayerParams<Scalar>> layers;

  // fn(name, tensor) over weights, biases, gamma and beta in layer order.
  template <typename Fn>
  void visit_trainable(Fn&& fn) { visit(*this, fn, false); }
  template <typename Fn>
  void visit_trainable(Fn&& fn) const { visit(*this, fn, false); }
  // Also visits the batch-norm running statistics.
  template <typename Fn>
  void visit_all(Fn&& fn) { visit(*this, fn, true); }
  template <typename Fn>
  void visit_all(Fn&& fn) const { visit(*this, fn, true); }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.layers.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& s = layers[i];
      auto& d = out.layers[i];
      d.weight = s.weight.template cast<Other>();
      d.bias = s.bias.template cast<Other>();
      d.gamma = s.gamma.template cast<Other>();
      d.beta = s.beta.template cast<Other>();
      d.running_mean = s.running_mean.template cast<Other>();
      d.running_var = s.running_var.template cast<Other>();
    }
    return out;
  }

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn& fn, bool include_stats) {
    char prefix[32];
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      std::snprintf(prefix, sizeof prefix, "layer%02zu.", i);
      auto& l = self.layers[i];
      const auto emit = [&](const char* name, auto& t) {
        if (!t.empty()) fn(std::string(prefix) + name, t);
      };
      emit("weight", l.weight);
      emit("bias", l.bias);
      emit("gamma", l.gamma);
      emit("beta", l.beta);
      if (include_stats) {
        emit("running_mean", l.running_mean);
        emit("running_var", l.running_var);
      }
    }
  }
};

// Parameters with every tensor allocated: weights and biases zero, gamma one,
// beta zero, running mean zero, running variance one.
template <typename Scalar>
ModelParams<Scalar> make_params(const ModelSpec& spec) {
  const std::vector<Shape> shapes = spec.output_shapes();
  ModelParams<Scalar> params;
  params.layers.resize(spec.layers.size());
  Shape in = spec.input_shape();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    auto& p = params.layers[i];
    if (l.kind == LayerKind::Conv) {
      p.weight = Tensor<Scalar>({l.filters, in[0], l.kernel_h, l.kernel_w});
      p.bias = Tensor<Scalar>(Shape{l.filters});
    } else if (l.kind == LayerKind::Dense) {
      p.weight = Tensor<Scalar>({l.units, in[0]});
      p.bias = Tensor<Scalar>(Shape{l.units});
    } else if (l.kind == LayerKind::BatchNorm) {
      const Index c = in[0];
      p.gamma = Tensor<Scalar>(Shape{c});
      p.gamma.data().setOnes();
      p.beta = Tensor<Scalar>(Shape{c});
      p.running_mean = Tensor<Scalar>(Shape{c});
      p.running_var = Tensor<Scalar>(Shape{c});
      p.running_var.data().setOnes();
    }
    in = shapes[i];
  }
  return params;
}

// Same layout as make_params with every tensor zero; used for gradients.
template <typename Scalar>
ModelParams<Scalar> zeros_like(const ModelParams<Scalar>& params) {
  ModelParams<Scalar> out = params;
  out.visit_all([](const std::string&, Tensor<Scalar>& t) { t.set_zero(); });
  return out;
}

// He initialisation: N(0, 2 / fan_in) for conv and dense weights. Draws are
// made in double so float and double instantiations share values.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelSpec& spec, Rng& rng) {
  ModelParams<Scalar> params = make_params<Scalar>(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto& w = params.layers[i].weight;
    if (w.empty()) continue;
    const Index fan_in = w.size() / w.dim(0);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (Index k = 0; k < w.size(); ++k) w[k] = static_cast<Scalar>(normal(rng));
  }
  return params;
}

template <typename Scalar>
std::int64_t trainable_count(const ModelParams<Scalar>& params) {
  std::int64_t total = 0;
  params.visit_trainable([&](const std::string&, const Tensor<Scalar>& t) { total += t.size(); });
  return total;
}

}  // namespace coverid::nn
