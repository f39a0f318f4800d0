#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "coverid/nn/params.hpp"

namespace coverid::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam update of one parameter block at step t (1-based).
template <typename DerivedP, typename DerivedG, typename DerivedM, typename DerivedV>
void adam_update(Eigen::MatrixBase<DerivedP>& param, const Eigen::MatrixBase<DerivedG>& grad,
                 Eigen::MatrixBase<DerivedM>& m, Eigen::MatrixBase<DerivedV>& v, std::int64_t t,
                 const AdamConfig& cfg) {
  using Scalar = typename DerivedP::Scalar;
  const auto b1 = Scalar(cfg.beta1);
  const auto b2 = Scalar(cfg.beta2);
  m = b1 * m + (Scalar(1) - b1) * grad;
  v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
  const auto c1 = Scalar(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const auto c2 = Scalar(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  param.array() -= Scalar(cfg.learning_rate) * (m.array() / c1) / ((v.array() / c2).sqrt() + Scalar(cfg.epsilon));
}

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Vector<Scalar>> first_moment;
  std::vector<Vector<Scalar>> second_moment;
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(const ModelParams<Scalar>& params, AdamConfig config = {}) {
  AdamState<Scalar> state{config, 0, {}, {}};
  params.visit_trainable([&](const std::string&, const Tensor<Scalar>& t) {
    state.first_moment.push_back(Vector<Scalar>::Zero(t.size()));
    state.second_moment.push_back(Vector<Scalar>::Zero(t.size()));
  });
  return state;
}

template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, AdamState<Scalar>& state) {
  std::vector<const Tensor<Scalar>*> g;
  grads.visit_trainable([&](const std::string&, const Tensor<Scalar>& t) { g.push_back(&t); });
  std::vector<Tensor<Scalar>*> p;
  params.visit_trainable([&](const std::string&, Tensor<Scalar>& t) { p.push_back(&t); });
  if (p.size() != g.size() || p.size() != state.first_moment.size()) {
    throw Error(ErrorCode::ShapeMismatch, "Adam: parameter, gradient and moment sets differ");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->shape() != g[i]->shape() || state.first_moment[i].size() != p[i]->size()) {
      throw Error(ErrorCode::ShapeMismatch, "Adam: shape mismatch in tensor " + std::to_string(i));
    }
  }
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i) {
    adam_update(p[i]->data(), g[i]->data(), state.first_moment[i], state.second_moment[i], state.step, state.config);
  }
}

}  // namespace coverid::nn
