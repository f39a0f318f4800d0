#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "coverid/nn/tensor.hpp"
#include "coverid/parallel.hpp"
#include "coverid/random.hpp"

namespace coverid::nn {

enum class Mode { Train, Infer };

// ---------------------------------------------------------------------------
// "Same" convolution, stride 1, cross-correlation convention, via im2col.
// Column matrix rows are (channel, ky, kx), columns are output pixels.

struct ConvGeometry {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  Index filters = 0;
  Index kernel_h = 0;
  Index kernel_w = 0;

  Index pad_h() const { return (kernel_h - 1) / 2; }
  Index pad_w() const { return (kernel_w - 1) / 2; }
  Index patch() const { return channels * kernel_h * kernel_w; }
  Index pixels() const { return height * width; }
};

template <typename Scalar>
void im2col_same(const Scalar* image, const ConvGeometry& g, RowMatrix<Scalar>& cols) {
  cols.resize(g.patch(), g.pixels());
  const Index H = g.height, W = g.width;
  for (Index c = 0; c < g.channels; ++c) {
    const Scalar* plane = image + c * H * W;
    for (Index ky = 0; ky < g.kernel_h; ++ky) {
      for (Index kx = 0; kx < g.kernel_w; ++kx) {
        Scalar* row = cols.data() + ((c * g.kernel_h + ky) * g.kernel_w + kx) * g.pixels();
        const Index dx = kx - g.pad_w();
        const Index x_begin = std::max<Index>(0, -dx);
        const Index x_end = std::min<Index>(W, W - dx);
        for (Index y = 0; y < H; ++y) {
          Scalar* out = row + y * W;
          const Index iy = y + ky - g.pad_h();
          if (iy < 0 || iy >= H || x_begin >= x_end) {
            std::fill(out, out + W, Scalar(0));
            continue;
          }
          std::fill(out, out + x_begin, Scalar(0));
          std::memcpy(out + x_begin, plane + iy * W + x_begin + dx,
                      static_cast<std::size_t>(x_end - x_begin) * sizeof(Scalar));
          std::fill(out + x_end, out + W, Scalar(0));
        }
      }
    }
  }
}

// Adds each column entry back onto the image pixel it was gathered from.
template <typename Scalar>
void col2im_same_add(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Scalar* image) {
  const Index H = g.height, W = g.width;
  for (Index c = 0; c < g.channels; ++c) {
    Scalar* plane = image + c * H * W;
    for (Index ky = 0; ky < g.kernel_h; ++ky) {
      for (Index kx = 0; kx < g.kernel_w; ++kx) {
        const Scalar* row = cols.data() + ((c * g.kernel_h + ky) * g.kernel_w + kx) * g.pixels();
        const Index dx = kx - g.pad_w();
        const Index x_begin = std::max<Index>(0, -dx);
        const Index x_end = std::min<Index>(W, W - dx);
        for (Index y = 0; y < H; ++y) {
          const Index iy = y + ky - g.pad_h();
          if (iy < 0 || iy >= H) continue;
          Scalar* dst = plane + iy * W + dx;
          const Scalar* src = row + y * W;
          for (Index x = x_begin; x < x_end; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

template <typename Scalar>
struct ConvWorkspace {
  RowMatrix<Scalar> cols;
  RowMatrix<Scalar> grad_cols;
};

template <typename Scalar>
void conv_forward_sample(const Scalar* input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                         const ConvGeometry& g, ConvWorkspace<Scalar>& ws, Scalar* output) {
  im2col_same(input, g, ws.cols);
  Eigen::Map<const RowMatrix<Scalar>> w(weight.data().data(), g.filters, g.patch());
  Eigen::Map<RowMatrix<Scalar>> y(output, g.filters, g.pixels());
  y.noalias() = w * ws.cols;
  y.colwise() += bias.data();
}

// Accumulates weight/bias gradients into grad_w/grad_b and, when grad_input is
// non-null, writes the input gradient there.
template <typename Scalar>
void conv_backward_sample(const Scalar* input, const Tensor<Scalar>& weight, const Scalar* grad_output,
                          const ConvGeometry& g, ConvWorkspace<Scalar>& ws, Scalar* grad_input,
                          RowMatrix<Scalar>& grad_w, Vector<Scalar>& grad_b) {
  Eigen::Map<const RowMatrix<Scalar>> w(weight.data().data(), g.filters, g.patch());
  Eigen::Map<const RowMatrix<Scalar>> dy(grad_output, g.filters, g.pixels());
  im2col_same(input, g, ws.cols);
  grad_w.noalias() += dy * ws.cols.transpose();
  grad_b += dy.rowwise().sum();
  if (grad_input != nullptr) {
    ws.grad_cols.noalias() = w.transpose() * dy;
    std::fill(grad_input, grad_input + g.channels * g.pixels(), Scalar(0));
    col2im_same_add(ws.grad_cols, g, grad_input);
  }
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> as_batch(const Tensor<Scalar>& x, Index sample_rank) {
  if (x.rank() == sample_rank + 1) return x;
  if (x.rank() != sample_rank) {
    throw Error(ErrorCode::ShapeMismatch, "unexpected tensor rank for shape " + to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape.insert(shape.begin(), 1);
  return Tensor<Scalar>(shape, x.data());
}

template <typename Scalar>
Tensor<Scalar> restore_rank(Tensor<Scalar> y, Index rank) {
  if (y.rank() == rank) return y;
  Shape shape(y.shape().begin() + 1, y.shape().end());
  y.reshape(shape);
  return y;
}

}  // namespace detail

template <typename Scalar>
ConvGeometry conv_geometry(const Shape& batch_input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (batch_input.size() != 4 || weight.rank() != 4 || bias.rank() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "conv expects x[N,C,H,W], w[O,C,kh,kw], b[O]");
  }
  ConvGeometry g{batch_input[1], batch_input[2], batch_input[3], weight.dim(0), weight.dim(2), weight.dim(3)};
  if (weight.dim(1) != g.channels || bias.dim(0) != g.filters) {
    throw Error(ErrorCode::ShapeMismatch, "conv weight " + to_string(weight.shape()) + " / bias " +
                                              to_string(bias.shape()) + " incompatible with input " +
                                              to_string(batch_input));
  }
  if (g.kernel_h % 2 == 0 || g.kernel_w % 2 == 0) {
    throw Error(ErrorCode::ShapeMismatch, "same convolution needs odd kernel sizes");
  }
  return g;
}

// x is [C,H,W] or [N,C,H,W]; output keeps x's rank.
template <typename Scalar>
Tensor<Scalar> conv2d_same(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                           int jobs = 1) {
  const Tensor<Scalar> batch = detail::as_batch(x, 3);
  const ConvGeometry g = conv_geometry(batch.shape(), weight, bias);
  const Index n = batch.dim(0);
  Tensor<Scalar> y({n, g.filters, g.height, g.width});
  std::vector<ConvWorkspace<Scalar>> ws(static_cast<std::size_t>(clamp_jobs(jobs)));
  parallel_for(jobs, n, [&](int worker, Index i) {
    conv_forward_sample(batch.slice(i).data(), weight, bias, g, ws[static_cast<std::size_t>(worker)],
                        y.slice(i).data());
  });
  return detail::restore_rank(std::move(y), x.rank());
}

template <typename Scalar>
struct ConvGradients {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

template <typename Scalar>
ConvGradients<Scalar> conv2d_same_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                                           const Tensor<Scalar>& grad_output) {
  const Tensor<Scalar> batch = detail::as_batch(x, 3);
  const Tensor<Scalar> dy = detail::as_batch(grad_output, 3);
  const Tensor<Scalar> bias(Shape{weight.dim(0)});
  const ConvGeometry g = conv_geometry(batch.shape(), weight, bias);
  require_shape(dy, {batch.dim(0), g.filters, g.height, g.width}, "conv grad_output");
  ConvGradients<Scalar> grads{Tensor<Scalar>(batch.shape()), Tensor<Scalar>(weight.shape()),
                              Tensor<Scalar>(bias.shape())};
  RowMatrix<Scalar> gw = RowMatrix<Scalar>::Zero(g.filters, g.patch());
  Vector<Scalar> gb = Vector<Scalar>::Zero(g.filters);
  ConvWorkspace<Scalar> ws;
  for (Index i = 0; i < batch.dim(0); ++i) {
    conv_backward_sample(batch.slice(i).data(), weight, dy.slice(i).data(), g, ws,
                         grads.input.slice(i).data(), gw, gb);
  }
  grads.weight.data() = Eigen::Map<Vector<Scalar>>(gw.data(), gw.size());
  grads.bias.data() = gb;
  grads.input = detail::restore_rank(std::move(grads.input), x.rank());
  return grads;
}

// ---------------------------------------------------------------------------
// ReLU. The backward pass masks on the forward output; the subgradient at 0 is 0.

template <typename Scalar>
Tensor<Scalar> relu(Tensor<Scalar> x) {
  x.data() = x.data().cwiseMax(Scalar(0));
  return x;
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_output) {
  require_shape(grad_output, output.shape(), "relu grad_output");
  Tensor<Scalar> dx(output.shape());
  dx.data() = (output.data().array() > Scalar(0)).select(grad_output.data(), Scalar(0));
  return dx;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2, floor semantics. argmax holds, for each output
// element, the flat offset of the winning input within its sample.

template <typename Scalar>
struct MaxPoolResult {
  Tensor<Scalar> output;
  std::vector<std::int32_t> argmax;
};

template <typename Scalar>
void maxpool_sample(const Scalar* x, Index channels, Index height, Index width, Scalar* y, std::int32_t* argmax) {
  const Index oh = height / 2, ow = width / 2;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = x + c * height * width;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        Index best = (2 * oy) * width + 2 * ox;
        const Index candidates[3] = {best + 1, best + width, best + width + 1};
        for (Index idx : candidates) {
          if (plane[idx] > plane[best]) best = idx;
        }
        const Index o = (c * oh + oy) * ow + ox;
        y[o] = plane[best];
        argmax[o] = static_cast<std::int32_t>(c * height * width + best);
      }
    }
  }
}

template <typename Scalar>
MaxPoolResult<Scalar> maxpool2x2(const Tensor<Scalar>& x, int jobs = 1) {
  const Tensor<Scalar> batch = detail::as_batch(x, 3);
  const Index n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  if (h < 2 || w < 2) throw Error(ErrorCode::ShapeMismatch, "max pooling needs H, W >= 2");
  MaxPoolResult<Scalar> r{Tensor<Scalar>({n, c, h / 2, w / 2}), {}};
  const Index per_sample = c * (h / 2) * (w / 2);
  r.argmax.resize(static_cast<std::size_t>(n * per_sample));
  parallel_for(jobs, n, [&](int, Index i) {
    maxpool_sample(batch.slice(i).data(), c, h, w, r.output.slice(i).data(), r.argmax.data() + i * per_sample);
  });
  r.output = detail::restore_rank(std::move(r.output), x.rank());
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool2x2_backward(const Tensor<Scalar>& grad_output, const std::vector<std::int32_t>& argmax,
                                   const Shape& input_shape) {
  Tensor<Scalar> dx(input_shape);
  const Tensor<Scalar> dy = detail::as_batch(grad_output, 3);
  const Index n = dy.dim(0);
  const Index per_out = dy.slice_size();
  if (static_cast<Index>(argmax.size()) != n * per_out) {
    throw Error(ErrorCode::ShapeMismatch, "argmax does not match grad_output");
  }
  const Index per_in = dx.size() / n;
  for (Index i = 0; i < n; ++i) {
    Scalar* d = dx.data().data() + i * per_in;
    const Scalar* g = dy.slice(i).data();
    const std::int32_t* a = argmax.data() + i * per_out;
    for (Index o = 0; o < per_out; ++o) d[a[o]] += g[o];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Batch normalization over the batch and spatial axes of [N,C,H,W] (or [N,C]).

inline constexpr double kBatchNormEpsilon = 1e-3;
inline constexpr double kBatchNormMomentum = 0.99;

template <typename Scalar>
struct BatchNormCache {
  Tensor<Scalar> normalized;  // x-hat
  Vector<Scalar> inv_std;
  Vector<double> batch_mean;
  Vector<double> batch_var;
};

namespace detail {

inline void bn_dims(const Shape& s, Index& n, Index& c, Index& spatial) {
  if (s.size() < 2) throw Error(ErrorCode::ShapeMismatch, "batch norm expects [N,C,...]");
  n = s[0];
  c = s[1];
  spatial = 1;
  for (std::size_t i = 2; i < s.size(); ++i) spatial *= s[i];
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> batch_norm_train(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                                BatchNormCache<Scalar>& cache, double epsilon = kBatchNormEpsilon, int jobs = 1) {
  Index n, c, spatial;
  detail::bn_dims(x.shape(), n, c, spatial);
  require_shape(gamma, {c}, "batch norm gamma");
  require_shape(beta, {c}, "batch norm beta");
  if (n * spatial < 2) {
    throw Error(ErrorCode::DegenerateBatch, "batch norm needs at least 2 values per channel");
  }
  const double count = static_cast<double>(n * spatial);

  // Per-sample partial sums, reduced in sample order.
  Eigen::MatrixXd partial(c, n);
  parallel_for(jobs, n, [&](int, Index i) {
    Eigen::Map<const RowMatrix<Scalar>> s(x.slice(i).data(), c, spatial);
    partial.col(i) = s.template cast<double>().rowwise().sum();
  });
  cache.batch_mean = Vector<double>::Zero(c);
  for (Index i = 0; i < n; ++i) cache.batch_mean += partial.col(i);
  cache.batch_mean /= count;

  parallel_for(jobs, n, [&](int, Index i) {
    Eigen::Map<const RowMatrix<Scalar>> s(x.slice(i).data(), c, spatial);
    partial.col(i) = (s.template cast<double>().colwise() - cache.batch_mean).array().square().rowwise().sum();
  });
  cache.batch_var = Vector<double>::Zero(c);
  for (Index i = 0; i < n; ++i) cache.batch_var += partial.col(i);
  cache.batch_var /= count;

  cache.inv_std = (cache.batch_var.array() + epsilon).rsqrt().matrix().template cast<Scalar>();
  const Vector<Scalar> mean = cache.batch_mean.template cast<Scalar>();
  cache.normalized = Tensor<Scalar>(x.shape());
  Tensor<Scalar> y(x.shape());
  parallel_for(jobs, n, [&](int, Index i) {
    Eigen::Map<const RowMatrix<Scalar>> s(x.slice(i).data(), c, spatial);
    Eigen::Map<RowMatrix<Scalar>> xhat(cache.normalized.slice(i).data(), c, spatial);
    Eigen::Map<RowMatrix<Scalar>> out(y.slice(i).data(), c, spatial);
    xhat = (s.colwise() - mean).array().colwise() * cache.inv_std.array();
    out = (xhat.array().colwise() * gamma.data().array()).colwise() + beta.data().array();
  });
  return y;
}

template <typename Scalar>
Tensor<Scalar> batch_norm_infer(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                                const Tensor<Scalar>& running_mean, const Tensor<Scalar>& running_var,
                                double epsilon = kBatchNormEpsilon, int jobs = 1) {
  Index n, c, spatial;
  detail::bn_dims(x.shape(), n, c, spatial);
  require_shape(gamma, {c}, "batch norm gamma");
  const Vector<Scalar> scale =
      gamma.data().array() * (running_var.data().array() + Scalar(epsilon)).rsqrt();
  const Vector<Scalar> shift = beta.data().array() - running_mean.data().array() * scale.array();
  Tensor<Scalar> y(x.shape());
  parallel_for(jobs, n, [&](int, Index i) {
    Eigen::Map<const RowMatrix<Scalar>> s(x.slice(i).data(), c, spatial);
    Eigen::Map<RowMatrix<Scalar>> out(y.slice(i).data(), c, spatial);
    out = (s.array().colwise() * scale.array()).colwise() + shift.array();
  });
  return y;
}

template <typename Scalar>
struct BatchNormGradients {
  Tensor<Scalar> input;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
};

template <typename Scalar>
BatchNormGradients<Scalar> batch_norm_backward(const Tensor<Scalar>& grad_output, const Tensor<Scalar>& gamma,
                                               const BatchNormCache<Scalar>& cache, int jobs = 1) {
  Index n, c, spatial;
  detail::bn_dims(grad_output.shape(), n, c, spatial);
  require_shape(cache.normalized, grad_output.shape(), "batch norm cache");
  const double count = static_cast<double>(n * spatial);

  Eigen::MatrixXd partial_beta(c, n), partial_gamma(c, n);
  parallel_for(jobs, n, [&](int, Index i) {
    Eigen::Map<const RowMatrix<Scalar>> dy(grad_output.slice(i).data(), c, spatial);
    Eigen::Map<const RowMatrix<Scalar>> xhat(cache.normalized.slice(i).data(), c, spatial);
    partial_beta.col(i) = dy.template cast<double>().rowwise().sum();
    partial_gamma.col(i) = (dy.template cast<double>().array() * xhat.template cast<double>().array()).rowwise().sum();
  });
  Vector<double> sum_dy = Vector<double>::Zero(c), sum_dy_xhat = Vector<double>::Zero(c);
  for (Index i = 0; i < n; ++i) {
    sum_dy += partial_beta.col(i);
    sum_dy_xhat += partial_gamma.col(i);
  }

  BatchNormGradients<Scalar> grads{Tensor<Scalar>(grad_output.shape()), Tensor<Scalar>(Shape{c}),
                                   Tensor<Scalar>(Shape{c})};
  grads.beta.data() = sum_dy.cast<Scalar>();
  grads.gamma.data() = sum_dy_xhat.cast<Scalar>();
  const Vector<Scalar> mean_dy = (sum_dy / count).cast<Scalar>();
  const Vector<Scalar> mean_dy_xhat = (sum_dy_xhat / count).cast<Scalar>();
  const Vector<Scalar> scale = gamma.data().array() * cache.inv_std.array();
  parallel_for(jobs, n, [&](int, Index i) {
    Eigen::Map<const RowMatrix<Scalar>> dy(grad_output.slice(i).data(), c, spatial);
    Eigen::Map<const RowMatrix<Scalar>> xhat(cache.normalized.slice(i).data(), c, spatial);
    Eigen::Map<RowMatrix<Scalar>> dx(grads.input.slice(i).data(), c, spatial);
    dx = (((dy.colwise() - mean_dy).array() - xhat.array().colwise() * mean_dy_xhat.array()).colwise() *
          scale.array());
  });
  return grads;
}

// Exponential moving average of the batch statistics.
template <typename Scalar>
void update_running_stats(Tensor<Scalar>& running_mean, Tensor<Scalar>& running_var, const BatchNormCache<Scalar>& cache,
                          double momentum = kBatchNormMomentum) {
  running_mean.data() = (momentum * running_mean.data().template cast<double>() + (1.0 - momentum) * cache.batch_mean)
                            .template cast<Scalar>();
  running_var.data() = (momentum * running_var.data().template cast<double>() + (1.0 - momentum) * cache.batch_var)
                           .template cast<Scalar>();
}

// ---------------------------------------------------------------------------
// Inverted dropout. In train mode `mask` receives 0 or 1/(1-rate) per element.

template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double rate, Mode mode, Rng& rng, Tensor<Scalar>* mask = nullptr) {
  if (rate < 0.0 || rate >= 1.0) throw Error(ErrorCode::InvalidArgument, "dropout rate must lie in [0, 1)");
  if (mode == Mode::Infer || rate == 0.0) {
    if (mask != nullptr) {
      *mask = Tensor<Scalar>(x.shape());
      mask->data().setOnes();
    }
    return x;
  }
  Tensor<Scalar> m(x.shape());
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (Index i = 0; i < m.size(); ++i) m[i] = uniform(rng) < rate ? Scalar(0) : keep_scale;
  Tensor<Scalar> y(x.shape());
  y.data() = x.data().cwiseProduct(m.data());
  if (mask != nullptr) *mask = std::move(m);
  return y;
}

template <typename Scalar>
Tensor<Scalar> dropout_backward(const Tensor<Scalar>& grad_output, const Tensor<Scalar>& mask) {
  require_shape(grad_output, mask.shape(), "dropout grad_output");
  Tensor<Scalar> dx(mask.shape());
  dx.data() = grad_output.data().cwiseProduct(mask.data());
  return dx;
}

// ---------------------------------------------------------------------------
// Fully connected layer: y = W x + b with W stored [out, in].

template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  const Tensor<Scalar> batch = detail::as_batch(x, 1);
  if (weight.rank() != 2 || bias.rank() != 1 || weight.dim(1) != batch.dim(1) || bias.dim(0) != weight.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "dense: x " + to_string(x.shape()) + ", w " + to_string(weight.shape()) +
                                              ", b " + to_string(bias.shape()));
  }
  const Index n = batch.dim(0), in = weight.dim(1), out = weight.dim(0);
  Tensor<Scalar> y({n, out});
  Eigen::Map<const RowMatrix<Scalar>> xm(batch.data().data(), n, in);
  Eigen::Map<const RowMatrix<Scalar>> w(weight.data().data(), out, in);
  Eigen::Map<RowMatrix<Scalar>> ym(y.data().data(), n, out);
  ym.noalias() = xm * w.transpose();
  ym.rowwise() += bias.data().transpose();
  return detail::restore_rank(std::move(y), x.rank());
}

template <typename Scalar>
struct DenseGradients {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

template <typename Scalar>
DenseGradients<Scalar> dense_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                                      const Tensor<Scalar>& grad_output) {
  const Tensor<Scalar> batch = detail::as_batch(x, 1);
  const Tensor<Scalar> dy = detail::as_batch(grad_output, 1);
  const Index n = batch.dim(0), in = weight.dim(1), out = weight.dim(0);
  require_shape(dy, {n, out}, "dense grad_output");
  DenseGradients<Scalar> g{Tensor<Scalar>({n, in}), Tensor<Scalar>(weight.shape()), Tensor<Scalar>(Shape{out})};
  Eigen::Map<const RowMatrix<Scalar>> xm(batch.data().data(), n, in);
  Eigen::Map<const RowMatrix<Scalar>> w(weight.data().data(), out, in);
  Eigen::Map<const RowMatrix<Scalar>> dym(dy.data().data(), n, out);
  Eigen::Map<RowMatrix<Scalar>>(g.input.data().data(), n, in).noalias() = dym * w;
  Eigen::Map<RowMatrix<Scalar>>(g.weight.data().data(), out, in).noalias() = dym.transpose() * xm;
  g.bias.data() = dym.colwise().sum().transpose();
  g.input = detail::restore_rank(std::move(g.input), x.rank());
  return g;
}

// ---------------------------------------------------------------------------
// Row-wise softmax and the mean cross-entropy against class indices.

template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  if (logits.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "softmax expects [N,K]");
  Tensor<Scalar> p(logits.shape());
  Eigen::Map<const RowMatrix<Scalar>> z(logits.data().data(), logits.dim(0), logits.dim(1));
  Eigen::Map<RowMatrix<Scalar>> out(p.data().data(), logits.dim(0), logits.dim(1));
  for (Index i = 0; i < z.rows(); ++i) {
    const auto shifted = (z.row(i).array() - z.row(i).maxCoeff()).exp();
    out.row(i) = shifted / shifted.sum();
  }
  return p;
}

template <typename Scalar>
struct LossAndGradient {
  double loss = 0.0;
  Tensor<Scalar> grad_logits;
};

template <typename Scalar>
LossAndGradient<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<Index>(labels.size())) {
    throw Error(ErrorCode::ShapeMismatch, "logits " + to_string(logits.shape()) + " vs " +
                                              std::to_string(labels.size()) + " labels");
  }
  const Index n = logits.dim(0), k = logits.dim(1);
  LossAndGradient<Scalar> r{0.0, softmax(logits)};
  Eigen::Map<const RowMatrix<Scalar>> z(logits.data().data(), n, k);
  Eigen::Map<RowMatrix<Scalar>> g(r.grad_logits.data().data(), n, k);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= k) throw Error(ErrorCode::InvalidArgument, "label out of range");
    const auto row = z.row(i).template cast<double>();
    const double peak = row.maxCoeff();
    const double log_sum = peak + std::log((row.array() - peak).exp().sum());
    total += log_sum - row[label];
    g(i, label) -= Scalar(1);
  }
  g /= Scalar(n);
  r.loss = total / static_cast<double>(n);
  return r;
}

}  // namespace coverid::nn
