#include "coverid/nn/network.hpp"

namespace coverid::nn {

namespace {

Shape with_batch(Index n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(ModelSpec spec) : spec_(std::move(spec)), shapes_(spec_.output_shapes()), hash_(spec_.hash()) {}

template <typename Scalar>
bool Network<Scalar>::keep_output(std::size_t layer) const {
  const auto& layers = spec_.layers;
  if (layers[layer].kind == LayerKind::ReLU) return true;
  if (layer + 1 < layers.size()) {
    const LayerKind next = layers[layer + 1].kind;
    if (next == LayerKind::Conv || next == LayerKind::Dense) return true;
  }
  return false;
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::forward(const ModelParams<Scalar>& params, const Tensor<Scalar>& batch, Mode mode,
                                        Rng* rng, ForwardCache<Scalar>* cache, int jobs) const {
  if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != spec_.input_shape()) {
    throw Error(ErrorCode::ShapeMismatch, "batch " + to_string(batch.shape()) + " does not match model input " +
                                              to_string(spec_.input_shape()));
  }
  if (params.layers.size() != spec_.layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameters do not match the model spec");
  }
  const std::size_t count = spec_.layers.size();
  const Index n = batch.dim(0);
  const bool keep = cache != nullptr && mode == Mode::Train;

  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache != nullptr ? *cache : local;
  c = ForwardCache<Scalar>{};
  c.mode = mode;
  c.spec_hash = hash_;
  c.outputs.resize(count);
  c.output_shapes.resize(count);
  c.argmax.resize(count);
  c.batch_norm.resize(count);
  c.masks.resize(count);
  if (keep) c.input = batch;

  std::vector<ConvWorkspace<Scalar>> workspaces(static_cast<std::size_t>(clamp_jobs(jobs)));
  Tensor<Scalar> current;
  const Tensor<Scalar>* in = &batch;

  for (std::size_t i = 0; i + 1 < count; ++i) {
    const LayerSpec& spec = spec_.layers[i];
    const LayerParams<Scalar>& p = params.layers[i];
    Tensor<Scalar> out;
    switch (spec.kind) {
      case LayerKind::Conv: {
        const ConvGeometry g = conv_geometry(in->shape(), p.weight, p.bias);
        out = Tensor<Scalar>(with_batch(n, shapes_[i]));
        parallel_for(jobs, n, [&](int worker, Index s) {
          conv_forward_sample(in->slice(s).data(), p.weight, p.bias, g, workspaces[static_cast<std::size_t>(worker)],
                              out.slice(s).data());
        });
        break;
      }
      case LayerKind::ReLU:
        out = relu(in == &current ? std::move(current) : *in);
        break;
      case LayerKind::MaxPool: {
        auto pooled = maxpool2x2(*in, jobs);
        out = std::move(pooled.output);
        if (keep) c.argmax[i] = std::move(pooled.argmax);
        break;
      }
      case LayerKind::BatchNorm:
        if (mode == Mode::Train) {
          out = batch_norm_train(*in, p.gamma, p.beta, c.batch_norm[i], kBatchNormEpsilon, jobs);
          if (!keep) c.batch_norm[i].normalized = Tensor<Scalar>();
        } else {
          out = batch_norm_infer(*in, p.gamma, p.beta, p.running_mean, p.running_var, kBatchNormEpsilon, jobs);
        }
        break;
      case LayerKind::Dropout:
        if (mode == Mode::Train && spec.rate > 0.0) {
          if (rng == nullptr) throw Error(ErrorCode::InvalidArgument, "train-mode dropout needs an rng");
          out = dropout(*in, spec.rate, mode, *rng, keep ? &c.masks[i] : nullptr);
        } else {
          out = in == &current ? std::move(current) : *in;
          if (keep) {
            c.masks[i] = Tensor<Scalar>(out.shape());
            c.masks[i].data().setOnes();
          }
        }
        break;
      case LayerKind::Flatten:
        out = in == &current ? std::move(current) : *in;
        out.reshape(with_batch(n, shapes_[i]));
        break;
      case LayerKind::Dense:
        out = dense(*in, p.weight, p.bias);
        break;
      case LayerKind::Softmax:
        break;
    }
    c.output_shapes[i] = out.shape();
    if (keep && keep_output(i)) {
      c.outputs[i] = out;
    }
    current = std::move(out);
    in = &current;
  }

  c.logits = current;
  Tensor<Scalar> probs = softmax(current);
  c.output_shapes[count - 1] = probs.shape();
  return probs;
}

template <typename Scalar>
ModelParams<Scalar> Network<Scalar>::backward(const ModelParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                                              const Tensor<Scalar>& grad_logits, int jobs) const {
  if (cache.mode != Mode::Train || cache.input.empty() || cache.spec_hash != hash_ ||
      cache.outputs.size() != spec_.layers.size()) {
    throw Error(ErrorCode::StaleCache, "backward needs the cache of a train-mode forward pass of this model");
  }
  const Index n = cache.batch_size();
  require_shape(grad_logits, {n, spec_.num_classes()}, "grad_logits");

  const auto input_of = [&](std::size_t i) -> const Tensor<Scalar>& {
    return i == 0 ? cache.input : cache.outputs[i - 1];
  };
  const auto input_shape = [&](std::size_t i) -> Shape {
    return i == 0 ? cache.input.shape() : cache.output_shapes[i - 1];
  };

  ModelParams<Scalar> grads = zeros_like(params);
  Tensor<Scalar> grad = grad_logits;
  std::vector<ConvWorkspace<Scalar>> workspaces(static_cast<std::size_t>(clamp_jobs(jobs)));

  for (std::size_t i = spec_.layers.size() - 1; i-- > 0;) {
    const LayerSpec& spec = spec_.layers[i];
    const LayerParams<Scalar>& p = params.layers[i];
    LayerParams<Scalar>& g = grads.layers[i];
    switch (spec.kind) {
      case LayerKind::Conv: {
        const Tensor<Scalar>& x = input_of(i);
        const ConvGeometry geom = conv_geometry(x.shape(), p.weight, p.bias);
        const bool need_input_grad = i > 0;
        Tensor<Scalar> dx = need_input_grad ? Tensor<Scalar>(x.shape()) : Tensor<Scalar>();
        std::vector<RowMatrix<Scalar>> sample_w(static_cast<std::size_t>(n));
        std::vector<Vector<Scalar>> sample_b(static_cast<std::size_t>(n));
        parallel_for(jobs, n, [&](int worker, Index s) {
          auto& gw = sample_w[static_cast<std::size_t>(s)];
          auto& gb = sample_b[static_cast<std::size_t>(s)];
          gw = RowMatrix<Scalar>::Zero(geom.filters, geom.patch());
          gb = Vector<Scalar>::Zero(geom.filters);
          conv_backward_sample(x.slice(s).data(), p.weight, grad.slice(s).data(), geom,
                               workspaces[static_cast<std::size_t>(worker)],
                               need_input_grad ? dx.slice(s).data() : nullptr, gw, gb);
        });
        Eigen::Map<RowMatrix<Scalar>> total_w(g.weight.data().data(), geom.filters, geom.patch());
        for (Index s = 0; s < n; ++s) {
          total_w += sample_w[static_cast<std::size_t>(s)];
          g.bias.data() += sample_b[static_cast<std::size_t>(s)];
        }
        grad = std::move(dx);
        break;
      }
      case LayerKind::ReLU:
        grad = relu_backward(cache.outputs[i], grad);
        break;
      case LayerKind::MaxPool:
        grad = maxpool2x2_backward(grad, cache.argmax[i], input_shape(i));
        break;
      case LayerKind::BatchNorm: {
        auto bn = batch_norm_backward(grad, p.gamma, cache.batch_norm[i], jobs);
        g.gamma = std::move(bn.gamma);
        g.beta = std::move(bn.beta);
        grad = std::move(bn.input);
        break;
      }
      case LayerKind::Dropout:
        grad = dropout_backward(grad, cache.masks[i]);
        break;
      case LayerKind::Flatten:
        grad.reshape(input_shape(i));
        break;
      case LayerKind::Dense: {
        auto d = dense_backward(input_of(i), p.weight, grad);
        g.weight = std::move(d.weight);
        g.bias = std::move(d.bias);
        grad = std::move(d.input);
        break;
      }
      case LayerKind::Softmax:
        break;
    }
  }
  return grads;
}

template <typename Scalar>
void Network<Scalar>::update_running_stats(ModelParams<Scalar>& params, const ForwardCache<Scalar>& cache) const {
  if (cache.mode != Mode::Train || cache.spec_hash != hash_) {
    throw Error(ErrorCode::StaleCache, "running statistics need a train-mode cache of this model");
  }
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].kind != LayerKind::BatchNorm) continue;
    auto& p = params.layers[i];
    nn::update_running_stats(p.running_mean, p.running_var, cache.batch_norm[i]);
  }
}

template class Network<float>;
template class Network<double>;

}  // namespace coverid::nn
