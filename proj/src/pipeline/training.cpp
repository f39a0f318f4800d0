#include "coverid/pipeline/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "coverid/parallel.hpp"

namespace coverid::pipeline {

TrainingConfig training_config_from(const KeyValues& values) {
  TrainingConfig c;
  ConfigReader r(values);
  r.read("batch_size", c.batch_size);
  r.read("max_epochs", c.max_epochs);
  r.read("loss_threshold", c.loss_threshold);
  std::string stop = c.stop_rule == StopRule::LossValue ? "loss" : "delta";
  r.read("stop_rule", stop);
  r.read("learning_rate", c.adam.learning_rate);
  r.read("beta1", c.adam.beta1);
  r.read("beta2", c.adam.beta2);
  r.read("epsilon", c.adam.epsilon);
  r.read("dropout_p", c.dropout_p);
  r.read("dropout_q", c.dropout_q);
  r.read("seed", c.seed);
  r.read("select_best", c.select_best);
  r.read("shuffle_labels", c.shuffle_labels);
  r.read("recalibrate_batch_norm", c.recalibrate_batch_norm);
  r.read("jobs", c.jobs);
  r.finish();
  if (stop == "loss") {
    c.stop_rule = StopRule::LossValue;
  } else if (stop == "delta") {
    c.stop_rule = StopRule::LossDelta;
  } else {
    throw Error(ErrorCode::InvalidConfig, "stop_rule must be 'loss' or 'delta'");
  }
  validate(c);
  return c;
}

KeyValues to_key_values(const TrainingConfig& c) {
  return {{"batch_size", std::to_string(c.batch_size)},
          {"max_epochs", std::to_string(c.max_epochs)},
          {"loss_threshold", format_number(c.loss_threshold)},
          {"stop_rule", c.stop_rule == StopRule::LossValue ? "loss" : "delta"},
          {"learning_rate", format_number(c.adam.learning_rate)},
          {"beta1", format_number(c.adam.beta1)},
          {"beta2", format_number(c.adam.beta2)},
          {"epsilon", format_number(c.adam.epsilon)},
          {"dropout_p", format_number(c.dropout_p)},
          {"dropout_q", format_number(c.dropout_q)},
          {"seed", std::to_string(c.seed)},
          {"select_best", c.select_best ? "true" : "false"},
          {"shuffle_labels", c.shuffle_labels ? "true" : "false"},
          {"recalibrate_batch_norm", c.recalibrate_batch_norm ? "true" : "false"},
          {"jobs", std::to_string(c.jobs)}};
}

void validate(const TrainingConfig& c) {
  const auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (c.batch_size < 1) bad("batch_size must be >= 1");
  if (c.max_epochs < 0) bad("max_epochs must be >= 0");
  if (!(c.loss_threshold > 0.0)) bad("loss_threshold must be > 0");
  if (!(c.adam.learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (c.adam.beta1 < 0.0 || c.adam.beta1 >= 1.0 || c.adam.beta2 < 0.0 || c.adam.beta2 >= 1.0) {
    bad("Adam betas must lie in [0, 1)");
  }
  if (!(c.adam.epsilon > 0.0)) bad("epsilon must be > 0");
  if (c.dropout_p < 0.0 || c.dropout_p >= 1.0 || c.dropout_q < 0.0 || c.dropout_q >= 1.0) {
    bad("dropout rates must lie in [0, 1)");
  }
  if (c.jobs < 1) bad("jobs must be >= 1");
}

nn::Tensor<float> MatrixDataset::batch(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  const Eigen::Index rows = inputs[indices.front()].rows();
  const Eigen::Index cols = inputs[indices.front()].cols();
  nn::Tensor<float> out({static_cast<Eigen::Index>(indices.size()), 1, rows, cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& m = inputs[indices[i]];
    if (m.rows() != rows || m.cols() != cols) throw Error(ErrorCode::ShapeMismatch, "mixed matrix sizes in batch");
    out.slice(static_cast<Eigen::Index>(i)) = Eigen::Map<const nn::Vector<float>>(m.data(), m.size());
  }
  return out;
}

std::vector<int> MatrixDataset::batch_labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

MatrixDataset materialize(const PairDataset& pairs, MatrixSource& source, int jobs) {
  MatrixDataset out;
  out.inputs.resize(pairs.size());
  out.labels.resize(pairs.size());
  parallel_for(jobs, static_cast<std::ptrdiff_t>(pairs.size()), [&](int, std::ptrdiff_t i) {
    const auto& r = pairs.records[static_cast<std::size_t>(i)];
    out.inputs[static_cast<std::size_t>(i)] = source.matrix(r.song_a, r.song_b).values;
    out.labels[static_cast<std::size_t>(i)] = r.label;
  });
  return out;
}

Trainer::Trainer(nn::ModelSpec spec, const TrainingConfig& config)
    : network_(std::move(spec)),
      dropout_rng_(make_stream(config.seed, streams::kDropout)),
      jobs_(config.jobs) {
  Rng init = make_stream(config.seed, streams::kInit);
  params_ = nn::init_params<float>(network_.spec(), init);
  adam_ = nn::make_adam_state(params_, config.adam);
}

double Trainer::step(const nn::Tensor<float>& batch, const std::vector<int>& labels) {
  nn::ForwardCache<float> cache;
  network_.forward(params_, batch, nn::Mode::Train, &dropout_rng_, &cache, jobs_);
  const auto loss = nn::softmax_cross_entropy(cache.logits, labels);
  if (!std::isfinite(loss.loss)) throw Error(ErrorCode::DivergedLoss, "non-finite training loss");
  const nn::ModelParams<float> grads = network_.backward(params_, cache, loss.grad_logits, jobs_);
  nn::adam_step(params_, grads, adam_);
  network_.update_running_stats(params_, cache);
  return loss.loss;
}

double validation_accuracy(const nn::Network<float>& network, const nn::ModelParams<float>& params,
                           const MatrixDataset& data, int jobs, int batch_size) {
  if (data.size() == 0) throw Error(ErrorCode::EmptyDataset, "no samples to score");
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + static_cast<std::size_t>(batch_size)); ++i) {
      idx.push_back(i);
    }
    const nn::Tensor<float> probs = network.forward(params, data.batch(idx), nn::Mode::Infer, nullptr, nullptr, jobs);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k) * probs.dim(1);
      const int predicted = probs[row + kCover] > probs[row + kNonCover] ? kCover : kNonCover;
      if (predicted == data.labels[idx[k]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<int> balanced_label_shuffle(const std::vector<int>& labels, Rng& rng) {
  std::vector<int> out(labels.size());
  bool extra_cover = true;
  for (int truth : {kNonCover, kCover}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == truth) members.push_back(i);
    }
    const std::size_t half = members.size() / 2;
    std::vector<int> pool(half, kNonCover);
    pool.resize(2 * half, kCover);
    if (members.size() % 2 == 1) {
      pool.push_back(extra_cover ? kCover : kNonCover);
      extra_cover = !extra_cover;
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) out[members[k]] = pool[k];
  }
  return out;
}

void recalibrate_batch_norm(const nn::ModelSpec& spec, nn::ModelParams<float>& params, const MatrixDataset& data,
                            int jobs, int batch_size) {
  if (data.size() == 0) throw Error(ErrorCode::EmptyDataset, "no samples to calibrate on");
  nn::ModelSpec plain = spec;
  plain.set_dropout(0.0, 0.0);
  const nn::Network<float> network(plain);
  const std::size_t layers = plain.layers.size();
  std::vector<Eigen::VectorXd> sum(layers), sum_sq(layers);
  Rng unused(0);
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + static_cast<std::size_t>(batch_size)); ++i) {
      idx.push_back(i);
    }
    nn::ForwardCache<float> cache;
    network.forward(params, data.batch(idx), nn::Mode::Train, &unused, &cache, jobs);
    const double n = static_cast<double>(idx.size());
    for (std::size_t l = 0; l < layers; ++l) {
      if (plain.layers[l].kind != nn::LayerKind::BatchNorm) continue;
      const auto& bn = cache.batch_norm[l];
      if (sum[l].size() == 0) {
        sum[l].setZero(bn.batch_mean.size());
        sum_sq[l].setZero(bn.batch_mean.size());
      }
      sum[l] += n * bn.batch_mean;
      sum_sq[l] += n * (bn.batch_var.array() + bn.batch_mean.array().square()).matrix();
    }
  }
  const double total = static_cast<double>(data.size());
  for (std::size_t l = 0; l < layers; ++l) {
    if (sum[l].size() == 0) continue;
    const Eigen::VectorXd mean = sum[l] / total;
    const Eigen::VectorXd var = (sum_sq[l] / total - mean.array().square().matrix()).cwiseMax(0.0);
    params.layers[l].running_mean.data() = mean.cast<float>();
    params.layers[l].running_var.data() = var.cast<float>();
  }
}

TrainingResult train(const TrainingConfig& config, const MatrixDataset& train_set, const MatrixDataset& val_set,
                     nn::ModelSpec spec) {
  validate(config);
  if (train_set.size() == 0) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (val_set.size() == 0) throw Error(ErrorCode::EmptyDataset, "validation set is empty");
  spec.set_dropout(config.dropout_p, config.dropout_q);

  MatrixDataset shuffled_labels;
  const MatrixDataset* fit_set = &train_set;
  if (config.shuffle_labels) {
    shuffled_labels = train_set;
    Rng control = make_stream(config.seed, streams::kControl);
    shuffled_labels.labels = balanced_label_shuffle(train_set.labels, control);
    fit_set = &shuffled_labels;
  }

  Trainer trainer(spec, config);
  TrainingResult result;
  result.spec = trainer.network().spec();
  result.params = trainer.params();
  if (config.max_epochs == 0) return result;
  result.best_val_accuracy = -1.0;

  Rng shuffle = make_stream(config.seed, streams::kShuffle);
  std::vector<std::size_t> order(fit_set->size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double previous_loss = std::numeric_limits<double>::quiet_NaN();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      loss_sum += trainer.step(fit_set->batch(idx), fit_set->batch_labels(idx)) * static_cast<double>(idx.size());
    }
    const double mean_loss = loss_sum / static_cast<double>(order.size());
    nn::ModelParams<float> snapshot = trainer.params();
    if (config.recalibrate_batch_norm) {
      recalibrate_batch_norm(spec, snapshot, train_set, config.jobs, config.batch_size);
    }
    const double accuracy = validation_accuracy(trainer.network(), snapshot, val_set, config.jobs,
                                                config.batch_size);
    result.history.push_back({epoch, mean_loss, accuracy});
    if (!config.select_best || accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = accuracy;
      result.best_epoch = epoch;
      result.params = std::move(snapshot);
    }
    const bool converged = config.stop_rule == StopRule::LossValue
                               ? mean_loss < config.loss_threshold
                               : std::abs(previous_loss - mean_loss) < config.loss_threshold;
    previous_loss = mean_loss;
    if (converged) {
      result.converged = true;
      break;
    }
  }
  return result;
}

GridSearchResult grid_search_dropout(const TrainingConfig& base, std::vector<double> p_grid,
                                     std::vector<double> q_grid, const MatrixDataset& train_set,
                                     const MatrixDataset& val_set, nn::ModelSpec spec) {
  if (p_grid.empty() || q_grid.empty()) throw Error(ErrorCode::InvalidConfig, "dropout grid must be non-empty");
  std::sort(p_grid.begin(), p_grid.end());
  std::sort(q_grid.begin(), q_grid.end());
  GridSearchResult out;
  bool have_best = false;
  for (double p : p_grid) {
    for (double q : q_grid) {
      TrainingConfig config = base;
      config.dropout_p = p;
      config.dropout_q = q;
      TrainingResult run = train(config, train_set, val_set, spec);
      const GridCell cell{p, q, run.best_val_accuracy};
      out.cells.push_back(cell);
      // Cells arrive in (p, q) ascending order, so a strict comparison keeps
      // the smaller rates on ties.
      if (!have_best || cell.val_accuracy > out.best.val_accuracy) {
        out.best = cell;
        out.model = std::move(run);
        have_best = true;
      }
    }
  }
  return out;
}

std::string format_history(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_accuracy\n";
  char line[96];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", r.epoch, r.train_loss, r.val_accuracy);
    out += line;
  }
  return out;
}

}  // namespace coverid::pipeline
