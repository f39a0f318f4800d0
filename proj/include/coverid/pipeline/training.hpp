#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coverid/cross_similarity.hpp"
#include "coverid/nn/adam.hpp"
#include "coverid/nn/network.hpp"
#include "coverid/pipeline/key_value_config.hpp"
#include "coverid/pipeline/matrix_provider.hpp"
#include "coverid/pipeline/pairs.hpp"

namespace coverid::pipeline {

enum class StopRule {
  LossValue,  // stop once the mean epoch loss drops below the threshold
  LossDelta,  // stop once it changes by less than the threshold
};

struct TrainingConfig {
  int batch_size = 32;
  int max_epochs = 50;
  double loss_threshold = 1e-4;
  StopRule stop_rule = StopRule::LossValue;
  nn::AdamConfig adam;
  double dropout_p = 0.5;
  double dropout_q = 0.5;
  std::uint64_t seed = 1;
  // Keep the best-validation epoch rather than the last one.
  bool select_best = true;
  // Control runs: fit to balanced_label_shuffle of the training labels.
  bool shuffle_labels = false;
  // Before each validation, replace the batch-norm running averages with
  // statistics pooled over the training set. With few optimizer steps the
  // 0.99-momentum averages are still dominated by their initial values.
  bool recalibrate_batch_norm = true;
  int jobs = 1;
};

// Keys: batch_size, max_epochs, loss_threshold, stop_rule (loss|delta),
// learning_rate, beta1, beta2, epsilon, dropout_p, dropout_q, seed,
// select_best, shuffle_labels, recalibrate_batch_norm, jobs. Unknown keys throw InvalidConfig.
TrainingConfig training_config_from(const KeyValues& values);
KeyValues to_key_values(const TrainingConfig& config);
void validate(const TrainingConfig& config);

// Standardized pair matrices with their labels, ready for batching.
struct MatrixDataset {
  std::vector<SimilarityGrid> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  nn::Tensor<float> batch(const std::vector<std::size_t>& indices) const;
  std::vector<int> batch_labels(const std::vector<std::size_t>& indices) const;
};

MatrixDataset materialize(const PairDataset& pairs, MatrixSource& source, int jobs = 1);

// Label shuffle for control runs. Within each true class, half of the items
// (the odd one alternating between classes) receive each label, in random
// order, so the shuffled labels carry no information about the true class. A
// plain permutation leaves a small label/class imbalance of random sign, which
// a network readily fits when one class looks homogeneous.
std::vector<int> balanced_label_shuffle(const std::vector<int>& labels, Rng& rng);

// Overwrites every batch-norm running mean/variance with the statistics of
// `data` under the current weights: one train-mode pass in mini-batches of
// `batch_size`, pooled exactly across batches. Dropout is disabled for the pass.
void recalibrate_batch_norm(const nn::ModelSpec& spec, nn::ModelParams<float>& params, const MatrixDataset& data,
                            int jobs = 1, int batch_size = 32);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingResult {
  nn::ModelSpec spec;
  nn::ModelParams<float> params;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0: the initial parameters were kept
  double best_val_accuracy = 0.0;
  bool converged = false;
};

// One Adam step per call on a fixed model; the building block of train().
class Trainer {
 public:
  Trainer(nn::ModelSpec spec, const TrainingConfig& config);

  // Forward, backward, update; returns the mean cross-entropy of the batch.
  double step(const nn::Tensor<float>& batch, const std::vector<int>& labels);

  const nn::Network<float>& network() const { return network_; }
  const nn::ModelParams<float>& params() const { return params_; }
  std::int64_t steps() const { return adam_.step; }

 private:
  nn::Network<float> network_;
  nn::ModelParams<float> params_;
  nn::AdamState<float> adam_;
  Rng dropout_rng_;
  int jobs_;
};

// Shuffled mini-batch epochs until the stop rule fires or max_epochs is hit.
// Throws EmptyDataset for an empty train or validation set and DivergedLoss
// on a non-finite loss.
TrainingResult train(const TrainingConfig& config, const MatrixDataset& train_set, const MatrixDataset& val_set,
                     nn::ModelSpec spec = nn::ModelSpec::standard());

// Fraction of samples whose argmax matches the label; a tie predicts non-cover.
double validation_accuracy(const nn::Network<float>& network, const nn::ModelParams<float>& params,
                           const MatrixDataset& data, int jobs = 1, int batch_size = 32);

struct GridCell {
  double dropout_p = 0.0;
  double dropout_q = 0.0;
  double val_accuracy = 0.0;
};

struct GridSearchResult {
  GridCell best;
  TrainingResult model;
  std::vector<GridCell> cells;
};

// One training run per (p, q); the highest validation accuracy wins, ties go
// to the smaller p, then the smaller q. Only the given train/validation data
// is ever touched.
GridSearchResult grid_search_dropout(const TrainingConfig& base, std::vector<double> p_grid,
                                     std::vector<double> q_grid, const MatrixDataset& train_set,
                                     const MatrixDataset& val_set, nn::ModelSpec spec = nn::ModelSpec::standard());

// `epoch,train_loss,val_accuracy` header plus one line per epoch.
std::string format_history(const std::vector<EpochRecord>& history);

}  // namespace coverid::pipeline
