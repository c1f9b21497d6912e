#pragma once

#include "casgen/data/dataset.hpp"
#include "casgen/eval/resnet.hpp"

#include <functional>
#include <vector>

namespace casgen::eval {

struct TrainingPolicy {
  int epochs = 100;
  double lr = 1e-3;
  double label_smoothing = 0.1;
  int batch_size = 256;
  int plateau_patience = 10;
  double plateau_factor = 0.1;
  int early_stop_patience = 25;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_loss = 0.0, train_accuracy = 0.0;
  double val_loss = 0.0, val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  bool stopped_early = false;
  bool aborted = false;  // callback requested stop (e.g. pruning)
  data::Provenance train_provenance = data::Provenance::real;
};

/// Called after each epoch; return false to abort training (used for pruning).
using EpochCallback = std::function<bool(const EpochMetrics&)>;

/// Trains under the fixed policy: Adam, label smoothing, plateau scheduler on
/// validation loss, early stopping, best-validation-accuracy checkpointing.
/// A stratified `val_fraction` slice of `train` is held out for validation;
/// the model is left holding the best checkpoint.
TrainResult train_classifier(ResNetClassifier& model, const TrainingPolicy& policy,
                             const data::LabeledDataset& train,
                             const EpochCallback& callback = nullptr);

/// Top-1 accuracy of the model on a labeled dataset (eval mode).
double classifier_accuracy(ResNetClassifier& model, const data::LabeledDataset& data,
                           int batch_size = 256);

/// Write per-epoch history as CSV.
void write_history_csv(const std::string& path, const std::vector<EpochMetrics>& history);

}  // namespace casgen::eval
