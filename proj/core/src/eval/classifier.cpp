#include "casgen/eval/classifier.hpp"

#include "casgen/eval/loss.hpp"
#include "casgen/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace casgen::eval {
namespace {

nn::Tensor images_to_tensor(const data::LabeledDataset& ds, const std::vector<int>& idx) {
  const auto& first = ds.images[idx[0]];
  const int c = first.channels, h = first.height, w = first.width;
  nn::Tensor x({static_cast<int>(idx.size()), c, h, w});
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& img = ds.images[idx[i]];
    std::copy(img.values.begin(), img.values.end(), x.data() + i * c * h * w);
  }
  return x;
}

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalMetrics evaluate(ResNetClassifier& model, const data::LabeledDataset& ds,
                     const std::vector<int>& idx, double smoothing, int batch_size) {
  double loss_sum = 0.0;
  long correct = 0;
  for (size_t start = 0; start < idx.size(); start += batch_size) {
    const size_t end = std::min(idx.size(), start + batch_size);
    std::vector<int> batch(idx.begin() + start, idx.begin() + end);
    std::vector<int> labels;
    for (int i : batch) labels.push_back(ds.labels[i]);
    nn::Tensor logits = model.forward(images_to_tensor(ds, batch), false);
    loss_sum += smoothed_cross_entropy_batch(logits, labels, smoothing) *
                static_cast<double>(batch.size());
    const int c = logits.dim(1);
    for (size_t i = 0; i < batch.size(); ++i) {
      const double* row = logits.data() + i * c;
      const int pred = static_cast<int>(std::max_element(row, row + c) - row);
      if (pred == labels[i]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(idx.size()),
          static_cast<double>(correct) / static_cast<double>(idx.size())};
}

}  // namespace

void TrainingPolicy::validate() const {
  if (epochs < 1 || batch_size < 1 || plateau_patience < 1 || early_stop_patience < 1)
    throw std::invalid_argument("training policy fields must be positive");
  if (lr <= 0.0 || plateau_factor <= 0.0 || plateau_factor >= 1.0)
    throw std::invalid_argument("bad learning-rate settings");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw std::invalid_argument("label smoothing must be in [0,1)");
  if (val_fraction <= 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("val_fraction must be in (0,1)");
}

TrainResult train_classifier(ResNetClassifier& model, const TrainingPolicy& policy,
                             const data::LabeledDataset& train, const EpochCallback& callback) {
  policy.validate();
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  if (train.num_classes != model.config().num_classes)
    throw std::invalid_argument("dataset/classifier class-count mismatch");

  // Stratified validation slice: largest-remainder split of the requested
  // fraction across the per-class histograms, taking the tail of each class.
  const auto hist = data::class_histogram(train);
  const long val_total = std::lround(policy.val_fraction * static_cast<double>(train.size()));
  if (val_total < train.num_classes)
    throw std::invalid_argument("validation slice smaller than the class count");
  const auto val_counts = data::stratified_counts(val_total, hist);

  std::vector<std::vector<int>> by_class(train.num_classes);
  for (size_t i = 0; i < train.size(); ++i) by_class[train.labels[i]].push_back(static_cast<int>(i));
  std::vector<int> train_idx, val_idx;
  for (int c = 0; c < train.num_classes; ++c) {
    const long keep = static_cast<long>(by_class[c].size()) - val_counts.counts[c];
    if (keep < 1) throw std::invalid_argument("class " + std::to_string(c) + " lost to validation");
    train_idx.insert(train_idx.end(), by_class[c].begin(), by_class[c].begin() + keep);
    val_idx.insert(val_idx.end(), by_class[c].begin() + keep, by_class[c].end());
  }

  auto params = model.params();
  nn::Adam opt(params, {.lr = policy.lr});

  TrainResult result;
  result.train_provenance = train.provenance;
  double lr = policy.lr;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int plateau_count = 0, stall_count = 0;
  auto buffers = model.buffers();
  std::vector<nn::Tensor> best_params, best_buffers;

  for (int epoch = 1; epoch <= policy.epochs; ++epoch) {
    std::vector<int> order(train_idx);
    nn::Rng shuffle_rng(nn::derive_seed(policy.seed, 0x636c66ULL, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    long correct = 0;
    for (size_t start = 0; start < order.size(); start += policy.batch_size) {
      const size_t end = std::min(order.size(), start + policy.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + end);
      std::vector<int> labels;
      for (int i : batch) labels.push_back(train.labels[i]);

      nn::Tensor logits = model.forward(images_to_tensor(train, batch), true);
      nn::Tensor dlogits;
      const double loss =
          smoothed_cross_entropy_batch(logits, labels, policy.label_smoothing, &dlogits);
      opt.zero_grad();
      model.backward(dlogits);
      opt.step(lr);

      loss_sum += loss * static_cast<double>(batch.size());
      const int c = logits.dim(1);
      for (size_t i = 0; i < batch.size(); ++i) {
        const double* row = logits.data() + i * c;
        if (static_cast<int>(std::max_element(row, row + c) - row) == labels[i]) ++correct;
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    const auto val =
        evaluate(model, train, val_idx, policy.label_smoothing, policy.batch_size);
    m.val_loss = val.loss;
    m.val_accuracy = val.accuracy;
    m.lr = lr;
    result.history.push_back(m);
    result.epochs_run = epoch;

    if (m.val_accuracy > result.best_val_accuracy || best_params.empty()) {
      result.best_val_accuracy = m.val_accuracy;
      result.best_epoch = epoch;
      best_params.clear();
      for (auto* p : params) best_params.push_back(p->value);
      best_buffers.clear();
      for (auto* b : buffers) best_buffers.push_back(*b);
    }

    if (m.val_loss < best_val_loss - 1e-12) {
      best_val_loss = m.val_loss;
      plateau_count = 0;
      stall_count = 0;
    } else {
      ++plateau_count;
      ++stall_count;
    }
    if (plateau_count >= policy.plateau_patience) {
      lr *= policy.plateau_factor;
      plateau_count = 0;
    }
    if (callback && !callback(m)) {
      result.aborted = true;
      break;
    }
    if (stall_count >= policy.early_stop_patience) {
      result.stopped_early = true;
      break;
    }
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  for (size_t i = 0; i < buffers.size(); ++i) *buffers[i] = best_buffers[i];
  return result;
}

double classifier_accuracy(ResNetClassifier& model, const data::LabeledDataset& ds,
                           int batch_size) {
  if (ds.size() == 0) throw std::invalid_argument("empty dataset");
  std::vector<int> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return evaluate(model, ds, idx, 0.0, batch_size).accuracy;
}

void write_history_csv(const std::string& path, const std::vector<EpochMetrics>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history csv: " + path);
  out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy,lr\n";
  for (const auto& m : history)
    out << m.epoch << "," << m.train_loss << "," << m.train_accuracy << "," << m.val_loss << ","
        << m.val_accuracy << "," << m.lr << "\n";
}

}  // namespace casgen::eval
