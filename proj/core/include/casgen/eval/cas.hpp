#pragma once

#include "casgen/data/dataset.hpp"
#include "casgen/eval/classifier.hpp"
#include "casgen/eval/resnet.hpp"

#include <functional>
#include <string>
#include <vector>

namespace casgen::eval {

struct CASReport {
  std::string dataset;
  std::string stage;  // pipeline stage or scale factor ("x3", "Real", ...)
  double accuracy = 0.0;
  int epochs_run = 0;
  double generation_seconds = 0.0;
};

/// Classification Accuracy Score: top-1 accuracy on the real test set of a
/// classifier trained exclusively on synthetic data. `train_provenance` is
/// the provenance of the classifier's training set; anything but synthetic
/// is rejected, as is a non-real test set.
double compute_cas(ResNetClassifier& model, data::Provenance train_provenance,
                   const data::LabeledDataset& real_test);

struct GenerationTiming {
  double seconds = 0.0;
  double per_image_seconds = 0.0;
  long long denoiser_evals = 0;
  long images = 0;
};

/// Wall-clock timing around a full generation call. `generate` must perform
/// the sampling (de-normalization included, disk writes excluded) and return
/// the denoiser-forward-evaluation count.
GenerationTiming measure_generation_time(const std::function<long long()>& generate, long n);

struct SweepRow {
  CASReport report;
  bool is_baseline = false;
  bool beats_baseline = false;
  bool is_best_synthetic = false;
};

/// CAS per scaled synthetic dataset plus the real-train baseline.  `datasets`
/// carries (stage label, dataset) pairs; the baseline row is trained on
/// `real_train` and labelled "Real".  Classifier seeds derive from
/// policy.seed and the row index.
std::vector<SweepRow> scaling_sweep_eval(
    const std::vector<std::pair<std::string, const data::LabeledDataset*>>& datasets,
    const data::LabeledDataset& real_train, const data::LabeledDataset& real_test,
    const ClassifierConfig& cfg, const TrainingPolicy& policy);

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace casgen::eval
