#include "casgen/eval/cas.hpp"

#include "casgen/nn/rng.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>

namespace casgen::eval {

double compute_cas(ResNetClassifier& model, data::Provenance train_provenance,
                   const data::LabeledDataset& real_test) {
  if (train_provenance != data::Provenance::synthetic)
    throw std::invalid_argument("CAS requires a classifier trained exclusively on synthetic data");
  if (real_test.provenance != data::Provenance::real)
    throw std::invalid_argument("CAS must score against a real test set");
  if (real_test.num_classes != model.config().num_classes)
    throw std::invalid_argument("test set / classifier class-count mismatch");
  return classifier_accuracy(model, real_test);
}

GenerationTiming measure_generation_time(const std::function<long long()>& generate, long n) {
  if (n < 1) throw std::invalid_argument("generation timing needs n >= 1");
  GenerationTiming t;
  t.images = n;
  const auto start = std::chrono::steady_clock::now();
  t.denoiser_evals = generate();
  const auto end = std::chrono::steady_clock::now();
  t.seconds = std::chrono::duration<double>(end - start).count();
  t.per_image_seconds = t.seconds / static_cast<double>(n);
  return t;
}

std::vector<SweepRow> scaling_sweep_eval(
    const std::vector<std::pair<std::string, const data::LabeledDataset*>>& datasets,
    const data::LabeledDataset& real_train, const data::LabeledDataset& real_test,
    const ClassifierConfig& cfg, const TrainingPolicy& policy) {
  if (real_test.provenance != data::Provenance::real ||
      real_train.provenance != data::Provenance::real)
    throw std::invalid_argument("sweep baseline needs real train and test sets");

  std::vector<SweepRow> rows;
  auto run_row = [&](const std::string& stage, const data::LabeledDataset& train,
                     bool baseline) {
    TrainingPolicy p = policy;
    p.seed = nn::derive_seed(policy.seed, 0x73776570ULL, rows.size());
    ResNetClassifier model(cfg, p.seed);
    const TrainResult res = train_classifier(model, p, train);
    SweepRow row;
    row.report.dataset = real_test.meta.count("name") ? real_test.meta.at("name") : "dataset";
    row.report.stage = stage;
    row.report.epochs_run = res.epochs_run;
    row.report.accuracy = baseline ? classifier_accuracy(model, real_test)
                                   : compute_cas(model, res.train_provenance, real_test);
    row.is_baseline = baseline;
    rows.push_back(std::move(row));
  };

  run_row("Real", real_train, true);
  for (const auto& [stage, ds] : datasets) {
    if (ds->provenance != data::Provenance::synthetic)
      throw std::invalid_argument("sweep dataset " + stage + " must be synthetic");
    run_row(stage, *ds, false);
  }

  const double baseline_acc = rows.front().report.accuracy;
  SweepRow* best = nullptr;
  for (size_t i = 1; i < rows.size(); ++i) {
    rows[i].beats_baseline = rows[i].report.accuracy > baseline_acc;
    if (!best || rows[i].report.accuracy > best->report.accuracy) best = &rows[i];
  }
  if (best) best->is_best_synthetic = true;
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("no sweep rows");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sweep csv: " + path);
  out << "Dataset";
  for (const auto& r : rows) out << "," << r.report.stage;
  out << "\n" << rows.front().report.dataset;
  for (const auto& r : rows) out << "," << r.report.accuracy;
  out << "\n";
}

}  // namespace casgen::eval
