#pragma once

#include "casgen/data/image.hpp"

#include <map>
#include <string>
#include <vector>

namespace casgen::data {

enum class Split { train, test };
enum class Provenance { real, synthetic };

std::string to_string(Split s);
std::string to_string(Provenance p);
Split split_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

struct ClassDistribution {
  std::vector<long> counts;

  long total() const;
};

/// Images with integer class labels. Items keep a deterministic order.
struct LabeledDataset {
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  int num_classes = 0;
  Split split = Split::train;
  Provenance provenance = Provenance::real;
  std::vector<std::string> class_names;
  /// Free-form manifest metadata (e.g. sampler parameters for synthetics).
  std::map<std::string, std::string> meta;

  size_t size() const { return images.size(); }
};

/// Order-independent per-class histogram.
ClassDistribution class_histogram(const LabeledDataset& ds);

struct PreprocessConfig {
  int target_resolution = 128;  // desk-scale runs override this
  // Interpolation is fixed bilinear; value range fixed [-1,1].

  void validate() const;  // target_resolution >= 8 and even
};

/// Splits n_total across classes. Uniform mode (dist empty, num_classes set):
/// largest-remainder with equal weights; proportional mode: largest-remainder
/// of n_total * dist_i / sum(dist). Ties broken by ascending class id.
ClassDistribution stratified_counts(long n_total, const ClassDistribution& dist);
ClassDistribution stratified_counts_uniform(long n_total, int num_classes);

/// Loads `<root>/<class_name>/<index>.png` + `<root>/manifest`, preprocessing
/// eagerly (bilinear resize to cfg resolution, then normalization to [-1,1]).
/// Class ids follow the manifest's class ordering; item order is lexicographic
/// by path.
LabeledDataset load_dataset(const std::string& root, const PreprocessConfig& cfg);

/// Writes per-class PNG directories plus a key-value manifest. Images are
/// de-normalized to [0,255]. Fails on an existing non-empty directory unless
/// `overwrite`.
void save_dataset(const LabeledDataset& ds, const std::string& root, bool overwrite = false);

/// save_dataset with the synthetic-provenance precondition enforced.
void save_synthetic_dataset(const LabeledDataset& ds, const std::string& root,
                            bool overwrite = false);

std::map<std::string, std::string> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::map<std::string, std::string>& kv,
                    const std::vector<std::string>& key_order = {});

}  // namespace casgen::data
