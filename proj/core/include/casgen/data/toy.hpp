#pragma once

#include "casgen/data/dataset.hpp"

#include <cstdint>

namespace casgen::data {

/// Parametric colored-shapes dataset generator. `variant` selects a shape and
/// palette family so that a source (pretraining) dataset can be made distinct
/// from the target dataset.
struct ToySpec {
  int num_classes = 3;
  int per_class = 100;
  std::vector<long> counts;  // optional explicit per-class counts, overrides per_class
  int resolution = 32;
  std::uint64_t seed = 0;
  int variant = 0;
  Split split = Split::train;
};

LabeledDataset make_toy_dataset(const ToySpec& spec);

}  // namespace casgen::data
