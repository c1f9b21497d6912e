#include "casgen/pipeline/config.hpp"

#include <stdexcept>

namespace casgen::pipeline {

void PipelineConfig::validate() const {
  if (resolution < 8 || resolution % 2 != 0)
    throw std::invalid_argument("resolution must be even and >= 8");
  if (schedule_steps < 2) throw std::invalid_argument("schedule_steps must be >= 2");
  if (hpo_iterations < 1) throw std::invalid_argument("hpo_iterations must be >= 1");
  if (eval_dataset_size < 1) throw std::invalid_argument("eval_dataset_size must be >= 1");
  if (is_lower < 1 || is_upper < is_lower || is_upper > schedule_steps)
    throw std::invalid_argument("bad IS bounds");
  if (ugs_lower < 0.0 || ugs_upper < ugs_lower) throw std::invalid_argument("bad UGS bounds");
  if (stage1.epochs < 1 || stage3.epochs < 1)
    throw std::invalid_argument("stage presets need >= 1 epoch");
  if (scale_factors.empty()) throw std::invalid_argument("scale_factors must be non-empty");
  for (int f : scale_factors)
    if (f < 1) throw std::invalid_argument("scale factors must be >= 1");
  policy.validate();
  classifier.validate();
}

hpo::SearchSpace PipelineConfig::stage2_space() const {
  hpo::SearchSpace space;
  space.params = {
      {"IS", static_cast<double>(is_lower), static_cast<double>(is_upper), true},
      {"UGS", ugs_lower, ugs_upper, false},
      {"Epoch", 1.0, static_cast<double>(stage1.epochs), true},
  };
  return space;
}

}  // namespace casgen::pipeline
