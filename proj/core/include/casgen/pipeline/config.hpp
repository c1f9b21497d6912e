#pragma once

#include "casgen/diffusion/sampler.hpp"
#include "casgen/diffusion/train.hpp"
#include "casgen/diffusion/unet.hpp"
#include "casgen/eval/classifier.hpp"
#include "casgen/eval/resnet.hpp"
#include "casgen/hpo/space.hpp"
#include "casgen/hpo/study.hpp"

#include <string>
#include <vector>

namespace casgen::pipeline {

struct PipelineConfig {
  int resolution = 32;
  int schedule_steps = diffusion::kDefaultT;
  double beta_start = diffusion::kDefaultBetaStart;
  double beta_end = diffusion::kDefaultBetaEnd;

  diffusion::DenoiserSpec denoiser;
  diffusion::TrainConfig stage1 = diffusion::stage1_preset();
  diffusion::TrainConfig stage3 = diffusion::stage3_preset();
  diffusion::TrainConfig pretrain = diffusion::stage1_preset();  // denoiser pretraining

  int hpo_iterations = 50;
  long eval_dataset_size = 4000;
  int is_lower = 5, is_upper = 50;
  double ugs_lower = 0.0, ugs_upper = 7.5;
  double initial_guidance_scale = 7.5;  // "After 1." evaluation default

  eval::ClassifierConfig classifier;
  eval::TrainingPolicy policy;
  hpo::TpeSettings tpe;

  std::vector<int> scale_factors = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t seed = 0;

  void validate() const;
  /// Stage-2 search space: IS, UGS, Epoch over the stage-1 checkpoints.
  hpo::SearchSpace stage2_space() const;
};

}  // namespace casgen::pipeline
