#pragma once

#include "casgen/pipeline/config.hpp"
#include "casgen/pipeline/registry.hpp"

#include <string>
#include <vector>

namespace casgen::pipeline {

struct StageResult {
  int stage = 0;  // 1..4
  diffusion::SamplerParams best;
  double cas = 0.0;
  double generation_seconds = 0.0;
  long long denoiser_evals = 0;
  std::string checkpoint;
};

/// Stage 1: transfer-learn the Class-Encoder on the target dataset against a
/// frozen pretrained backbone; registers one encoder checkpoint per epoch.
CheckpointRegistry stage1_transfer_learning(const PipelineConfig& cfg,
                                            diffusion::DiffusionModel& model,
                                            const std::string& backbone_ckpt,
                                            const data::LabeledDataset& train,
                                            const std::string& out_dir);

/// Generates a fresh evaluation dataset with `params` (uniform class counts of
/// cfg.eval_dataset_size), trains the evaluation classifier and computes CAS;
/// generation is wall-clock timed.
StageResult evaluate_stage(int stage, const PipelineConfig& cfg, diffusion::DiffusionModel& model,
                           const diffusion::SamplerParams& params,
                           const data::LabeledDataset& real_test, std::uint64_t seed);

struct HpoStageOutcome {
  StageResult result;
  hpo::Study study;
};

/// Stages 2 and 4: `budget` trials of (IS, UGS, Epoch) suggested by TPE with
/// Hyperband pruning on per-epoch validation accuracy; Epoch selects a
/// checkpoint of `epoch_component` from `registry`.  Failed trials score 0.
HpoStageOutcome run_hpo_stage(int stage, const PipelineConfig& cfg,
                              diffusion::DiffusionModel& model, const hpo::SearchSpace& space,
                              const CheckpointRegistry& registry,
                              diffusion::Component epoch_component,
                              const data::LabeledDataset& real_test, int budget,
                              const std::string& out_dir);

/// Stage-4 bounds from the stage-2 optimum: IS in [lower, IS*],
/// UGS in [0, 2*UGS*], Epoch over the fine-tune checkpoints.
hpo::SearchSpace shrink_search_space(const diffusion::SamplerParams& step2_best,
                                     const hpo::SearchSpace& original, int finetune_epochs);

/// Stage 3: fine-tune the denoiser with the stage-2 best Class-Encoder
/// checkpoint loaded and frozen; registers one denoiser checkpoint per epoch.
CheckpointRegistry stage3_finetune(const PipelineConfig& cfg, diffusion::DiffusionModel& model,
                                   const data::LabeledDataset& train,
                                   const CheckpointRegistry& stage1_registry, int best_epoch,
                                   const std::string& out_dir);

/// One synthetic dataset per factor k with per-class counts exactly k times
/// the real counts, sampled with `params`-derived per-image seeds.
std::vector<data::LabeledDataset> generate_scaled_datasets(
    const PipelineConfig& cfg, diffusion::DiffusionModel& model,
    const diffusion::SamplerParams& params, const data::ClassDistribution& real_counts,
    const std::vector<int>& factors);

}  // namespace casgen::pipeline
