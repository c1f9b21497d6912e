#pragma once

#include "casgen/eval/cas.hpp"
#include "casgen/pipeline/stages.hpp"

#include <string>
#include <vector>

namespace casgen::pipeline {

struct PipelineResult {
  std::vector<StageResult> stages;  // "After 1." .. "After 4."
  diffusion::SamplerParams stage2_best, stage4_best;
  std::vector<eval::SweepRow> sweep;
};

/// Runs the four-stage adaptation end to end under `run_dir` with per-stage
/// completion markers; with `resume`, stages whose markers exist are skipped
/// and their persisted results reused.  Emits study journals, importance
/// CSVs, stage reports and the final scaled-dataset sweep.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& backbone_ckpt,
                            const data::LabeledDataset& real_train,
                            const data::LabeledDataset& real_test, const std::string& run_dir,
                            bool resume = false);

/// Trains the denoiser on a source dataset and writes the backbone checkpoint
/// (the toy analogue of a large-corpus pretrained model).
std::string pretrain_backbone(const PipelineConfig& cfg, const data::LabeledDataset& source,
                              const std::string& out_dir);

}  // namespace casgen::pipeline
