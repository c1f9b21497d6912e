#include "casgen/pipeline/stages.hpp"

#include "casgen/eval/cas.hpp"
#include "casgen/hpo/tpe.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace casgen::pipeline {
namespace {

namespace fs = std::filesystem;

diffusion::SamplerParams assignment_to_params(const hpo::SearchSpace& space,
                                              const hpo::Assignment& a, std::uint64_t seed) {
  diffusion::SamplerParams p;
  p.inference_steps = static_cast<int>(a[space.index_of("IS")]);
  p.guidance_scale = a[space.index_of("UGS")];
  p.epoch = static_cast<int>(a[space.index_of("Epoch")]);
  p.seed = seed;
  return p;
}

/// Generates the evaluation dataset for one parameter point, timed.
data::LabeledDataset generate_eval_dataset(const PipelineConfig& cfg,
                                           diffusion::DiffusionModel& model,
                                           const diffusion::SamplerParams& params,
                                           eval::GenerationTiming& timing) {
  const auto counts =
      data::stratified_counts_uniform(cfg.eval_dataset_size, model.encoder.num_classes());
  diffusion::UNetEpsilonModel eps(model.unet, model.sched.T, cfg.resolution);
  data::LabeledDataset ds;
  timing = eval::measure_generation_time(
      [&]() {
        diffusion::SampleStats stats;
        ds = diffusion::sample_batch(eps, model.encoder, model.sched, counts, params, &stats);
        return stats.denoiser_evals.load();
      },
      cfg.eval_dataset_size);
  return ds;
}

void load_component(diffusion::DiffusionModel& model, diffusion::Component c,
                    const std::string& path) {
  diffusion::load_checkpoint(path, model.component_params(c));
}

}  // namespace

CheckpointRegistry stage1_transfer_learning(const PipelineConfig& cfg,
                                            diffusion::DiffusionModel& model,
                                            const std::string& backbone_ckpt,
                                            const data::LabeledDataset& train,
                                            const std::string& out_dir) {
  if (!fs::exists(backbone_ckpt))
    throw std::runtime_error("missing pretrained backbone checkpoint: " + backbone_ckpt);
  load_component(model, diffusion::Component::denoiser, backbone_ckpt);
  const auto backbone_before = diffusion::hash_params(
      const_cast<const diffusion::DiffusionModel&>(model).component_params(
          diffusion::Component::denoiser));

  fs::create_directories(out_dir);
  const auto records =
      diffusion::train_component(model, diffusion::Component::class_encoder, cfg.stage1, train,
                                 out_dir);

  const auto backbone_after = diffusion::hash_params(
      const_cast<const diffusion::DiffusionModel&>(model).component_params(
          diffusion::Component::denoiser));
  if (backbone_before != backbone_after)
    throw std::logic_error("backbone changed during class-encoder transfer learning");

  CheckpointRegistry reg;
  for (const auto& r : records)
    reg.add(diffusion::Component::class_encoder, r.epoch, r.checkpoint_path, "stage1");
  return reg;
}

StageResult evaluate_stage(int stage, const PipelineConfig& cfg, diffusion::DiffusionModel& model,
                           const diffusion::SamplerParams& params,
                           const data::LabeledDataset& real_test, std::uint64_t seed) {
  eval::GenerationTiming timing;
  diffusion::SamplerParams p = params;
  p.seed = nn::derive_seed(seed, 0x6576616cULL, stage);
  const auto synthetic = generate_eval_dataset(cfg, model, p, timing);

  eval::TrainingPolicy policy = cfg.policy;
  policy.seed = nn::derive_seed(seed, 0x636c6673ULL, stage);
  eval::ResNetClassifier clf(cfg.classifier, policy.seed);
  const auto trained = eval::train_classifier(clf, policy, synthetic);

  StageResult res;
  res.stage = stage;
  res.best = params;
  res.cas = eval::compute_cas(clf, trained.train_provenance, real_test);
  res.generation_seconds = timing.seconds;
  res.denoiser_evals = timing.denoiser_evals;
  return res;
}

HpoStageOutcome run_hpo_stage(int stage, const PipelineConfig& cfg,
                              diffusion::DiffusionModel& model, const hpo::SearchSpace& space,
                              const CheckpointRegistry& registry,
                              diffusion::Component epoch_component,
                              const data::LabeledDataset& real_test, int budget,
                              const std::string& out_dir) {
  if (budget < 1) throw std::invalid_argument("HPO budget must be >= 1");
  const int max_epoch = static_cast<int>(space.params[space.index_of("Epoch")].upper);
  for (int e = 1; e <= max_epoch; ++e)
    if (!registry.has(epoch_component, e))
      throw std::runtime_error("registry cannot resolve epoch " + std::to_string(e));

  fs::create_directories(out_dir);
  hpo::HyperbandSettings hb{3, 1, cfg.policy.epochs};
  hpo::Study study(space, nn::derive_seed(cfg.seed, 0x68706fULL, stage), cfg.tpe, hb,
                   out_dir + "/study.ndjson");

  std::vector<double> trial_seconds(budget, 0.0);
  std::vector<long long> trial_evals(budget, 0);
  for (int i = 0; i < budget; ++i) {
    const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(i);
    const int tid = study.begin_trial();
    const auto params = assignment_to_params(space, study.trial(tid).params, trial_seed);
    try {
      load_component(model, epoch_component, registry.resolve(epoch_component, params.epoch));
      eval::GenerationTiming timing;
      const auto synthetic = generate_eval_dataset(cfg, model, params, timing);
      trial_seconds[i] = timing.seconds;
      trial_evals[i] = timing.denoiser_evals;

      eval::TrainingPolicy policy = cfg.policy;
      policy.seed = trial_seed;
      eval::ResNetClassifier clf(cfg.classifier, trial_seed);
      const auto trained = eval::train_classifier(
          clf, policy, synthetic, [&](const eval::EpochMetrics& m) {
            study.report_intermediate(tid, m.epoch, m.val_accuracy);
            // Pruning at the final epoch saves nothing; let the trial finish.
            return m.epoch >= policy.epochs || !study.should_prune(tid);
          });
      if (trained.aborted) {
        study.prune_trial(tid);
        continue;
      }
      study.complete_trial(tid, eval::compute_cas(clf, trained.train_provenance, real_test));
    } catch (const std::exception&) {
      study.fail_trial(tid);  // scored as CAS 0: never selected over a completed trial
    }
  }

  const hpo::Trial best = study.best_trial();  // throws when every trial failed
  HpoStageOutcome out{{}, std::move(study)};
  out.result.stage = stage;
  out.result.best = assignment_to_params(space, best.params, cfg.seed + best.id);
  out.result.cas = best.objective;
  out.result.generation_seconds = trial_seconds[best.id];
  out.result.denoiser_evals = trial_evals[best.id];
  out.result.checkpoint = registry.resolve(epoch_component, out.result.best.epoch);
  return out;
}

hpo::SearchSpace shrink_search_space(const diffusion::SamplerParams& step2_best,
                                     const hpo::SearchSpace& original, int finetune_epochs) {
  if (!original.contains({static_cast<double>(step2_best.inference_steps),
                          step2_best.guidance_scale, static_cast<double>(step2_best.epoch)}))
    throw std::invalid_argument("stage-2 optimum outside the original search space");
  hpo::SearchSpace shrunk = original;
  auto& is = shrunk.params[shrunk.index_of("IS")];
  is.upper = static_cast<double>(step2_best.inference_steps);
  auto& ugs = shrunk.params[shrunk.index_of("UGS")];
  ugs.lower = 0.0;
  ugs.upper = 2.0 * step2_best.guidance_scale;
  auto& ep = shrunk.params[shrunk.index_of("Epoch")];
  ep.lower = 1.0;
  ep.upper = static_cast<double>(finetune_epochs);
  shrunk.validate();
  return shrunk;
}

CheckpointRegistry stage3_finetune(const PipelineConfig& cfg, diffusion::DiffusionModel& model,
                                   const data::LabeledDataset& train,
                                   const CheckpointRegistry& stage1_registry, int best_epoch,
                                   const std::string& out_dir) {
  load_component(model, diffusion::Component::class_encoder,
                 stage1_registry.resolve(diffusion::Component::class_encoder, best_epoch));
  const auto encoder_before = diffusion::hash_params(
      const_cast<const diffusion::DiffusionModel&>(model).component_params(
          diffusion::Component::class_encoder));

  fs::create_directories(out_dir);
  const auto records =
      diffusion::train_component(model, diffusion::Component::denoiser, cfg.stage3, train,
                                 out_dir);

  const auto encoder_after = diffusion::hash_params(
      const_cast<const diffusion::DiffusionModel&>(model).component_params(
          diffusion::Component::class_encoder));
  if (encoder_before != encoder_after)
    throw std::logic_error("class encoder changed during denoiser fine-tuning");

  CheckpointRegistry reg;
  for (const auto& r : records)
    reg.add(diffusion::Component::denoiser, r.epoch, r.checkpoint_path, "stage3");
  return reg;
}

std::vector<data::LabeledDataset> generate_scaled_datasets(
    const PipelineConfig& cfg, diffusion::DiffusionModel& model,
    const diffusion::SamplerParams& params, const data::ClassDistribution& real_counts,
    const std::vector<int>& factors) {
  if (factors.empty()) throw std::invalid_argument("factors must be non-empty");
  diffusion::UNetEpsilonModel eps(model.unet, model.sched.T, cfg.resolution);
  std::vector<data::LabeledDataset> out;
  for (int k : factors) {
    if (k < 1) throw std::invalid_argument("scale factors must be >= 1");
    data::ClassDistribution counts;
    for (long c : real_counts.counts) counts.counts.push_back(c * k);
    diffusion::SamplerParams p = params;
    p.seed = nn::derive_seed(params.seed, 0x7363616cULL, k);
    auto ds = diffusion::sample_batch(eps, model.encoder, model.sched, counts, p);
    ds.meta["scale_factor"] = std::to_string(k);
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace casgen::pipeline
