#include "casgen/pipeline/pipeline.hpp"

#include "casgen/hpo/fanova.hpp"
#include "casgen/pipeline/report.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace casgen::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json params_to_json(const diffusion::SamplerParams& p) {
  return {{"is", p.inference_steps},
          {"ugs", p.guidance_scale},
          {"epoch", p.epoch},
          {"seed", p.seed}};
}

diffusion::SamplerParams params_from_json(const json& j) {
  diffusion::SamplerParams p;
  p.inference_steps = j.at("is").get<int>();
  p.guidance_scale = j.at("ugs").get<double>();
  p.epoch = j.at("epoch").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

json stage_to_json(const StageResult& r) {
  return {{"stage", r.stage},
          {"best", params_to_json(r.best)},
          {"cas", r.cas},
          {"generation_seconds", r.generation_seconds},
          {"denoiser_evals", r.denoiser_evals},
          {"checkpoint", r.checkpoint}};
}

StageResult stage_from_json(const json& j) {
  StageResult r;
  r.stage = j.at("stage").get<int>();
  r.best = params_from_json(j.at("best"));
  r.cas = j.at("cas").get<double>();
  r.generation_seconds = j.at("generation_seconds").get<double>();
  r.denoiser_evals = j.at("denoiser_evals").get<long long>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  return r;
}

void write_marker(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write marker: " + path);
  out << j.dump(2) << "\n";
}

json read_marker(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read marker: " + path);
  json j;
  in >> j;
  return j;
}

void load_component(diffusion::DiffusionModel& model, diffusion::Component c,
                    const std::string& path) {
  diffusion::load_checkpoint(path, model.component_params(c));
}

void maybe_write_importance(const hpo::Study& study, std::uint64_t seed, int stage,
                            const std::string& path) {
  const auto completed = study.completed_trials();
  if (static_cast<int>(completed.size()) <
      2 * static_cast<int>(study.space().params.size()))
    return;  // too few completed trials for a meaningful decomposition
  hpo::FanovaSettings settings;
  settings.seed = seed;
  const auto report = hpo::fanova_importance(study.space(), completed, settings,
                                             "stage" + std::to_string(stage));
  report.write_csv(path);
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg_in, const std::string& backbone_ckpt,
                            const data::LabeledDataset& real_train,
                            const data::LabeledDataset& real_test, const std::string& run_dir,
                            bool resume) {
  if (real_train.num_classes != real_test.num_classes)
    throw std::invalid_argument("train/test class-count mismatch");
  PipelineConfig cfg = cfg_in;
  cfg.classifier.num_classes = real_train.num_classes;
  cfg.classifier.resolution = cfg.resolution;
  cfg.classifier.input_channels = cfg.denoiser.in_channels;
  cfg.validate();

  const int num_classes = real_train.num_classes;
  diffusion::DiffusionModel model(cfg.denoiser, num_classes, cfg.resolution, cfg.seed,
                                  diffusion::build_schedule(cfg.schedule_steps, cfg.beta_start,
                                                            cfg.beta_end));
  PipelineResult result;
  fs::create_directories(run_dir);
  for (int s = 1; s <= 4; ++s) fs::create_directories(run_dir + "/stage" + std::to_string(s));
  fs::create_directories(run_dir + "/final");

  const auto stage_dir = [&](int s) { return run_dir + "/stage" + std::to_string(s); };
  const auto marker = [&](const std::string& dir) { return dir + "/complete.json"; };
  const auto done = [&](const std::string& dir) {
    return resume && fs::exists(marker(dir));
  };

  // ---- Stage 1: Class-Encoder transfer learning --------------------------
  CheckpointRegistry reg1;
  StageResult after1;
  if (done(stage_dir(1))) {
    reg1 = CheckpointRegistry::load(stage_dir(1) + "/registry.txt");
    after1 = stage_from_json(read_marker(marker(stage_dir(1))).at("after"));
    load_component(model, diffusion::Component::denoiser, backbone_ckpt);
    load_component(model, diffusion::Component::class_encoder,
                   reg1.resolve(diffusion::Component::class_encoder, cfg.stage1.epochs));
  } else {
    reg1 = stage1_transfer_learning(cfg, model, backbone_ckpt, real_train, stage_dir(1));
    diffusion::SamplerParams initial;
    initial.inference_steps = cfg.is_upper;
    initial.guidance_scale = cfg.initial_guidance_scale;
    initial.epoch = cfg.stage1.epochs;
    after1 = evaluate_stage(1, cfg, model, initial, real_test, cfg.seed);
    after1.checkpoint = reg1.resolve(diffusion::Component::class_encoder, cfg.stage1.epochs);
    reg1.save(stage_dir(1) + "/registry.txt");
    write_marker(marker(stage_dir(1)), {{"after", stage_to_json(after1)}});
  }
  result.stages.push_back(after1);

  // ---- Stage 2: HPO over the stage-1 encoder checkpoints ------------------
  StageResult after2;
  if (done(stage_dir(2))) {
    const auto j = read_marker(marker(stage_dir(2)));
    after2 = stage_from_json(j.at("after"));
    result.stage2_best = params_from_json(j.at("best"));
  } else {
    auto outcome = run_hpo_stage(2, cfg, model, cfg.stage2_space(), reg1,
                                 diffusion::Component::class_encoder, real_test,
                                 cfg.hpo_iterations, stage_dir(2));
    maybe_write_importance(outcome.study, cfg.seed, 2, stage_dir(2) + "/importance.csv");
    result.stage2_best = outcome.result.best;
    load_component(model, diffusion::Component::class_encoder,
                   reg1.resolve(diffusion::Component::class_encoder, result.stage2_best.epoch));
    after2 = evaluate_stage(2, cfg, model, result.stage2_best, real_test, cfg.seed);
    after2.checkpoint = outcome.result.checkpoint;
    write_marker(marker(stage_dir(2)),
                 {{"after", stage_to_json(after2)}, {"best", params_to_json(result.stage2_best)}});
  }
  result.stages.push_back(after2);

  // ---- Stage 3: denoiser fine-tuning with the frozen best encoder ---------
  CheckpointRegistry reg3;
  StageResult after3;
  if (done(stage_dir(3))) {
    reg3 = CheckpointRegistry::load(stage_dir(3) + "/registry.txt");
    after3 = stage_from_json(read_marker(marker(stage_dir(3))).at("after"));
    load_component(model, diffusion::Component::class_encoder,
                   reg1.resolve(diffusion::Component::class_encoder, result.stage2_best.epoch));
    load_component(model, diffusion::Component::denoiser,
                   reg3.resolve(diffusion::Component::denoiser, cfg.stage3.epochs));
  } else {
    load_component(model, diffusion::Component::denoiser, backbone_ckpt);
    reg3 = stage3_finetune(cfg, model, real_train, reg1, result.stage2_best.epoch, stage_dir(3));
    diffusion::SamplerParams p = result.stage2_best;
    p.epoch = cfg.stage3.epochs;
    after3 = evaluate_stage(3, cfg, model, p, real_test, cfg.seed);
    after3.checkpoint = reg3.resolve(diffusion::Component::denoiser, cfg.stage3.epochs);
    reg3.save(stage_dir(3) + "/registry.txt");
    write_marker(marker(stage_dir(3)), {{"after", stage_to_json(after3)}});
  }
  result.stages.push_back(after3);

  // ---- Stage 4: HPO over the shrunken space and fine-tune checkpoints -----
  StageResult after4;
  if (done(stage_dir(4))) {
    const auto j = read_marker(marker(stage_dir(4)));
    after4 = stage_from_json(j.at("after"));
    result.stage4_best = params_from_json(j.at("best"));
    load_component(model, diffusion::Component::denoiser,
                   reg3.resolve(diffusion::Component::denoiser, result.stage4_best.epoch));
  } else {
    const auto space4 =
        shrink_search_space(result.stage2_best, cfg.stage2_space(), cfg.stage3.epochs);
    auto outcome = run_hpo_stage(4, cfg, model, space4, reg3, diffusion::Component::denoiser,
                                 real_test, cfg.hpo_iterations, stage_dir(4));
    maybe_write_importance(outcome.study, cfg.seed, 4, stage_dir(4) + "/importance.csv");
    result.stage4_best = outcome.result.best;
    load_component(model, diffusion::Component::denoiser,
                   reg3.resolve(diffusion::Component::denoiser, result.stage4_best.epoch));
    after4 = evaluate_stage(4, cfg, model, result.stage4_best, real_test, cfg.seed);
    after4.checkpoint = outcome.result.checkpoint;
    write_marker(marker(stage_dir(4)),
                 {{"after", stage_to_json(after4)}, {"best", params_to_json(result.stage4_best)}});
  }
  result.stages.push_back(after4);

  write_table1_csv(run_dir + "/table1.csv", result.stages);

  // ---- Final: scaled datasets + sweep -------------------------------------
  const std::string final_dir = run_dir + "/final";
  if (done(final_dir)) {
    const auto j = read_marker(marker(final_dir));
    for (const auto& row : j.at("sweep")) {
      eval::SweepRow r;
      r.report.dataset = row.at("dataset").get<std::string>();
      r.report.stage = row.at("stage").get<std::string>();
      r.report.accuracy = row.at("accuracy").get<double>();
      r.report.epochs_run = row.at("epochs_run").get<int>();
      r.is_baseline = row.at("baseline").get<bool>();
      r.beats_baseline = row.at("beats_baseline").get<bool>();
      r.is_best_synthetic = row.at("best_synthetic").get<bool>();
      result.sweep.push_back(std::move(r));
    }
  } else {
    const auto real_counts = data::class_histogram(real_train);
    const auto scaled =
        generate_scaled_datasets(cfg, model, result.stage4_best, real_counts, cfg.scale_factors);
    std::vector<std::pair<std::string, const data::LabeledDataset*>> named;
    for (size_t i = 0; i < scaled.size(); ++i) {
      const std::string label = "x" + std::to_string(cfg.scale_factors[i]);
      data::save_synthetic_dataset(scaled[i], final_dir + "/scaled_" + label, true);
      named.emplace_back(label, &scaled[i]);
    }
    result.sweep =
        eval::scaling_sweep_eval(named, real_train, real_test, cfg.classifier, cfg.policy);
    eval::write_sweep_csv(final_dir + "/table2.csv", result.sweep);
    json rows = json::array();
    for (const auto& r : result.sweep)
      rows.push_back({{"dataset", r.report.dataset},
                      {"stage", r.report.stage},
                      {"accuracy", r.report.accuracy},
                      {"epochs_run", r.report.epochs_run},
                      {"baseline", r.is_baseline},
                      {"beats_baseline", r.beats_baseline},
                      {"best_synthetic", r.is_best_synthetic}});
    write_marker(marker(final_dir), {{"sweep", rows}});
  }
  return result;
}

std::string pretrain_backbone(const PipelineConfig& cfg, const data::LabeledDataset& source,
                              const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  diffusion::DiffusionModel model(cfg.denoiser, source.num_classes, cfg.resolution, cfg.seed,
                                  diffusion::build_schedule(cfg.schedule_steps, cfg.beta_start,
                                                            cfg.beta_end));
  diffusion::train_component(model, diffusion::Component::denoiser, cfg.pretrain, source,
                             out_dir);

  const auto params = const_cast<const diffusion::DiffusionModel&>(model).component_params(
      diffusion::Component::denoiser);
  diffusion::CheckpointMeta meta;
  meta.component = diffusion::Component::denoiser;
  meta.epoch = cfg.pretrain.epochs;
  std::ostringstream fp;
  fp << std::hex << diffusion::hash_params(params);
  meta.config_fingerprint = fp.str();
  meta.param_count = 0;
  for (const auto* p : params) meta.param_count += p->value.size();
  const std::string path = out_dir + "/backbone.ckpt";
  diffusion::save_checkpoint(path, params, meta);
  return path;
}

}  // namespace casgen::pipeline
