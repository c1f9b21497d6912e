#include "casgen/data/toy.hpp"
#include "casgen/eval/cas.hpp"
#include "casgen/pipeline/pipeline.hpp"
#include "casgen/pipeline/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace casgen;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

/// Either an on-disk dataset root or a toy-generator spec.
struct DatasetSpec {
  std::string path;
  std::optional<data::ToySpec> toy;
  int toy_test_per_class = 0;

  /// Stable identity string used to check source != target for pretraining.
  std::string identity() const {
    if (toy)
      return "toy:" + std::to_string(toy->variant) + ":" + std::to_string(toy->seed) + ":" +
             std::to_string(toy->num_classes);
    return "path:" + fs::weakly_canonical(path).string();
  }
};

DatasetSpec parse_dataset(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"path", "toy"}, where);
  DatasetSpec spec;
  if (j.contains("path") == j.contains("toy"))
    throw ConfigError(where + " needs exactly one of 'path' or 'toy'");
  if (j.contains("path")) {
    spec.path = j.at("path").get<std::string>();
    return spec;
  }
  const json& t = j.at("toy");
  reject_unknown_keys(
      t, {"classes", "per_class", "test_per_class", "resolution", "seed", "variant"},
      where + ".toy");
  data::ToySpec toy;
  maybe(t, "classes", toy.num_classes);
  maybe(t, "per_class", toy.per_class);
  maybe(t, "resolution", toy.resolution);
  maybe(t, "seed", toy.seed);
  maybe(t, "variant", toy.variant);
  spec.toy = toy;
  spec.toy_test_per_class = t.value("test_per_class", std::max(1, toy.per_class / 5));
  return spec;
}

data::LabeledDataset load_split(const DatasetSpec& spec, data::Split split, int resolution) {
  if (spec.toy) {
    data::ToySpec t = *spec.toy;
    t.split = split;
    t.resolution = resolution;
    if (split == data::Split::test) t.per_class = spec.toy_test_per_class;
    return data::make_toy_dataset(t);
  }
  data::PreprocessConfig pp;
  pp.target_resolution = resolution;
  const std::string root =
      spec.path + "/" + (split == data::Split::train ? "train" : "test");
  return data::load_dataset(root, pp);
}

void parse_train_config(const json& j, diffusion::TrainConfig& cfg, const std::string& where) {
  reject_unknown_keys(
      j, {"epochs", "batch_size", "lr", "weight_decay", "clip_norm", "uncond_prob"}, where);
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "batch_size", cfg.batch_size);
  maybe(j, "lr", cfg.lr);
  maybe(j, "weight_decay", cfg.weight_decay);
  maybe(j, "clip_norm", cfg.clip_norm);
  maybe(j, "uncond_prob", cfg.uncond_prob);
}

pipeline::PipelineConfig parse_pipeline(const json& j) {
  pipeline::PipelineConfig cfg;
  reject_unknown_keys(j,
                      {"resolution", "schedule_steps", "beta_start", "beta_end", "denoiser",
                       "stage1", "stage3", "pretrain", "hpo_iterations", "eval_dataset_size",
                       "is_lower", "is_upper", "ugs_lower", "ugs_upper",
                       "initial_guidance_scale", "classifier", "policy", "tpe",
                       "scale_factors"},
                      "pipeline");
  maybe(j, "resolution", cfg.resolution);
  maybe(j, "schedule_steps", cfg.schedule_steps);
  maybe(j, "beta_start", cfg.beta_start);
  maybe(j, "beta_end", cfg.beta_end);
  if (j.contains("denoiser")) {
    const json& d = j.at("denoiser");
    reject_unknown_keys(d, {"base_width", "levels", "time_dim", "d_cond", "groups"},
                        "pipeline.denoiser");
    maybe(d, "base_width", cfg.denoiser.base_width);
    maybe(d, "levels", cfg.denoiser.levels);
    maybe(d, "time_dim", cfg.denoiser.time_dim);
    maybe(d, "d_cond", cfg.denoiser.d_cond);
    maybe(d, "groups", cfg.denoiser.groups);
  }
  if (j.contains("stage1")) parse_train_config(j.at("stage1"), cfg.stage1, "pipeline.stage1");
  if (j.contains("stage3")) parse_train_config(j.at("stage3"), cfg.stage3, "pipeline.stage3");
  if (j.contains("pretrain"))
    parse_train_config(j.at("pretrain"), cfg.pretrain, "pipeline.pretrain");
  maybe(j, "hpo_iterations", cfg.hpo_iterations);
  maybe(j, "eval_dataset_size", cfg.eval_dataset_size);
  maybe(j, "is_lower", cfg.is_lower);
  maybe(j, "is_upper", cfg.is_upper);
  maybe(j, "ugs_lower", cfg.ugs_lower);
  maybe(j, "ugs_upper", cfg.ugs_upper);
  maybe(j, "initial_guidance_scale", cfg.initial_guidance_scale);
  if (j.contains("classifier")) {
    const json& c = j.at("classifier");
    reject_unknown_keys(c, {"base_width", "blocks_per_stage"}, "pipeline.classifier");
    maybe(c, "base_width", cfg.classifier.base_width);
    maybe(c, "blocks_per_stage", cfg.classifier.blocks_per_stage);
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    reject_unknown_keys(p,
                        {"epochs", "lr", "label_smoothing", "batch_size", "plateau_patience",
                         "plateau_factor", "early_stop_patience", "val_fraction"},
                        "pipeline.policy");
    maybe(p, "epochs", cfg.policy.epochs);
    maybe(p, "lr", cfg.policy.lr);
    maybe(p, "label_smoothing", cfg.policy.label_smoothing);
    maybe(p, "batch_size", cfg.policy.batch_size);
    maybe(p, "plateau_patience", cfg.policy.plateau_patience);
    maybe(p, "plateau_factor", cfg.policy.plateau_factor);
    maybe(p, "early_stop_patience", cfg.policy.early_stop_patience);
    maybe(p, "val_fraction", cfg.policy.val_fraction);
  }
  if (j.contains("tpe")) {
    const json& t = j.at("tpe");
    reject_unknown_keys(t, {"n_startup", "gamma", "n_candidates"}, "pipeline.tpe");
    maybe(t, "n_startup", cfg.tpe.n_startup);
    maybe(t, "gamma", cfg.tpe.gamma);
    maybe(t, "n_candidates", cfg.tpe.n_candidates);
  }
  maybe(j, "scale_factors", cfg.scale_factors);
  return cfg;
}

struct RunConfig {
  std::string name = "run";
  std::string out;
  std::uint64_t seed = 0;
  std::optional<DatasetSpec> dataset, source_dataset;
  std::string backbone;
  pipeline::PipelineConfig pipeline;
  json raw;  // untouched sections for subcommand-specific keys
};

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"name", "out", "seed", "dataset", "source_dataset", "backbone",
                       "pipeline", "generate", "evaluate", "sweep"},
                      "config");
  RunConfig cfg;
  cfg.raw = j;
  maybe(j, "name", cfg.name);
  maybe(j, "out", cfg.out);
  maybe(j, "seed", cfg.seed);
  if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"), "dataset");
  if (j.contains("source_dataset"))
    cfg.source_dataset = parse_dataset(j.at("source_dataset"), "source_dataset");
  maybe(j, "backbone", cfg.backbone);
  if (j.contains("pipeline")) cfg.pipeline = parse_pipeline(j.at("pipeline"));
  cfg.pipeline.seed = cfg.seed;
  try {
    cfg.pipeline.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid pipeline config: ") + e.what());
  }
  return cfg;
}

const DatasetSpec& require_dataset(const RunConfig& cfg) {
  if (!cfg.dataset) throw ConfigError("config has no 'dataset'");
  return *cfg.dataset;
}

std::string require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("config has no 'out' directory");
  return cfg.out;
}

diffusion::DiffusionModel build_model(const RunConfig& cfg, int num_classes) {
  return diffusion::DiffusionModel(
      cfg.pipeline.denoiser, num_classes, cfg.pipeline.resolution, cfg.seed,
      diffusion::build_schedule(cfg.pipeline.schedule_steps, cfg.pipeline.beta_start,
                                cfg.pipeline.beta_end));
}

int cmd_pretrain(const RunConfig& cfg) {
  if (!cfg.source_dataset) throw ConfigError("pretrain needs 'source_dataset'");
  if (cfg.dataset && cfg.source_dataset->identity() == cfg.dataset->identity())
    throw ConfigError("source dataset must be distinct from the target dataset");
  const auto source =
      load_split(*cfg.source_dataset, data::Split::train, cfg.pipeline.resolution);
  const std::string path = pipeline::pretrain_backbone(cfg.pipeline, source, require_out(cfg));
  std::cout << "backbone: " << path << "\n";
  return 0;
}

int cmd_adapt(const RunConfig& cfg, bool resume) {
  if (cfg.backbone.empty()) throw ConfigError("adapt needs 'backbone'");
  if (!fs::exists(cfg.backbone))
    throw ConfigError("backbone checkpoint does not exist: " + cfg.backbone);
  const auto& spec = require_dataset(cfg);
  const auto train = load_split(spec, data::Split::train, cfg.pipeline.resolution);
  const auto test = load_split(spec, data::Split::test, cfg.pipeline.resolution);
  const std::string run_dir = require_out(cfg) + "/runs/" + cfg.name;
  const auto result =
      pipeline::run_pipeline(cfg.pipeline, cfg.backbone, train, test, run_dir, resume);
  for (const auto& s : result.stages)
    std::cout << "After " << s.stage << ". CAS " << s.cas << " gen " << s.generation_seconds
              << "s evals " << s.denoiser_evals << "\n";
  std::cout << "run: " << run_dir << "\n";
  return 0;
}

int cmd_generate(const RunConfig& cfg) {
  if (!cfg.raw.contains("generate")) throw ConfigError("config has no 'generate' section");
  const json& g = cfg.raw.at("generate");
  reject_unknown_keys(
      g, {"n", "is", "ugs", "epoch", "encoder_checkpoint", "denoiser_checkpoint"}, "generate");
  const auto& spec = require_dataset(cfg);
  const auto train = load_split(spec, data::Split::train, cfg.pipeline.resolution);
  auto model = build_model(cfg, train.num_classes);
  if (g.contains("denoiser_checkpoint"))
    diffusion::load_checkpoint(g.at("denoiser_checkpoint").get<std::string>(),
                               model.component_params(diffusion::Component::denoiser));
  if (g.contains("encoder_checkpoint"))
    diffusion::load_checkpoint(g.at("encoder_checkpoint").get<std::string>(),
                               model.component_params(diffusion::Component::class_encoder));
  diffusion::SamplerParams params;
  params.inference_steps = g.value("is", cfg.pipeline.is_upper);
  params.guidance_scale = g.value("ugs", cfg.pipeline.initial_guidance_scale);
  params.epoch = g.value("epoch", 1);
  params.seed = cfg.seed;
  const long n = g.value("n", cfg.pipeline.eval_dataset_size);
  if (n < 1) throw ConfigError("generate.n must be >= 1");

  diffusion::UNetEpsilonModel eps(model.unet, model.sched.T, cfg.pipeline.resolution);
  const auto counts = data::stratified_counts_uniform(n, train.num_classes);
  diffusion::SampleStats stats;
  auto ds = diffusion::sample_batch(eps, model.encoder, model.sched, counts, params, &stats);
  ds.class_names = train.class_names;
  data::save_synthetic_dataset(ds, require_out(cfg), true);
  std::cout << "generated " << ds.size() << " images, " << stats.denoiser_evals.load()
            << " denoiser evals -> " << cfg.out << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (!cfg.raw.contains("evaluate")) throw ConfigError("config has no 'evaluate' section");
  const json& e = cfg.raw.at("evaluate");
  reject_unknown_keys(e, {"synthetic"}, "evaluate");
  if (!e.contains("synthetic")) throw ConfigError("evaluate needs 'synthetic' dataset root");
  data::PreprocessConfig pp;
  pp.target_resolution = cfg.pipeline.resolution;
  const auto synthetic = data::load_dataset(e.at("synthetic").get<std::string>(), pp);
  const auto test =
      load_split(require_dataset(cfg), data::Split::test, cfg.pipeline.resolution);

  eval::TrainingPolicy policy = cfg.pipeline.policy;
  policy.seed = cfg.seed;
  eval::ClassifierConfig ccfg = cfg.pipeline.classifier;
  ccfg.num_classes = synthetic.num_classes;
  ccfg.resolution = cfg.pipeline.resolution;
  ccfg.input_channels = cfg.pipeline.denoiser.in_channels;
  eval::ResNetClassifier clf(ccfg, cfg.seed);
  const auto trained = eval::train_classifier(clf, policy, synthetic);
  const double cas = eval::compute_cas(clf, trained.train_provenance, test);
  std::cout << "CAS " << cas << " after " << trained.epochs_run << " epochs\n";
  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    std::ofstream out(cfg.out + "/cas.csv");
    out << "CAS,EpochsRun\n" << cas << "," << trained.epochs_run << "\n";
    eval::write_history_csv(cfg.out + "/history.csv", trained.history);
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  if (!cfg.raw.contains("sweep")) throw ConfigError("config has no 'sweep' section");
  const json& s = cfg.raw.at("sweep");
  reject_unknown_keys(s, {"is", "ugs", "encoder_checkpoint", "denoiser_checkpoint"}, "sweep");
  const auto& spec = require_dataset(cfg);
  const auto train = load_split(spec, data::Split::train, cfg.pipeline.resolution);
  const auto test = load_split(spec, data::Split::test, cfg.pipeline.resolution);
  auto model = build_model(cfg, train.num_classes);
  if (s.contains("denoiser_checkpoint"))
    diffusion::load_checkpoint(s.at("denoiser_checkpoint").get<std::string>(),
                               model.component_params(diffusion::Component::denoiser));
  if (s.contains("encoder_checkpoint"))
    diffusion::load_checkpoint(s.at("encoder_checkpoint").get<std::string>(),
                               model.component_params(diffusion::Component::class_encoder));
  diffusion::SamplerParams params;
  params.inference_steps = s.value("is", cfg.pipeline.is_lower);
  params.guidance_scale = s.value("ugs", 0.0);
  params.seed = cfg.seed;

  const std::string out = require_out(cfg);
  fs::create_directories(out);
  const auto counts = data::class_histogram(train);
  const auto scaled = pipeline::generate_scaled_datasets(cfg.pipeline, model, params, counts,
                                                         cfg.pipeline.scale_factors);
  std::vector<std::pair<std::string, const data::LabeledDataset*>> named;
  for (size_t i = 0; i < scaled.size(); ++i)
    named.emplace_back("x" + std::to_string(cfg.pipeline.scale_factors[i]), &scaled[i]);
  eval::TrainingPolicy policy = cfg.pipeline.policy;
  policy.seed = cfg.seed;
  eval::ClassifierConfig ccfg = cfg.pipeline.classifier;
  ccfg.num_classes = train.num_classes;
  ccfg.resolution = cfg.pipeline.resolution;
  ccfg.input_channels = cfg.pipeline.denoiser.in_channels;
  const auto rows = eval::scaling_sweep_eval(named, train, test, ccfg, policy);
  eval::write_sweep_csv(out + "/table2.csv", rows);
  for (const auto& r : rows)
    std::cout << r.report.stage << " " << r.report.accuracy
              << (r.is_best_synthetic ? " (best synthetic)" : "") << "\n";
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const std::string run_dir = require_out(cfg) + "/runs/" + cfg.name;
  std::vector<std::string> missing;
  for (const char* artifact : {"/table1.csv", "/final/table2.csv"})
    if (!fs::exists(run_dir + artifact)) missing.push_back(run_dir + artifact);
  if (!missing.empty()) {
    std::string msg = "incomplete run, missing:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  const auto reports = pipeline::load_run_importance(run_dir);
  pipeline::write_importance_csv(run_dir + "/importance.csv", reports);
  pipeline::write_importance_chart(run_dir + "/importance.svg", reports);
  std::cout << "report: " << run_dir << "/table1.csv " << run_dir << "/final/table2.csv "
            << run_dir << "/importance.csv " << run_dir << "/importance.svg\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-conditional diffusion adaptation pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  std::optional<std::uint64_t> seed_override;
  bool resume = false;
  app.add_option("--config", config_path, "Run configuration JSON file");
  app.add_option("--seed", seed_override, "Override the config seed");
  app.add_option("--out", out_override, "Override the config output directory");
  app.add_flag("--resume", resume, "Resume from existing stage markers");

  for (const char* name : {"pretrain", "adapt", "generate", "evaluate", "sweep", "report"})
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (config_path.empty()) throw ConfigError("--config is required");
    RunConfig cfg = load_config(config_path);
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.pipeline.seed = *seed_override;
    }
    if (!out_override.empty()) cfg.out = out_override;

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "pretrain") return cmd_pretrain(cfg);
    if (cmd == "adapt") return cmd_adapt(cfg, resume);
    if (cmd == "generate") return cmd_generate(cfg);
    if (cmd == "evaluate") return cmd_evaluate(cfg);
    if (cmd == "sweep") return cmd_sweep(cfg);
    if (cmd == "report") return cmd_report(cfg);
    throw ConfigError("unknown command: " + cmd);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}
