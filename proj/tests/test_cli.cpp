#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

std::string g_binary;

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("casgen_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = g_binary + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p);
  f << content;
}

/// Minimal runnable configuration against the built-in toy dataset.
std::string tiny_config_json(const std::string& out, const std::string& extra_sections = "") {
  return R"({
  "name": "t",
  "out": ")" + out + R"(",
  "seed": 5,
  "dataset": {"toy": {"classes": 2, "per_class": 8, "seed": 3, "test_per_class": 4}},
  "pipeline": {
    "resolution": 8,
    "schedule_steps": 8,
    "is_lower": 1, "is_upper": 3,
    "ugs_upper": 2.0,
    "initial_guidance_scale": 1.0,
    "eval_dataset_size": 16,
    "hpo_iterations": 2,
    "denoiser": {"base_width": 4, "levels": 1, "time_dim": 8, "d_cond": 6, "groups": 2},
    "stage1": {"epochs": 1, "batch_size": 8},
    "stage3": {"epochs": 1, "batch_size": 8},
    "pretrain": {"epochs": 1, "batch_size": 8},
    "classifier": {"base_width": 4, "blocks_per_stage": 1},
    "policy": {"epochs": 2, "batch_size": 8, "val_fraction": 0.25},
    "scale_factors": [1]
  })" + extra_sections + "\n}\n";
}

}  // namespace

TEST_CASE("config errors exit with status 2 and leave no output behind") {
  const auto dir = temp_dir("errors");
  const auto log = dir / "log.txt";

  CHECK(run_cli("generate", log) == 2);  // --config is required
  CHECK(run_cli("--config " + (dir / "nope.json").string() + " generate", log) == 2);

  write_file(dir / "bad.json", "{ not json");
  CHECK(run_cli("--config " + (dir / "bad.json").string() + " generate", log) == 2);
  CHECK(slurp(log).find("config error") != std::string::npos);

  write_file(dir / "unknown.json", R"({"out": "x", "bogus_key": 1})");
  CHECK(run_cli("--config " + (dir / "unknown.json").string() + " generate", log) == 2);
  CHECK(slurp(log).find("bogus_key") != std::string::npos);

  write_file(dir / "invalid.json",
             R"({"out": "x", "pipeline": {"resolution": 9}})");
  CHECK(run_cli("--config " + (dir / "invalid.json").string() + " adapt", log) == 2);

  // A failed config must not create the run directory.
  const auto out = dir / "never";
  write_file(dir / "noval.json",
             "{\"out\": \"" + out.string() + "\", \"pipeline\": {\"is_lower\": 0}}");
  CHECK(run_cli("--config " + (dir / "noval.json").string() + " adapt", log) == 2);
  CHECK_FALSE(fs::exists(out));

  CHECK(run_cli("--config " + (dir / "bad.json").string(), log) == 2);  // no subcommand
}

TEST_CASE("report on a missing run is a runtime error (exit 3)") {
  const auto dir = temp_dir("report");
  const auto cfg = dir / "cfg.json";
  write_file(cfg, tiny_config_json((dir / "out").string()));
  const auto log = dir / "log.txt";
  CHECK(run_cli("--config " + cfg.string() + " report", log) == 3);
  CHECK(slurp(log).find("missing") != std::string::npos);
}

TEST_CASE("generate / evaluate round trip through the cli") {
  const auto dir = temp_dir("roundtrip");
  const auto log = dir / "log.txt";
  const auto gen_out = dir / "gen";

  const auto gen_cfg = dir / "gen.json";
  write_file(gen_cfg, tiny_config_json(gen_out.string(),
                                       ",\n  \"generate\": {\"n\": 10, \"is\": 2, \"ugs\": 0.5}"));
  REQUIRE(run_cli("--config " + gen_cfg.string() + " generate", log) == 0);
  CHECK(fs::exists(gen_out / "manifest"));
  int pngs = 0;
  for (const auto& e : fs::recursive_directory_iterator(gen_out))
    if (e.path().extension() == ".png") ++pngs;
  CHECK(pngs == 10);

  const auto eval_out = dir / "eval";
  const auto eval_cfg = dir / "eval.json";
  write_file(eval_cfg,
             tiny_config_json(eval_out.string(), ",\n  \"evaluate\": {\"synthetic\": \"" +
                                                     gen_out.string() + "\"}"));
  REQUIRE(run_cli("--config " + eval_cfg.string() + " evaluate", log) == 0);
  CHECK(slurp(log).find("CAS") != std::string::npos);
  CHECK(fs::exists(eval_out / "cas.csv"));
  CHECK(fs::exists(eval_out / "history.csv"));
  const auto cas_csv = slurp(eval_out / "cas.csv");
  CHECK(cas_csv.rfind("CAS,EpochsRun\n", 0) == 0);
}

TEST_CASE("generation is seed-deterministic and --seed overrides the config") {
  const auto dir = temp_dir("seed");
  const auto log = dir / "log.txt";

  auto generate_into = [&](const std::string& name, const std::string& seed_flag) {
    const auto out = dir / name;
    const auto cfg = dir / (name + ".json");
    write_file(cfg, tiny_config_json(out.string(),
                                     ",\n  \"generate\": {\"n\": 4, \"is\": 2, \"ugs\": 0.5}"));
    REQUIRE(run_cli("--config " + cfg.string() + " " + seed_flag + " generate", log) == 0);
    return out;
  };

  const auto a = generate_into("a", "");
  const auto b = generate_into("b", "");
  const auto c = generate_into("c", "--seed 99");

  auto first_png = [](const fs::path& root) {
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.path().extension() == ".png") return e.path();
    return fs::path{};
  };
  const auto pa = slurp(first_png(a)), pb = slurp(first_png(b)), pc = slurp(first_png(c));
  REQUIRE(!pa.empty());
  CHECK(pa == pb);
  CHECK(pa != pc);
}

TEST_CASE("pretraining via the cli writes a backbone checkpoint") {
  const auto dir = temp_dir("pretrain");
  const auto log = dir / "log.txt";
  const auto cfg = dir / "cfg.json";
  write_file(cfg, tiny_config_json(
                      (dir / "out").string(),
                      ",\n  \"source_dataset\": {\"toy\": {\"classes\": 2, \"per_class\": 6, "
                      "\"seed\": 9, \"variant\": 1}}"));
  REQUIRE(run_cli("--config " + cfg.string() + " pretrain", log) == 0);
  CHECK(fs::exists(dir / "out" / "backbone.ckpt"));
  CHECK(fs::exists(dir / "out" / "backbone.ckpt.meta"));

  // Source identical to the target dataset is rejected.
  const auto same = dir / "same.json";
  write_file(same, tiny_config_json(
                       (dir / "out2").string(),
                       ",\n  \"source_dataset\": {\"toy\": {\"classes\": 2, \"seed\": 3}}"));
  CHECK(run_cli("--config " + same.string() + " pretrain", log) == 2);
}

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (!arg.empty() && arg[0] != '-' && fs::exists(arg)) g_binary = arg;
  }
  if (g_binary.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-casgen-binary>\n");
    return 1;
  }
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
