#include "casgen/data/toy.hpp"
#include "casgen/diffusion/sampler.hpp"
#include "casgen/diffusion/train.hpp"
#include "casgen/eval/classifier.hpp"

#include <benchmark/benchmark.h>

using namespace casgen;

namespace {

diffusion::DiffusionModel make_model(int base_width, int resolution) {
  diffusion::DenoiserSpec spec;
  spec.base_width = base_width;
  spec.levels = 2;
  spec.time_dim = 32;
  spec.d_cond = 16;
  return diffusion::DiffusionModel(spec, 3, resolution, 7,
                                   diffusion::build_schedule(100, 1e-4, 2e-2));
}

void BM_DenoiserForward(benchmark::State& state) {
  auto model = make_model(static_cast<int>(state.range(0)), 32);
  nn::Tensor x({4, 3, 32, 32});
  nn::Rng rng(1);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = nn::rand_normal(rng);
  nn::Tensor cond({4, model.spec.d_cond});
  std::vector<int> t{0, 10, 50, 99};
  for (auto _ : state) {
    auto out = model.unet.forward(x, t, 100, cond, false);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_DenoiserForward)->Arg(8)->Arg(16)->Arg(32);

void BM_DdimSampleImage(benchmark::State& state) {
  auto model = make_model(12, 32);
  diffusion::UNetEpsilonModel eps(model.unet, model.sched.T, 32);
  diffusion::SamplerParams params;
  params.inference_steps = static_cast<int>(state.range(0));
  params.guidance_scale = 2.0;
  for (auto _ : state) {
    auto img = diffusion::ddim_sample(eps, model.encoder, model.sched, 0, params);
    benchmark::DoNotOptimize(img.values.data());
  }
}
BENCHMARK(BM_DdimSampleImage)->Arg(5)->Arg(10)->Arg(20);

void BM_ClassifierEpoch(benchmark::State& state) {
  data::ToySpec spec;
  spec.num_classes = 3;
  spec.per_class = 40;
  spec.resolution = 32;
  const auto ds = data::make_toy_dataset(spec);
  eval::ClassifierConfig cfg;
  cfg.num_classes = 3;
  cfg.base_width = static_cast<int>(state.range(0));
  eval::TrainingPolicy policy;
  policy.epochs = 1;
  policy.batch_size = 32;
  for (auto _ : state) {
    eval::ResNetClassifier clf(cfg, 7);
    auto res = eval::train_classifier(clf, policy, ds);
    benchmark::DoNotOptimize(res.best_val_accuracy);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(ds.size()));
}
BENCHMARK(BM_ClassifierEpoch)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
