#include "casgen/data/toy.hpp"
#include "casgen/diffusion/checkpoint.hpp"
#include "casgen/diffusion/sampler.hpp"
#include "casgen/diffusion/schedule.hpp"
#include "casgen/diffusion/train.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace casgen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("casgen_diff_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

diffusion::DenoiserSpec tiny_spec() {
  diffusion::DenoiserSpec spec;
  spec.in_channels = 1;
  spec.base_width = 4;
  spec.levels = 1;
  spec.time_dim = 8;
  spec.d_cond = 6;
  spec.groups = 2;
  return spec;
}

/// Epsilon model returning a constant value everywhere; lets the DDIM
/// recurrence be checked against a scalar re-derivation.
class ConstEpsilonModel : public diffusion::EpsilonModel {
 public:
  ConstEpsilonModel(double value, int channels, int resolution)
      : value_(value), channels_(channels), resolution_(resolution) {}
  nn::Tensor predict(const nn::Tensor& x, int, const nn::Tensor&) override {
    nn::Tensor out(x.shape());
    out.fill(value_);
    return out;
  }
  int channels() const override { return channels_; }
  int resolution() const override { return resolution_; }

 private:
  double value_;
  int channels_, resolution_;
};

}  // namespace

TEST_CASE("noise schedule matches the cumulative-product oracle") {
  const int T = 50;
  const double b0 = 1e-4, b1 = 2e-2;
  const auto s = diffusion::build_schedule(T, b0, b1);
  REQUIRE(s.T == T);
  REQUIRE(s.betas.size() == static_cast<size_t>(T));

  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    const double beta = b0 + (b1 - b0) * t / (T - 1);
    CHECK(s.betas[static_cast<size_t>(t)] == doctest::Approx(beta).epsilon(1e-12));
    CHECK(s.alphas[static_cast<size_t>(t)] == doctest::Approx(1.0 - beta).epsilon(1e-12));
    prod *= 1.0 - beta;
    CHECK(s.alpha_bars[static_cast<size_t>(t)] == doctest::Approx(prod).epsilon(1e-12));
  }
  CHECK(s.alpha_bars.front() > s.alpha_bars.back());

  CHECK_THROWS(diffusion::build_schedule(1, b0, b1));
  CHECK_THROWS(diffusion::build_schedule(T, 0.0, b1));
  CHECK_THROWS(diffusion::build_schedule(T, 2e-2, 1e-4));
  CHECK_THROWS(diffusion::build_schedule(T, 1e-4, 1.0));
}

TEST_CASE("q_sample applies the forward-process formula elementwise") {
  const auto s = diffusion::build_schedule(20, 1e-3, 5e-2);
  nn::Rng rng(7);
  nn::Tensor x0({2, 1, 3, 3}), eps({2, 1, 3, 3});
  for (std::int64_t i = 0; i < x0.size(); ++i) {
    x0[i] = nn::rand_normal(rng);
    eps[i] = nn::rand_normal(rng);
  }
  for (int t : {0, 7, 19}) {
    const auto xt = diffusion::q_sample(x0, t, eps, s);
    const double a = std::sqrt(s.alpha_bars[static_cast<size_t>(t)]);
    const double b = std::sqrt(1.0 - s.alpha_bars[static_cast<size_t>(t)]);
    for (std::int64_t i = 0; i < x0.size(); ++i)
      CHECK(xt[i] == doctest::Approx(a * x0[i] + b * eps[i]).epsilon(1e-12));
  }
}

TEST_CASE("guidance identities and linearity") {
  nn::Rng rng(11);
  nn::Tensor c({3, 4}), u({3, 4});
  for (std::int64_t i = 0; i < c.size(); ++i) {
    c[i] = nn::rand_normal(rng);
    u[i] = nn::rand_normal(rng);
  }

  const auto g0 = diffusion::guided_epsilon(c, u, 0.0);
  const auto g1 = diffusion::guided_epsilon(c, u, 1.0);
  for (std::int64_t i = 0; i < c.size(); ++i) {
    CHECK(std::abs(g0[i] - u[i]) < 1e-6);
    CHECK(std::abs(g1[i] - c[i]) < 1e-6);
  }

  for (double w : {0.3, 2.0, 7.5}) {
    const auto g = diffusion::guided_epsilon(c, u, w);
    for (std::int64_t i = 0; i < c.size(); ++i)
      CHECK(g[i] == doctest::Approx(u[i] + w * (c[i] - u[i])).epsilon(1e-9));
  }
}

TEST_CASE("ddim timestep grid") {
  CHECK(diffusion::ddim_timesteps(100, 1) == std::vector<int>{99});
  const auto full = diffusion::ddim_timesteps(10, 10);
  std::vector<int> iota(10);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(full == iota);

  const auto ts = diffusion::ddim_timesteps(1000, 50);
  REQUIRE(ts.size() == 50);
  CHECK(ts.front() == 0);
  CHECK(ts.back() == 999);
  for (size_t i = 0; i < ts.size(); ++i) {
    const double exact = static_cast<double>(i) * 999.0 / 49.0;
    CHECK(ts[i] == static_cast<int>(std::lround(exact)));
    if (i > 0) CHECK(ts[i] > ts[i - 1]);
  }
  CHECK_THROWS(diffusion::ddim_timesteps(10, 11));
  CHECK_THROWS(diffusion::ddim_timesteps(10, 0));
}

TEST_CASE("ddim with a constant predictor matches the scalar recurrence") {
  const auto s = diffusion::build_schedule(40, 1e-4, 5e-3);
  const int res = 4;
  ConstEpsilonModel model(0.25, 1, res);
  nn::Rng erng(3);
  diffusion::ClassEncoder enc(2, 6, erng);

  diffusion::SamplerParams p;
  p.inference_steps = 7;
  p.guidance_scale = 1.5;  // guided constant eps is still the same constant
  p.seed = 91;

  diffusion::SampleStats stats;
  const auto img = diffusion::ddim_sample(model, enc, s, 1, p, &stats);

  // Reproduce the initial latent, then run the textbook DDIM update with the
  // known constant epsilon.
  nn::Rng lrng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(static_cast<size_t>(res) * res);
  for (auto& v : x) v = gauss(lrng);

  const auto ts = diffusion::ddim_timesteps(s.T, p.inference_steps);
  const double eps = 0.25;
  for (int i = static_cast<int>(ts.size()) - 1; i >= 0; --i) {
    const double ab = s.alpha_bars[static_cast<size_t>(ts[static_cast<size_t>(i)])];
    const double abp = i > 0 ? s.alpha_bars[static_cast<size_t>(ts[static_cast<size_t>(i - 1)])] : 1.0;
    for (auto& v : x) {
      const double x0 =
          std::clamp((v - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab), -1.0, 1.0);
      v = std::sqrt(abp) * x0 + std::sqrt(1.0 - abp) * eps;
    }
  }
  for (auto& v : x) v = std::clamp(v, -1.0, 1.0);

  REQUIRE(img.values.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i) CHECK(img.values[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("denoiser eval count: 2*IS*N guided, IS*N unguided") {
  const auto s = diffusion::build_schedule(20, 1e-4, 1e-2);
  ConstEpsilonModel model(0.0, 1, 4);
  nn::Rng erng(5);
  diffusion::ClassEncoder enc(3, 6, erng);

  data::ClassDistribution counts{{2, 1, 2}};
  diffusion::SamplerParams p;
  p.inference_steps = 6;
  p.guidance_scale = 2.0;
  diffusion::SampleStats guided;
  diffusion::sample_batch(model, enc, s, counts, p, &guided);
  CHECK(guided.denoiser_evals == 2LL * 6 * 5);

  p.guidance_scale = 0.0;
  diffusion::SampleStats unguided;
  diffusion::sample_batch(model, enc, s, counts, p, &unguided);
  CHECK(unguided.denoiser_evals == 1LL * 6 * 5);
}

TEST_CASE("sample_batch output is independent of the chunk size") {
  const auto s = diffusion::build_schedule(15, 1e-4, 1e-2);
  const auto spec = tiny_spec();
  diffusion::UNet unet(spec, 17);
  diffusion::UNetEpsilonModel model(unet, s.T, 8);
  nn::Rng erng(4);
  diffusion::ClassEncoder enc(2, spec.d_cond, erng);

  data::ClassDistribution counts{{3, 2}};
  diffusion::SamplerParams p;
  p.inference_steps = 3;
  p.guidance_scale = 1.0;
  p.seed = 1234;

  const auto a = diffusion::sample_batch(model, enc, s, counts, p, nullptr, 1);
  const auto b = diffusion::sample_batch(model, enc, s, counts, p, nullptr, 2);
  const auto c = diffusion::sample_batch(model, enc, s, counts, p, nullptr, 64);
  REQUIRE(a.size() == 5);
  CHECK(a.labels == c.labels);
  CHECK(a.provenance == data::Provenance::synthetic);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.images[i].values == b.images[i].values);
    CHECK(a.images[i].values == c.images[i].values);
  }
}

TEST_CASE("class encoder is an affine map with a separate null embedding") {
  nn::Rng rng(8);
  diffusion::ClassEncoder enc(4, 5, rng);
  for (int cls = 0; cls < 4; ++cls) {
    const auto row = enc.encode(cls);
    REQUIRE(row.size() == 5);
    for (int j = 0; j < 5; ++j) {
      const double want = enc.weight_.value[static_cast<std::int64_t>(j) * 4 + cls] +
                          enc.bias_.value[j];
      CHECK(row[static_cast<size_t>(j)] == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK_THROWS(enc.encode(4));
  CHECK_THROWS(enc.encode(-1));
  CHECK(enc.null_embedding().size() == 5);
}

TEST_CASE("checkpoint round trip and shape mismatch") {
  const auto dir = temp_dir("ckpt");
  nn::Rng rng(2);
  diffusion::ClassEncoder enc(3, 4, rng);
  for (auto* p : enc.params())
    for (std::int64_t i = 0; i < p->value.size(); ++i) p->value[i] = nn::rand_normal(rng);

  diffusion::CheckpointMeta meta;
  meta.component = diffusion::Component::class_encoder;
  meta.epoch = 7;
  meta.config_fingerprint = "abc123";
  meta.param_count = 0;
  for (const auto* p : std::as_const(enc).params()) meta.param_count += p->value.size();

  const std::string path = (dir / "enc.ckpt").string();
  diffusion::save_checkpoint(path, std::as_const(enc).params(), meta);
  CHECK(fs::exists(path));
  CHECK(fs::exists(path + ".meta"));

  nn::Rng rng2(99);
  diffusion::ClassEncoder other(3, 4, rng2);
  const auto before = diffusion::hash_params(std::as_const(other).params());
  const auto got = diffusion::load_checkpoint(path, other.params());
  CHECK(got.epoch == 7);
  CHECK(got.component == diffusion::Component::class_encoder);
  CHECK(got.config_fingerprint == "abc123");
  CHECK(diffusion::hash_params(std::as_const(other).params()) != before);
  CHECK(diffusion::hash_params(std::as_const(other).params()) ==
        diffusion::hash_params(std::as_const(enc).params()));

  nn::Rng rng3(1);
  diffusion::ClassEncoder wrong(3, 5, rng3);
  CHECK_THROWS(diffusion::load_checkpoint(path, wrong.params()));
  CHECK_THROWS(diffusion::load_checkpoint((dir / "missing.ckpt").string(), other.params()));

  const auto side = diffusion::read_checkpoint_meta(path);
  CHECK(side.param_count == meta.param_count);
}

TEST_CASE("batch construction: x_t obeys q_sample, eps is standard normal") {
  const auto s = diffusion::build_schedule(30, 1e-4, 1e-2);
  nn::Rng erng(6);
  diffusion::ClassEncoder enc(3, 6, erng);

  nn::Rng rng(41);
  const int n = 64, res = 4;
  nn::Tensor x0({n, 1, res, res});
  std::vector<int> labels;
  for (std::int64_t i = 0; i < x0.size(); ++i) x0[i] = nn::rand_uniform(rng, -1, 1);
  for (int i = 0; i < n; ++i) labels.push_back(i % 3);

  // Monte-Carlo moments of the injected noise over many batches.
  double sum = 0.0, sumsq = 0.0;
  long count = 0;
  long null_rows = 0, total_rows = 0;
  for (int rep = 0; rep < 160; ++rep) {
    const auto b = diffusion::make_denoise_batch(enc, s, x0, labels, 0.25, rng);
    REQUIRE(b.t.size() == static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      CHECK(b.t[static_cast<size_t>(i)] >= 0);
      CHECK(b.t[static_cast<size_t>(i)] < s.T);
    }
    for (std::int64_t i = 0; i < b.eps.size(); ++i) {
      sum += b.eps[i];
      sumsq += b.eps[i] * b.eps[i];
      ++count;
    }
    // Recompute the forward process from (x0, t, eps) independently.
    if (rep == 0) {
      for (int i = 0; i < n; ++i) {
        const double a = std::sqrt(s.alpha_bars[static_cast<size_t>(b.t[static_cast<size_t>(i)])]);
        const double bb = std::sqrt(1.0 - s.alpha_bars[static_cast<size_t>(b.t[static_cast<size_t>(i)])]);
        for (int j = 0; j < res * res; ++j) {
          const std::int64_t k = static_cast<std::int64_t>(i) * res * res + j;
          CHECK(b.x_t[k] == doctest::Approx(a * x0[k] + bb * b.eps[k]).epsilon(1e-10));
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      ++total_rows;
      if (b.cond_source[static_cast<size_t>(i)] == -1) ++null_rows;
    }
  }
  const double mean = sum / count;
  const double var = sumsq / count - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
  const double null_frac = static_cast<double>(null_rows) / total_rows;
  CHECK(std::abs(null_frac - 0.25) < 0.05);
}

TEST_CASE("mse loss value and gradient") {
  nn::Tensor a({2, 3}), b({2, 3});
  for (std::int64_t i = 0; i < a.size(); ++i) {
    a[i] = 0.5 * i;
    b[i] = 1.0 - 0.25 * i;
  }
  nn::Tensor da;
  const double loss = diffusion::mse_loss(a, b, &da);
  double want = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) want += (a[i] - b[i]) * (a[i] - b[i]);
  want /= static_cast<double>(a.size());
  CHECK(loss == doctest::Approx(want).epsilon(1e-12));
  for (std::int64_t i = 0; i < a.size(); ++i)
    CHECK(da[i] == doctest::Approx(2.0 * (a[i] - b[i]) / a.size()).epsilon(1e-12));
}

TEST_CASE("denoise loss gradients agree with central finite differences") {
  const auto s = diffusion::build_schedule(12, 1e-4, 1e-2);
  const auto spec = tiny_spec();
  diffusion::DiffusionModel model(spec, 2, 8, 21, s);
  REQUIRE(model.unet.param_count() < 10000);

  nn::Rng drng(5);
  nn::Tensor x0({2, 1, 8, 8});
  for (std::int64_t i = 0; i < x0.size(); ++i) x0[i] = nn::rand_uniform(drng, -1, 1);
  const std::vector<int> labels{0, 1};

  const std::uint64_t eval_seed = 777;
  auto eval_loss = [&]() {
    nn::Rng r(eval_seed);
    return diffusion::denoise_loss(model.unet, model.encoder, s, x0, labels, 0.5, r, false);
  };

  auto all_params = model.unet.params();
  for (auto* p : model.encoder.params()) all_params.push_back(p);
  for (auto* p : all_params) p->grad.set_zero();
  {
    nn::Rng r(eval_seed);
    diffusion::denoise_loss(model.unet, model.encoder, s, x0, labels, 0.5, r, true);
  }

  nn::Rng pick(13);
  double max_rel = 0.0;
  for (auto* p : all_params) {
    const std::int64_t stride = std::max<std::int64_t>(1, p->value.size() / 4);
    for (std::int64_t i = 0; i < p->value.size(); i += stride) {
      const double h = 1e-5;
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double lp = eval_loss();
      p->value[i] = orig - h;
      const double lm = eval_loss();
      p->value[i] = orig;
      const double fd = (lp - lm) / (2 * h);
      const double an = p->grad[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
      max_rel = std::max(max_rel, std::abs(fd - an) / denom);
    }
  }
  CHECK(max_rel < 1e-3);
}

TEST_CASE("train_component freezes the other component and anneals the lr") {
  const auto dir = temp_dir("train");
  const auto s = diffusion::build_schedule(10, 1e-4, 1e-2);
  const auto spec = tiny_spec();
  diffusion::DiffusionModel model(spec, 2, 8, 31, s);

  data::ToySpec tspec;
  tspec.num_classes = 2;
  tspec.per_class = 4;
  tspec.resolution = 8;
  auto ds = data::make_toy_dataset(tspec);
  // Collapse to single channel to match the tiny denoiser.
  for (auto& img : ds.images) {
    data::ImageTensor gray(8, 8, 1);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        gray.at(0, y, x) = (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0;
    img = gray;
  }

  diffusion::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.seed = 2;

  const auto denoiser_before =
      diffusion::hash_params(std::as_const(model).component_params(diffusion::Component::denoiser));
  const auto encoder_before = diffusion::hash_params(
      std::as_const(model).component_params(diffusion::Component::class_encoder));

  const auto records = diffusion::train_component(model, diffusion::Component::class_encoder, cfg,
                                                  ds, (dir / "out").string());
  REQUIRE(records.size() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(records[static_cast<size_t>(e)].epoch == e + 1);
    CHECK(fs::exists(records[static_cast<size_t>(e)].checkpoint_path));
    CHECK(std::isfinite(records[static_cast<size_t>(e)].avg_loss));
  }
  CHECK(records.front().lr > records.back().lr);

  CHECK(diffusion::hash_params(std::as_const(model).component_params(
            diffusion::Component::denoiser)) == denoiser_before);
  CHECK(diffusion::hash_params(std::as_const(model).component_params(
            diffusion::Component::class_encoder)) != encoder_before);

  const auto meta = diffusion::read_checkpoint_meta(records.back().checkpoint_path);
  CHECK(meta.component == diffusion::Component::class_encoder);
  CHECK(meta.epoch == 3);
}

TEST_CASE("cosine lr endpoints") {
  CHECK(diffusion::cosine_lr(0, 100, 1e-3) == doctest::Approx(1e-3));
  CHECK(diffusion::cosine_lr(50, 100, 1e-3) == doctest::Approx(5e-4));
  CHECK(diffusion::cosine_lr(100, 100, 1e-3) == doctest::Approx(0.0));
}
