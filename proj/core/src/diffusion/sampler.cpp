#include "casgen/diffusion/sampler.hpp"

#include "casgen/nn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace casgen::diffusion {

void SamplerParams::validate(int total_timesteps) const {
  if (inference_steps < 1 || inference_steps > total_timesteps)
    throw std::invalid_argument("SamplerParams: IS outside [1, T]");
  if (guidance_scale < 0.0) throw std::invalid_argument("SamplerParams: UGS < 0");
  if (epoch < 1) throw std::invalid_argument("SamplerParams: epoch < 1");
}

nn::Tensor UNetEpsilonModel::predict(const nn::Tensor& x, int t, const nn::Tensor& cond) {
  std::vector<int> ts(static_cast<size_t>(x.dim(0)), t);
  return unet_.forward(x, ts, total_timesteps_, cond, /*train=*/false);
}

std::vector<int> ddim_timesteps(int total_timesteps, int inference_steps) {
  if (inference_steps > total_timesteps)
    throw std::invalid_argument("ddim_timesteps: IS > T");
  if (inference_steps < 1) throw std::invalid_argument("ddim_timesteps: IS < 1");
  std::vector<int> ts(static_cast<size_t>(inference_steps));
  if (inference_steps == 1) {
    ts[0] = total_timesteps - 1;
    return ts;
  }
  for (int i = 0; i < inference_steps; ++i) {
    ts[static_cast<size_t>(i)] = static_cast<int>(std::lround(
        static_cast<double>(i) * (total_timesteps - 1) / (inference_steps - 1)));
  }
  return ts;
}

nn::Tensor ddim_sample_batch(EpsilonModel& model, const ClassEncoder& enc,
                             const NoiseSchedule& sched, const std::vector<int>& class_ids,
                             const SamplerParams& params,
                             const std::vector<std::uint64_t>& seeds, SampleStats* stats) {
  params.validate(sched.T);
  const int n = static_cast<int>(class_ids.size());
  if (seeds.size() != class_ids.size())
    throw std::invalid_argument("ddim_sample_batch: seeds/class_ids size mismatch");
  const int c = model.channels(), res = model.resolution();
  const int d_cond = enc.d_cond();

  nn::Tensor x({n, c, res, res});
  for (int s = 0; s < n; ++s) {
    nn::Rng rng(seeds[static_cast<size_t>(s)]);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double* p = x.data() + static_cast<std::int64_t>(s) * c * res * res;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(c) * res * res; ++i) p[i] = gauss(rng);
  }

  nn::Tensor cond({n, d_cond}), null_cond({n, d_cond});
  for (int s = 0; s < n; ++s) {
    const auto row = enc.encode(class_ids[static_cast<size_t>(s)]);
    for (int j = 0; j < d_cond; ++j) {
      cond[static_cast<std::int64_t>(s) * d_cond + j] = row[static_cast<size_t>(j)];
      null_cond[static_cast<std::int64_t>(s) * d_cond + j] = enc.null_embedding()[j];
    }
  }

  const auto ts = ddim_timesteps(sched.T, params.inference_steps);
  for (int i = static_cast<int>(ts.size()) - 1; i >= 0; --i) {
    const int t = ts[static_cast<size_t>(i)];
    const double ab_t = sched.alpha_bars[static_cast<size_t>(t)];
    const double ab_prev =
        i > 0 ? sched.alpha_bars[static_cast<size_t>(ts[static_cast<size_t>(i - 1)])] : 1.0;

    nn::Tensor eps_hat;
    if (params.guidance_scale == 0.0) {
      eps_hat = model.predict(x, t, null_cond);
      if (stats) stats->denoiser_evals += n;
    } else {
      nn::Tensor eps_uncond = model.predict(x, t, null_cond);
      nn::Tensor eps_cond = model.predict(x, t, cond);
      if (stats) stats->denoiser_evals += 2LL * n;
      eps_hat = guided_epsilon(eps_cond, eps_uncond, params.guidance_scale);
    }

    const double sa = std::sqrt(ab_t), sb = std::sqrt(1.0 - ab_t);
    const double pa = std::sqrt(ab_prev), pb = std::sqrt(1.0 - ab_prev);
    for (std::int64_t j = 0; j < x.size(); ++j) {
      // Clipping the x0 prediction keeps few-step trajectories stable when
      // sqrt(alpha_bar) is tiny and the epsilon error would be amplified.
      const double x0_pred = std::clamp((x[j] - sb * eps_hat[j]) / sa, -1.0, 1.0);
      x[j] = pa * x0_pred + pb * eps_hat[j];
    }
  }
  for (std::int64_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], -1.0, 1.0);
  return x;
}

data::ImageTensor ddim_sample(EpsilonModel& model, const ClassEncoder& enc,
                              const NoiseSchedule& sched, int class_id,
                              const SamplerParams& params, SampleStats* stats) {
  nn::Tensor batch = ddim_sample_batch(model, enc, sched, {class_id}, params, {params.seed}, stats);
  const int c = model.channels(), res = model.resolution();
  data::ImageTensor img(res, res, c);
  std::copy(batch.data(), batch.data() + batch.size(), img.values.begin());
  return img;
}

data::LabeledDataset sample_batch(EpsilonModel& model, const ClassEncoder& enc,
                                  const NoiseSchedule& sched,
                                  const data::ClassDistribution& counts,
                                  const SamplerParams& params, SampleStats* stats,
                                  int chunk_size) {
  const int num_classes = static_cast<int>(counts.counts.size());
  if (num_classes != enc.num_classes())
    throw std::invalid_argument("sample_batch: counts/encoder class mismatch");

  std::vector<int> class_ids;
  std::vector<std::uint64_t> seeds;
  for (int cls = 0; cls < num_classes; ++cls) {
    for (long j = 0; j < counts.counts[static_cast<size_t>(cls)]; ++j) {
      class_ids.push_back(cls);
      seeds.push_back(nn::derive_seed(params.seed, static_cast<std::uint64_t>(cls),
                                      static_cast<std::uint64_t>(j)));
    }
  }

  data::LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.provenance = data::Provenance::synthetic;
  ds.split = data::Split::train;
  for (int cls = 0; cls < num_classes; ++cls) ds.class_names.push_back("class" + std::to_string(cls));
  ds.meta["is"] = std::to_string(params.inference_steps);
  ds.meta["ugs"] = std::to_string(params.guidance_scale);
  ds.meta["epoch"] = std::to_string(params.epoch);
  ds.meta["seed"] = std::to_string(params.seed);

  const int c = model.channels(), res = model.resolution();
  for (size_t start = 0; start < class_ids.size(); start += static_cast<size_t>(chunk_size)) {
    const size_t end = std::min(class_ids.size(), start + static_cast<size_t>(chunk_size));
    std::vector<int> ids(class_ids.begin() + static_cast<long>(start),
                         class_ids.begin() + static_cast<long>(end));
    std::vector<std::uint64_t> sds(seeds.begin() + static_cast<long>(start),
                                   seeds.begin() + static_cast<long>(end));
    nn::Tensor out = ddim_sample_batch(model, enc, sched, ids, params, sds, stats);
    for (size_t s = 0; s < ids.size(); ++s) {
      data::ImageTensor img(res, res, c);
      const double* p = out.data() + static_cast<std::int64_t>(s) * c * res * res;
      std::copy(p, p + static_cast<std::int64_t>(c) * res * res, img.values.begin());
      ds.images.push_back(std::move(img));
      ds.labels.push_back(ids[s]);
    }
  }
  return ds;
}

}  // namespace casgen::diffusion
