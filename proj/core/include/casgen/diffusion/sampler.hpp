#pragma once

#include "casgen/data/dataset.hpp"
#include "casgen/diffusion/class_encoder.hpp"
#include "casgen/diffusion/schedule.hpp"
#include "casgen/diffusion/unet.hpp"

#include <atomic>
#include <cstdint>
#include <vector>

namespace casgen::diffusion {

/// Generation knobs: IS (inference steps), UGS (guidance scale), checkpoint
/// epoch and base seed.
struct SamplerParams {
  int inference_steps = 50;
  double guidance_scale = 7.5;
  int epoch = 1;
  std::uint64_t seed = 0;

  void validate(int total_timesteps) const;
};

/// Epsilon predictor interface; `cond` carries one conditioning row per sample.
class EpsilonModel {
 public:
  virtual ~EpsilonModel() = default;
  virtual nn::Tensor predict(const nn::Tensor& x, int t, const nn::Tensor& cond) = 0;
  virtual int channels() const = 0;
  virtual int resolution() const = 0;
};

class UNetEpsilonModel : public EpsilonModel {
 public:
  UNetEpsilonModel(UNet& unet, int total_timesteps, int resolution)
      : unet_(unet), total_timesteps_(total_timesteps), resolution_(resolution) {}
  nn::Tensor predict(const nn::Tensor& x, int t, const nn::Tensor& cond) override;
  int channels() const override { return unet_.spec().in_channels; }
  int resolution() const override { return resolution_; }

 private:
  UNet& unet_;
  int total_timesteps_;
  int resolution_;
};

struct SampleStats {
  std::atomic<long long> denoiser_evals{0};
};

/// Uniformly spaced sub-sequence of [0, T-1] with `inference_steps` entries,
/// ascending. Throws if inference_steps > T.
std::vector<int> ddim_timesteps(int total_timesteps, int inference_steps);

/// Deterministic DDIM over a batch; seeds hold one latent seed per sample.
/// Output clipped to [-1,1]. When UGS == 0 only the unconditional branch is
/// evaluated (one forward per step instead of two).
nn::Tensor ddim_sample_batch(EpsilonModel& model, const ClassEncoder& enc,
                             const NoiseSchedule& sched, const std::vector<int>& class_ids,
                             const SamplerParams& params,
                             const std::vector<std::uint64_t>& seeds, SampleStats* stats);

/// Single-image DDIM seeded directly from params.seed.
data::ImageTensor ddim_sample(EpsilonModel& model, const ClassEncoder& enc,
                              const NoiseSchedule& sched, int class_id,
                              const SamplerParams& params, SampleStats* stats = nullptr);

/// Generates counts[i] images of class i; per-image seeds derive from
/// (params.seed, class_id, index). Images are produced in fixed-size chunks;
/// the result is independent of the chunk size.
data::LabeledDataset sample_batch(EpsilonModel& model, const ClassEncoder& enc,
                                  const NoiseSchedule& sched,
                                  const data::ClassDistribution& counts,
                                  const SamplerParams& params, SampleStats* stats = nullptr,
                                  int chunk_size = 64);

}  // namespace casgen::diffusion
