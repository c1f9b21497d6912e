#pragma once

#include "casgen/data/dataset.hpp"
#include "casgen/diffusion/checkpoint.hpp"
#include "casgen/diffusion/class_encoder.hpp"
#include "casgen/diffusion/schedule.hpp"
#include "casgen/diffusion/unet.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace casgen::diffusion {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-4;
  double weight_decay = 4e-3;
  double clip_norm = 10.0;
  double uncond_prob = 0.1;
  std::uint64_t seed = 0;

  std::string describe() const;
};

/// Class-Encoder transfer-learning preset: 50 epochs, batch 64, lr 1e-4.
TrainConfig stage1_preset();
/// Denoiser fine-tuning preset: 10 epochs, batch 16, lr 1e-5.
TrainConfig stage3_preset();

/// lr(t) = lr0 * (1 + cos(pi * t / T_total)) / 2.
double cosine_lr(long step, long total_steps, double lr0);

/// Class-conditional diffusion model bundle.
struct DiffusionModel {
  DenoiserSpec spec;
  NoiseSchedule sched;
  UNet unet;
  ClassEncoder encoder;
  int resolution;

  DiffusionModel(const DenoiserSpec& s, int num_classes, int resolution_, std::uint64_t seed,
                 const NoiseSchedule& schedule);

  std::vector<nn::Param*> component_params(Component c);
  std::vector<const nn::Param*> component_params(Component c) const;
};

/// One training minibatch of the epsilon objective: noised inputs, injected
/// noise, sampled timesteps and conditioning rows (class or null embedding).
struct DenoiseBatch {
  nn::Tensor x_t;
  nn::Tensor eps;
  std::vector<int> t;
  nn::Tensor cond;
  std::vector<int> cond_source;  // class id, or -1 for the null embedding
};

DenoiseBatch make_denoise_batch(const ClassEncoder& enc, const NoiseSchedule& sched,
                                const nn::Tensor& x0, const std::vector<int>& labels,
                                double uncond_prob, nn::Rng& rng);

/// Mean squared error; writes dL/dpred into *dpred when non-null.
double mse_loss(const nn::Tensor& pred, const nn::Tensor& target, nn::Tensor* dpred = nullptr);

/// Epsilon-prediction loss over one batch. Accumulates parameter gradients
/// (UNet and ClassEncoder) when with_grad is set.
double denoise_loss(UNet& unet, ClassEncoder& enc, const NoiseSchedule& sched,
                    const nn::Tensor& x0, const std::vector<int>& labels, double uncond_prob,
                    nn::Rng& rng, bool with_grad);

struct EpochRecord {
  int epoch = 0;
  double avg_loss = 0.0;
  double lr = 0.0;
  std::string checkpoint_path;
};

/// Trains only the targeted component (the other stays frozen bit-for-bit),
/// cosine-annealed Adam with global gradient clipping, one checkpoint per
/// epoch written under out_dir.
std::vector<EpochRecord> train_component(DiffusionModel& model, Component target,
                                         const TrainConfig& cfg, const data::LabeledDataset& data,
                                         const std::string& out_dir);

/// Stacks a dataset (or a subset of it) into an NCHW tensor plus labels.
void dataset_to_tensor(const data::LabeledDataset& ds, const std::vector<size_t>& indices,
                       nn::Tensor& x, std::vector<int>& labels);

}  // namespace casgen::diffusion
