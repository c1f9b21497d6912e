#pragma once

#include "casgen/nn/layers.hpp"

#include <string>
#include <vector>

namespace casgen::diffusion {

/// Architecture of the epsilon predictor. Conditioning is injected by adding
/// a projected conditioning vector to the timestep embedding.
struct DenoiserSpec {
  int in_channels = 3;
  int base_width = 32;
  int levels = 2;
  int time_dim = 64;  // must be even
  int d_cond = 64;
  int groups = 4;

  std::string describe() const;
};

/// Residual block: x + conv(silu(gn(h + emb_proj(e)))) around conv(silu(gn(x))).
class ResBlock {
 public:
  ResBlock(int channels, int time_dim, int groups, nn::Rng& rng);

  nn::Tensor forward(const nn::Tensor& x, const nn::Tensor& emb, bool train);
  /// Returns dx; accumulates the embedding gradient into demb (N, time_dim).
  nn::Tensor backward(const nn::Tensor& dy, nn::Tensor& demb);
  std::vector<nn::Param*> params();

 private:
  nn::GroupNorm gn1_;
  nn::SiLU act1_;
  nn::Conv2d conv1_;
  nn::Linear emb_proj_;
  nn::GroupNorm gn2_;
  nn::SiLU act2_;
  nn::Conv2d conv2_;
  int channels_;
  std::vector<int> h_shape_;
};

/// Small U-Net epsilon predictor over NCHW batches.
class UNet {
 public:
  UNet(const DenoiserSpec& spec, std::uint64_t seed);

  /// t holds one timestep index per sample; cond is (N, d_cond).
  nn::Tensor forward(const nn::Tensor& x, const std::vector<int>& t, int total_timesteps,
                     const nn::Tensor& cond, bool train);
  /// Returns the gradient w.r.t. the conditioning rows (N, d_cond).
  nn::Tensor backward(const nn::Tensor& deps);

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  const DenoiserSpec& spec() const { return spec_; }
  std::int64_t param_count() const;

 private:
  nn::Tensor time_embedding(const std::vector<int>& t, int total_timesteps) const;

  DenoiserSpec spec_;
  nn::Conv2d stem_;
  std::vector<ResBlock> down_blocks_;
  std::vector<nn::Conv2d> down_convs_;
  ResBlock mid_;
  std::vector<nn::UpsampleNearest2x> upsamples_;
  std::vector<nn::Conv2d> up_convs_;
  std::vector<ResBlock> up_blocks_;
  nn::GroupNorm out_gn_;
  nn::SiLU out_act_;
  nn::Conv2d out_conv_;
  nn::Linear time_lin1_;
  nn::SiLU time_act_;
  nn::Linear time_lin2_;
  nn::Linear cond_proj_;
  std::vector<nn::Tensor> skips_;
  int batch_ = 0;
};

int norm_groups_for(int channels, int preferred);

}  // namespace casgen::diffusion
