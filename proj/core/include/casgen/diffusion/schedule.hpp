#pragma once

#include "casgen/nn/tensor.hpp"

#include <vector>

namespace casgen::diffusion {

/// Linear-beta diffusion schedule with cumulative alpha products.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
};

/// Linear beta ramp from beta_start to beta_end over T steps.
/// Requires 0 < beta_start <= beta_end < 1 and T >= 2.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

inline constexpr int kDefaultT = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 2e-2;

/// Forward process sample: sqrt(ab_t)*x0 + sqrt(1-ab_t)*eps.
nn::Tensor q_sample(const nn::Tensor& x0, int t, const nn::Tensor& eps,
                    const NoiseSchedule& sched);

/// Classifier-free-guidance combination: eps_uncond + ugs*(eps_cond - eps_uncond).
nn::Tensor guided_epsilon(const nn::Tensor& eps_cond, const nn::Tensor& eps_uncond, double ugs);

}  // namespace casgen::diffusion
