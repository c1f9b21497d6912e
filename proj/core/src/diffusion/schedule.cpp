#include "casgen/diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace casgen::diffusion {

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
  if (T < 2) throw std::invalid_argument("build_schedule: T < 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(static_cast<size_t>(T));
  s.alphas.resize(static_cast<size_t>(T));
  s.alpha_bars.resize(static_cast<size_t>(T));
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    s.betas[t] = beta_start + (beta_end - beta_start) * t / (T - 1);
    s.alphas[t] = 1.0 - s.betas[t];
    prod *= s.alphas[t];
    s.alpha_bars[t] = prod;
  }
  return s;
}

nn::Tensor q_sample(const nn::Tensor& x0, int t, const nn::Tensor& eps,
                    const NoiseSchedule& sched) {
  if (t < 0 || t >= sched.T) throw std::out_of_range("q_sample: t out of range");
  if (!x0.same_shape(eps)) throw std::invalid_argument("q_sample: shape mismatch");
  const double a = std::sqrt(sched.alpha_bars[static_cast<size_t>(t)]);
  const double b = std::sqrt(1.0 - sched.alpha_bars[static_cast<size_t>(t)]);
  nn::Tensor out(x0.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

nn::Tensor guided_epsilon(const nn::Tensor& eps_cond, const nn::Tensor& eps_uncond, double ugs) {
  if (!eps_cond.same_shape(eps_uncond)) throw std::invalid_argument("guided_epsilon: shape mismatch");
  nn::Tensor out(eps_cond.shape());
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] = eps_uncond[i] + ugs * (eps_cond[i] - eps_uncond[i]);
  return out;
}

}  // namespace casgen::diffusion
