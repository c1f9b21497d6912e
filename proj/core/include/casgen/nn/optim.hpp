#pragma once

#include "casgen/nn/layers.hpp"

#include <vector>

namespace casgen::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
  double clip_norm = 0.0;     // 0 disables clipping
};

class Adam {
 public:
  explicit Adam(std::vector<Param*> params, AdamConfig cfg);

  /// Clips the global gradient norm, then applies one update. `lr_override`
  /// (if >= 0) replaces cfg.lr for this step, for external schedulers.
  void step(double lr_override = -1.0);
  void zero_grad();

  /// Global gradient norm after the most recent clipping pass.
  double last_grad_norm() const { return last_grad_norm_; }

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
  double last_grad_norm_ = 0.0;
};

/// Global L2 norm over all parameter gradients; scales them down in place if
/// the norm exceeds `max_norm`. Returns the post-clip norm.
double clip_global_norm(const std::vector<Param*>& params, double max_norm);

}  // namespace casgen::nn
