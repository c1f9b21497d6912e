#include "casgen/nn/optim.hpp"

#include <cmath>

namespace casgen::nn {

double clip_global_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.vec().squaredNorm();
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Param* p : params) p->grad.vec() *= scale;
    norm = max_norm;
  }
  return norm;
}

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->grad.set_zero();
}

void Adam::step(double lr_override) {
  const double lr = lr_override >= 0.0 ? lr_override : cfg_.lr;
  last_grad_norm_ = clip_global_norm(params_, cfg_.clip_norm);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    for (std::int64_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p.value[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p.value[j]);
    }
  }
}

}  // namespace casgen::nn
