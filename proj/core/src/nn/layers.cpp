#include "casgen/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace casgen::nn {

void he_normal_init(Tensor& w, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::normal_distribution<double> dist(0.0, stddev);
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = dist(rng);
}

std::vector<Param*> collect_params(const std::vector<Layer*>& layers) {
  std::vector<Param*> out;
  for (Layer* l : layers) {
    auto ps = l->params();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng)
    : weight_("conv.weight", {out_ch, in_ch * kernel * kernel}),
      bias_("conv.bias", {out_ch}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {
  he_normal_init(weight_.value, in_ch * kernel * kernel, rng);
}

void Conv2d::im2col(const double* img, int h, int w, double* col) const {
  const int oh = out_height(h), ow = out_height(w);
  const int kk = kernel_ * kernel_;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double* row = col + (static_cast<std::int64_t>(y) * ow + x) * in_ch_ * kk;
      for (int c = 0; c < in_ch_; ++c) {
        const double* plane = img + static_cast<std::int64_t>(c) * h * w;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int sy = y * stride_ - pad_ + ky;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int sx = x * stride_ - pad_ + kx;
            row[(c * kernel_ + ky) * kernel_ + kx] =
                (sy >= 0 && sy < h && sx >= 0 && sx < w) ? plane[sy * w + sx] : 0.0;
          }
        }
      }
    }
  }
}

void Conv2d::col2im(const double* col, int h, int w, double* img) const {
  const int oh = out_height(h), ow = out_height(w);
  const int kk = kernel_ * kernel_;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double* row = col + (static_cast<std::int64_t>(y) * ow + x) * in_ch_ * kk;
      for (int c = 0; c < in_ch_; ++c) {
        double* plane = img + static_cast<std::int64_t>(c) * h * w;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int sy = y * stride_ - pad_ + ky;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int sx = x * stride_ - pad_ + kx;
            if (sx < 0 || sx >= w) continue;
            plane[sy * w + sx] += row[(c * kernel_ + ky) * kernel_ + kx];
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, bool /*train*/) {
  if (x.ndim() != 4 || x.dim(1) != in_ch_) throw std::invalid_argument("Conv2d: bad input shape");
  x_ = x;
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = out_height(h), ow = out_height(w);
  const int k2 = in_ch_ * kernel_ * kernel_;
  Tensor out({n, out_ch_, oh, ow});

  std::vector<double> col(static_cast<size_t>(oh) * ow * k2);
  auto wm = weight_.value.mat(out_ch_, k2);
  for (int s = 0; s < n; ++s) {
    im2col(x.data() + static_cast<std::int64_t>(s) * in_ch_ * h * w, h, w, col.data());
    ConstMatMap cm(col.data(), static_cast<std::int64_t>(oh) * ow, k2);
    MatMap om(out.data() + static_cast<std::int64_t>(s) * out_ch_ * oh * ow, out_ch_,
              static_cast<std::int64_t>(oh) * ow);
    om.noalias() = wm * cm.transpose();
    om.colwise() += ConstVecMap(bias_.value.data(), out_ch_);
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int oh = out_height(h), ow = out_height(w);
  const std::int64_t pos = static_cast<std::int64_t>(oh) * ow;
  const int k2 = in_ch_ * kernel_ * kernel_;
  Tensor dx({n, in_ch_, h, w});

  std::vector<double> col(static_cast<size_t>(pos) * k2);
  std::vector<double> dcol(static_cast<size_t>(pos) * k2);
  auto wm = weight_.value.mat(out_ch_, k2);
  MatMap dwm = weight_.grad.mat(out_ch_, k2);
  VecMap dbm(bias_.grad.data(), out_ch_);
  for (int s = 0; s < n; ++s) {
    im2col(x_.data() + static_cast<std::int64_t>(s) * in_ch_ * h * w, h, w, col.data());
    ConstMatMap cm(col.data(), pos, k2);
    ConstMatMap dym(dy.data() + static_cast<std::int64_t>(s) * out_ch_ * pos, out_ch_, pos);
    dwm.noalias() += dym * cm;
    dbm.noalias() += dym.rowwise().sum();
    MatMap dcm(dcol.data(), pos, k2);
    dcm.noalias() = dym.transpose() * wm;
    col2im(dcol.data(), h, w, dx.data() + static_cast<std::int64_t>(s) * in_ch_ * h * w);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_dim, int out_dim, Rng& rng)
    : weight_("linear.weight", {out_dim, in_dim}),
      bias_("linear.bias", {out_dim}),
      in_dim_(in_dim),
      out_dim_(out_dim) {
  he_normal_init(weight_.value, in_dim, rng);
}

Tensor Linear::forward(const Tensor& x, bool /*train*/) {
  const int n = static_cast<int>(x.size() / in_dim_);
  x_ = x;
  Tensor out({n, out_dim_});
  // Row-by-row so each sample's result is independent of the batch it rides in.
  auto om = out.mat(n, out_dim_);
  auto xm = x.mat(n, in_dim_);
  auto wm = weight_.value.mat(out_dim_, in_dim_);
  for (int s = 0; s < n; ++s) om.row(s).noalias() = xm.row(s) * wm.transpose();
  om.rowwise() += ConstVecMap(bias_.value.data(), out_dim_).transpose();
  return out;
}

Tensor Linear::backward(const Tensor& dy) {
  const int n = static_cast<int>(x_.size() / in_dim_);
  Tensor dx(x_.shape());
  ConstMatMap dym = dy.mat(n, out_dim_);
  weight_.grad.mat(out_dim_, in_dim_).noalias() += dym.transpose() * x_.mat(n, in_dim_);
  VecMap(bias_.grad.data(), out_dim_).noalias() += dym.colwise().sum().transpose();
  dx.mat(n, in_dim_).noalias() = dym * weight_.value.mat(out_dim_, in_dim_);
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double eps, double momentum)
    : gamma_("bn.gamma", {channels}),
      beta_("bn.beta", {channels}),
      running_mean_({channels}),
      running_var_({channels}),
      channels_(channels),
      eps_(eps),
      momentum_(momentum) {
  gamma_.value.fill(1.0);
  running_var_.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  const int n = x.dim(0), c = x.dim(1), h = x.ndim() == 4 ? x.dim(2) : 1,
            w = x.ndim() == 4 ? x.dim(3) : 1;
  if (c != channels_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  const double m = static_cast<double>(n) * hw;
  train_mode_ = train;
  Tensor out(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(static_cast<size_t>(c), 0.0);

  for (int ch = 0; ch < c; ++ch) {
    double mean, var;
    if (train) {
      double sum = 0.0, sq = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* p = x.data() + (static_cast<std::int64_t>(s) * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      mean = sum / m;
      var = sq / m - mean * mean;
      if (var < 0) var = 0;
      running_mean_[ch] = (1 - momentum_) * running_mean_[ch] + momentum_ * mean;
      running_var_[ch] = (1 - momentum_) * running_var_[ch] + momentum_ * var;
    } else {
      mean = running_mean_[ch];
      var = running_var_[ch];
    }
    const double istd = 1.0 / std::sqrt(var + eps_);
    inv_std_[static_cast<size_t>(ch)] = istd;
    const double g = gamma_.value[ch], b = beta_.value[ch];
    for (int s = 0; s < n; ++s) {
      const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        const double xh = (x[off + i] - mean) * istd;
        xhat_[off + i] = xh;
        out[off + i] = g * xh + b;
      }
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const auto& shp = xhat_.shape();
  const int n = shp[0], c = shp[1];
  const std::int64_t hw = xhat_.size() / (static_cast<std::int64_t>(n) * c);
  const double m = static_cast<double>(n) * hw;
  Tensor dx(shp);

  for (int ch = 0; ch < c; ++ch) {
    const double g = gamma_.value[ch];
    const double istd = inv_std_[static_cast<size_t>(ch)];
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int s = 0; s < n; ++s) {
      const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xh += dy[off + i] * xhat_[off + i];
      }
    }
    gamma_.grad[ch] += sum_dy_xh;
    beta_.grad[ch] += sum_dy;
    if (train_mode_) {
      const double mean_dy = sum_dy / m, mean_dy_xh = sum_dy_xh / m;
      for (int s = 0; s < n; ++s) {
        const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          dx[off + i] = g * istd * (dy[off + i] - mean_dy - xhat_[off + i] * mean_dy_xh);
        }
      }
    } else {
      for (int s = 0; s < n; ++s) {
        const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) dx[off + i] = g * istd * dy[off + i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// GroupNorm

GroupNorm::GroupNorm(int groups, int channels, double eps)
    : gamma_("gn.gamma", {channels}),
      beta_("gn.beta", {channels}),
      groups_(groups),
      channels_(channels),
      eps_(eps) {
  if (channels % groups != 0) throw std::invalid_argument("GroupNorm: channels % groups != 0");
  gamma_.value.fill(1.0);
}

Tensor GroupNorm::forward(const Tensor& x, bool /*train*/) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  const int cg = c / groups_;
  const double m = static_cast<double>(cg) * hw;
  Tensor out(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(static_cast<size_t>(n) * groups_, 0.0);

  for (int s = 0; s < n; ++s) {
    for (int g = 0; g < groups_; ++g) {
      double sum = 0.0, sq = 0.0;
      for (int j = 0; j < cg; ++j) {
        const int ch = g * cg + j;
        const double* p = x.data() + (static_cast<std::int64_t>(s) * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      const double mean = sum / m;
      double var = sq / m - mean * mean;
      if (var < 0) var = 0;
      const double istd = 1.0 / std::sqrt(var + eps_);
      inv_std_[static_cast<size_t>(s) * groups_ + g] = istd;
      for (int j = 0; j < cg; ++j) {
        const int ch = g * cg + j;
        const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
        const double gm = gamma_.value[ch], bt = beta_.value[ch];
        for (std::int64_t i = 0; i < hw; ++i) {
          const double xh = (x[off + i] - mean) * istd;
          xhat_[off + i] = xh;
          out[off + i] = gm * xh + bt;
        }
      }
    }
  }
  return out;
}

Tensor GroupNorm::backward(const Tensor& dy) {
  const auto& shp = xhat_.shape();
  const int n = shp[0], c = shp[1];
  const std::int64_t hw = xhat_.size() / (static_cast<std::int64_t>(n) * c);
  const int cg = c / groups_;
  const double m = static_cast<double>(cg) * hw;
  Tensor dx(shp);

  // Channel-wise parameter gradients.
  for (int ch = 0; ch < c; ++ch) {
    double sdx = 0.0, sdy = 0.0;
    for (int s = 0; s < n; ++s) {
      const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        sdx += dy[off + i] * xhat_[off + i];
        sdy += dy[off + i];
      }
    }
    gamma_.grad[ch] += sdx;
    beta_.grad[ch] += sdy;
  }

  for (int s = 0; s < n; ++s) {
    for (int g = 0; g < groups_; ++g) {
      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
      for (int j = 0; j < cg; ++j) {
        const int ch = g * cg + j;
        const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
        const double gm = gamma_.value[ch];
        for (std::int64_t i = 0; i < hw; ++i) {
          const double dxh = dy[off + i] * gm;
          mean_dxh += dxh;
          mean_dxh_xh += dxh * xhat_[off + i];
        }
      }
      mean_dxh /= m;
      mean_dxh_xh /= m;
      const double istd = inv_std_[static_cast<size_t>(s) * groups_ + g];
      for (int j = 0; j < cg; ++j) {
        const int ch = g * cg + j;
        const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * hw;
        const double gm = gamma_.value[ch];
        for (std::int64_t i = 0; i < hw; ++i) {
          dx[off + i] =
              istd * (dy[off + i] * gm - mean_dxh - xhat_[off + i] * mean_dxh_xh);
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations and shape ops

Tensor ReLU::forward(const Tensor& x, bool /*train*/) {
  x_ = x;
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : 0.0;
  return out;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] = x_[i] > 0 ? dy[i] : 0.0;
  return dx;
}

Tensor SiLU::forward(const Tensor& x, bool /*train*/) {
  x_ = x;
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x[i]));
    out[i] = x[i] * s;
  }
  return out;
}

Tensor SiLU::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  for (std::int64_t i = 0; i < dx.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x_[i]));
    dx[i] = dy[i] * s * (1.0 + x_[i] * (1.0 - s));
  }
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool /*train*/) {
  const int n = x.dim(0), c = x.dim(1);
  const std::int64_t hw = x.size() / (static_cast<std::int64_t>(n) * c);
  in_shape_ = x.shape();
  Tensor out({n, c});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const double* p = x.data() + (static_cast<std::int64_t>(s) * c + ch) * hw;
      double sum = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) sum += p[i];
      out[static_cast<std::int64_t>(s) * c + ch] = sum / static_cast<double>(hw);
    }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const int n = in_shape_[0], c = in_shape_[1];
  const std::int64_t hw = shape_size(in_shape_) / (static_cast<std::int64_t>(n) * c);
  Tensor dx(in_shape_);
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const double g = dy[static_cast<std::int64_t>(s) * c + ch] / static_cast<double>(hw);
      double* p = dx.data() + (static_cast<std::int64_t>(s) * c + ch) * hw;
      for (std::int64_t i = 0; i < hw; ++i) p[i] = g;
    }
  return dx;
}

Tensor UpsampleNearest2x::forward(const Tensor& x, bool /*train*/) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  in_shape_ = x.shape();
  Tensor out({n, c, 2 * h, 2 * w});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = x.data() + (static_cast<std::int64_t>(s) * c + ch) * h * w;
      double* dst = out.data() + (static_cast<std::int64_t>(s) * c + ch) * 4 * h * w;
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
    }
  return out;
}

Tensor UpsampleNearest2x::backward(const Tensor& dy) {
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  Tensor dx(in_shape_);
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      double* dst = dx.data() + (static_cast<std::int64_t>(s) * c + ch) * h * w;
      const double* src = dy.data() + (static_cast<std::int64_t>(s) * c + ch) * 4 * h * w;
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) dst[(y / 2) * w + xx / 2] += src[y * 2 * w + xx];
    }
  return dx;
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h, train);
  return h;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Param*> Sequential::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    auto ps = l->params();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

}  // namespace casgen::nn
