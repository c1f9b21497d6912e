#pragma once

#include "casgen/nn/rng.hpp"
#include "casgen/nn/tensor.hpp"

#include <memory>
#include <string>
#include <vector>

namespace casgen::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Param*> params() { return {}; }
};

/// 2-D convolution over NCHW batches, square kernel, zero padding.
class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  int out_height(int h) const { return (h + 2 * pad_ - kernel_) / stride_ + 1; }

  Param weight_;  // (out_ch, in_ch*k*k)
  Param bias_;    // (out_ch)

 private:
  void im2col(const double* img, int h, int w, double* col) const;
  void col2im(const double* col, int h, int w, double* img) const;

  int in_ch_, out_ch_, kernel_, stride_, pad_;
  Tensor x_;  // cached input
};

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim, Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  Param weight_;  // (out_dim, in_dim)
  Param bias_;    // (out_dim)

 private:
  int in_dim_, out_dim_;
  Tensor x_;
};

/// Batch normalization over (N,H,W) per channel with running statistics.
class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }

  Param gamma_, beta_;
  Tensor running_mean_, running_var_;

 private:
  int channels_;
  double eps_, momentum_;
  bool train_mode_ = true;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

/// Group normalization; statistics per (sample, group).
class GroupNorm : public Layer {
 public:
  GroupNorm(int groups, int channels, double eps = 1e-5);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }

  Param gamma_, beta_;

 private:
  int groups_, channels_;
  double eps_;
  Tensor xhat_;
  std::vector<double> inv_std_;  // per (n, group)
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor x_;
};

class SiLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor x_;
};

/// (N,C,H,W) -> (N,C) mean over spatial positions.
class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class UpsampleNearest2x : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class Sequential : public Layer {
 public:
  void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Param*> params() override;
  Layer& at(size_t i) { return *layers_.at(i); }
  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

void he_normal_init(Tensor& w, int fan_in, Rng& rng);

/// Collect every parameter of the given layers in declaration order.
std::vector<Param*> collect_params(const std::vector<Layer*>& layers);

}  // namespace casgen::nn
