#pragma once

#include "casgen/nn/layers.hpp"

#include <vector>

namespace casgen::diffusion {

/// Affine map from one-hot class vectors to the conditioning space, plus a
/// learned null embedding for classifier-free guidance.
class ClassEncoder {
 public:
  ClassEncoder(int num_classes, int d_cond, nn::Rng& rng);

  int num_classes() const { return num_classes_; }
  int d_cond() const { return d_cond_; }

  /// weight[:, class_id] + bias. class_id must lie in [0, C).
  std::vector<double> encode(int class_id) const;
  const nn::Tensor& null_embedding() const { return null_.value; }

  /// Accumulates the gradient of a conditioning row into the encoder params.
  void accumulate_grad(int class_id, const double* dcond);
  void accumulate_null_grad(const double* dcond);

  std::vector<nn::Param*> params() { return {&weight_, &bias_, &null_}; }
  std::vector<const nn::Param*> params() const { return {&weight_, &bias_, &null_}; }

  nn::Param weight_;  // (d_cond, C)
  nn::Param bias_;    // (d_cond)
  nn::Param null_;    // (d_cond)

 private:
  int num_classes_, d_cond_;
};

std::vector<double> encode_class(const ClassEncoder& enc, int class_id);

}  // namespace casgen::diffusion
