#pragma once

#include "casgen/nn/tensor.hpp"

#include <vector>

namespace casgen::eval {

/// Cross-entropy against the smoothed target: (1 - eps) on the label,
/// eps / C on every class (uniform-over-all convention).
double smoothed_cross_entropy(const std::vector<double>& logits, int label, double eps);

/// Mean smoothed cross-entropy over a batch of logits (N, C); when dlogits is
/// non-null it receives d(mean loss)/d(logits).
double smoothed_cross_entropy_batch(const nn::Tensor& logits, const std::vector<int>& labels,
                                    double eps, nn::Tensor* dlogits = nullptr);

/// Row-wise softmax of (N, C) logits.
nn::Tensor softmax(const nn::Tensor& logits);

}  // namespace casgen::eval
