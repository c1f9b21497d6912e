#include "casgen/eval/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace casgen::eval {
namespace {

void check_eps(double eps) {
  if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("label smoothing must be in [0,1)");
}

}  // namespace

nn::Tensor softmax(const nn::Tensor& logits) {
  const int n = logits.dim(0), c = logits.dim(1);
  nn::Tensor out(logits.shape());
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + i * c;
    double* orow = out.data() + i * c;
    const double m = *std::max_element(row, row + c);
    double z = 0.0;
    for (int k = 0; k < c; ++k) z += (orow[k] = std::exp(row[k] - m));
    for (int k = 0; k < c; ++k) orow[k] /= z;
  }
  return out;
}

double smoothed_cross_entropy(const std::vector<double>& logits, int label, double eps) {
  check_eps(eps);
  const int c = static_cast<int>(logits.size());
  if (label < 0 || label >= c) throw std::out_of_range("label out of range");
  nn::Tensor t({1, c});
  std::copy(logits.begin(), logits.end(), t.data());
  return smoothed_cross_entropy_batch(t, {label}, eps);
}

double smoothed_cross_entropy_batch(const nn::Tensor& logits, const std::vector<int>& labels,
                                    double eps, nn::Tensor* dlogits) {
  check_eps(eps);
  if (logits.ndim() != 2) throw std::invalid_argument("logits must be (N, C)");
  const int n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) throw std::invalid_argument("label count mismatch");

  nn::Tensor probs = softmax(logits);
  if (dlogits) *dlogits = nn::Tensor(logits.shape());
  double loss = 0.0;
  const double off = eps / static_cast<double>(c);
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= c) throw std::out_of_range("label out of range");
    const double* row = logits.data() + i * c;
    const double* prow = probs.data() + i * c;
    const double m = *std::max_element(row, row + c);
    double z = 0.0;
    for (int k = 0; k < c; ++k) z += std::exp(row[k] - m);
    const double logz = std::log(z) + m;
    for (int k = 0; k < c; ++k) {
      const double target = off + (k == y ? 1.0 - eps : 0.0);
      loss -= target * (row[k] - logz);
      if (dlogits) (*dlogits)[i * c + k] = (prow[k] - target) / static_cast<double>(n);
    }
  }
  return loss / static_cast<double>(n);
}

}  // namespace casgen::eval
