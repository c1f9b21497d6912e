#include "casgen/nn/tensor.hpp"

#include <algorithm>

namespace casgen::nn {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  for (int d : shape_) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
  }
  data_.assign(static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

MatMap Tensor::mat(int rows, int cols) {
  if (static_cast<std::int64_t>(rows) * cols != size())
    throw std::invalid_argument("Tensor::mat: shape mismatch");
  return MatMap(data_.data(), rows, cols);
}

ConstMatMap Tensor::mat(int rows, int cols) const {
  if (static_cast<std::int64_t>(rows) * cols != size())
    throw std::invalid_argument("Tensor::mat: shape mismatch");
  return ConstMatMap(data_.data(), rows, cols);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

}  // namespace casgen::nn
