#include "casgen/diffusion/class_encoder.hpp"

#include <stdexcept>

namespace casgen::diffusion {

ClassEncoder::ClassEncoder(int num_classes, int d_cond, nn::Rng& rng)
    : weight_("class_encoder.weight", {d_cond, num_classes}),
      bias_("class_encoder.bias", {d_cond}),
      null_("class_encoder.null", {d_cond}),
      num_classes_(num_classes),
      d_cond_(d_cond) {
  if (num_classes < 1 || d_cond < 1)
    throw std::invalid_argument("ClassEncoder: bad dimensions");
  nn::he_normal_init(weight_.value, num_classes, rng);
  nn::he_normal_init(null_.value, num_classes, rng);
}

std::vector<double> ClassEncoder::encode(int class_id) const {
  if (class_id < 0 || class_id >= num_classes_)
    throw std::out_of_range("ClassEncoder::encode: class_id out of range");
  std::vector<double> out(static_cast<size_t>(d_cond_));
  for (int i = 0; i < d_cond_; ++i)
    out[static_cast<size_t>(i)] =
        weight_.value[static_cast<std::int64_t>(i) * num_classes_ + class_id] + bias_.value[i];
  return out;
}

void ClassEncoder::accumulate_grad(int class_id, const double* dcond) {
  for (int i = 0; i < d_cond_; ++i) {
    weight_.grad[static_cast<std::int64_t>(i) * num_classes_ + class_id] += dcond[i];
    bias_.grad[i] += dcond[i];
  }
}

void ClassEncoder::accumulate_null_grad(const double* dcond) {
  for (int i = 0; i < d_cond_; ++i) null_.grad[i] += dcond[i];
}

std::vector<double> encode_class(const ClassEncoder& enc, int class_id) {
  return enc.encode(class_id);
}

}  // namespace casgen::diffusion
