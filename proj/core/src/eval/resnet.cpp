#include "casgen/eval/resnet.hpp"

#include <sstream>
#include <stdexcept>

namespace casgen::eval {

void ClassifierConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("classifier needs >= 2 classes");
  if (input_channels < 1) throw std::invalid_argument("input_channels must be positive");
  if (resolution < 8) throw std::invalid_argument("resolution must be >= 8");
  if (base_width < 1) throw std::invalid_argument("base_width must be positive");
  if (blocks_per_stage < 1) throw std::invalid_argument("blocks_per_stage must be positive");
}

std::string ClassifierConfig::describe() const {
  std::ostringstream os;
  os << "resnet-c" << num_classes << "-w" << base_width << "-b" << blocks_per_stage << "-r"
     << resolution;
  return os.str();
}

nn::Tensor ResNetClassifier::BasicBlock::forward(const nn::Tensor& x, bool train) {
  nn::Tensor h = conv1->forward(x, train);
  h = bn1->forward(h, train);
  h = relu1.forward(h, train);
  h = conv2->forward(h, train);
  h = bn2->forward(h, train);

  nn::Tensor shortcut = x;
  if (proj) {
    shortcut = proj->forward(x, train);
    shortcut = proj_bn->forward(shortcut, train);
  }
  for (size_t i = 0; i < h.size(); ++i) h[i] += shortcut[i];
  return relu_out.forward(h, train);
}

nn::Tensor ResNetClassifier::BasicBlock::backward(const nn::Tensor& dy) {
  nn::Tensor dsum = relu_out.backward(dy);

  nn::Tensor dx_short = dsum;
  if (proj) {
    dx_short = proj_bn->backward(dx_short);
    dx_short = proj->backward(dx_short);
  }

  nn::Tensor d = bn2->backward(dsum);
  d = conv2->backward(d);
  d = relu1.backward(d);
  d = bn1->backward(d);
  d = conv1->backward(d);

  for (size_t i = 0; i < d.size(); ++i) d[i] += dx_short[i];
  return d;
}

void ResNetClassifier::BasicBlock::collect(std::vector<nn::Param*>& out) {
  for (auto* p : conv1->params()) out.push_back(p);
  for (auto* p : bn1->params()) out.push_back(p);
  for (auto* p : conv2->params()) out.push_back(p);
  for (auto* p : bn2->params()) out.push_back(p);
  if (proj) {
    for (auto* p : proj->params()) out.push_back(p);
    for (auto* p : proj_bn->params()) out.push_back(p);
  }
}

ResNetClassifier::ResNetClassifier(const ClassifierConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(nn::derive_seed(seed, 0x7265736eULL));
  const int w = cfg_.base_width;
  stem_ = std::make_unique<nn::Conv2d>(cfg_.input_channels, w, 3, 1, 1, rng);
  stem_bn_ = std::make_unique<nn::BatchNorm2d>(w);

  int in_ch = w;
  for (int stage = 0; stage < 3; ++stage) {
    const int out_ch = w << stage;
    for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
      const int stride = (stage > 0 && b == 0) ? 2 : 1;
      BasicBlock blk;
      blk.conv1 = std::make_unique<nn::Conv2d>(in_ch, out_ch, 3, stride, 1, rng);
      blk.bn1 = std::make_unique<nn::BatchNorm2d>(out_ch);
      blk.conv2 = std::make_unique<nn::Conv2d>(out_ch, out_ch, 3, 1, 1, rng);
      blk.bn2 = std::make_unique<nn::BatchNorm2d>(out_ch);
      if (stride != 1 || in_ch != out_ch) {
        blk.proj = std::make_unique<nn::Conv2d>(in_ch, out_ch, 1, stride, 0, rng);
        blk.proj_bn = std::make_unique<nn::BatchNorm2d>(out_ch);
      }
      blocks_.push_back(std::move(blk));
      in_ch = out_ch;
    }
  }
  head_ = std::make_unique<nn::Linear>(in_ch, cfg_.num_classes, rng);
}

nn::Tensor ResNetClassifier::forward(const nn::Tensor& x, bool train) {
  nn::Tensor h = stem_->forward(x, train);
  h = stem_bn_->forward(h, train);
  h = stem_relu_.forward(h, train);
  for (auto& blk : blocks_) h = blk.forward(h, train);
  h = pool_.forward(h, train);
  return head_->forward(h, train);
}

void ResNetClassifier::backward(const nn::Tensor& dlogits) {
  nn::Tensor d = head_->backward(dlogits);
  d = pool_.backward(d);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = it->backward(d);
  d = stem_relu_.backward(d);
  d = stem_bn_->backward(d);
  stem_->backward(d);
}

std::vector<nn::Param*> ResNetClassifier::params() {
  std::vector<nn::Param*> out;
  for (auto* p : stem_->params()) out.push_back(p);
  for (auto* p : stem_bn_->params()) out.push_back(p);
  for (auto& blk : blocks_) blk.collect(out);
  for (auto* p : head_->params()) out.push_back(p);
  return out;
}

std::vector<nn::Tensor*> ResNetClassifier::buffers() {
  std::vector<nn::Tensor*> out{&stem_bn_->running_mean_, &stem_bn_->running_var_};
  for (auto& blk : blocks_) {
    out.push_back(&blk.bn1->running_mean_);
    out.push_back(&blk.bn1->running_var_);
    out.push_back(&blk.bn2->running_mean_);
    out.push_back(&blk.bn2->running_var_);
    if (blk.proj_bn) {
      out.push_back(&blk.proj_bn->running_mean_);
      out.push_back(&blk.proj_bn->running_var_);
    }
  }
  return out;
}

long ResNetClassifier::param_count() const {
  long total = 0;
  for (auto* p : const_cast<ResNetClassifier*>(this)->params())
    total += static_cast<long>(p->value.size());
  return total;
}

}  // namespace casgen::eval
