#pragma once

#include "casgen/nn/layers.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace casgen::eval {

/// CIFAR-style ResNet20: 3x3 stem, three stages of `blocks_per_stage` basic
/// blocks at widths w/2w/4w with stride-2 transitions, global average pool,
/// affine head.  Defaults give the canonical 20-layer network.
struct ClassifierConfig {
  int num_classes = 10;
  int input_channels = 3;
  int resolution = 32;
  int base_width = 16;
  int blocks_per_stage = 3;

  void validate() const;
  std::string describe() const;
};

class ResNetClassifier {
 public:
  ResNetClassifier(const ClassifierConfig& cfg, std::uint64_t seed);

  /// x: (N, C, H, W) -> logits (N, num_classes).
  nn::Tensor forward(const nn::Tensor& x, bool train);
  void backward(const nn::Tensor& dlogits);

  std::vector<nn::Param*> params();
  /// Non-trained state (BatchNorm running statistics), for checkpointing.
  std::vector<nn::Tensor*> buffers();
  long param_count() const;
  const ClassifierConfig& config() const { return cfg_; }

 private:
  struct BasicBlock {
    std::unique_ptr<nn::Conv2d> conv1, conv2;
    std::unique_ptr<nn::BatchNorm2d> bn1, bn2;
    nn::ReLU relu1, relu_out;
    std::unique_ptr<nn::Conv2d> proj;      // 1x1 shortcut when shape changes
    std::unique_ptr<nn::BatchNorm2d> proj_bn;

    nn::Tensor forward(const nn::Tensor& x, bool train);
    nn::Tensor backward(const nn::Tensor& dy);
    void collect(std::vector<nn::Param*>& out);
  };

  ClassifierConfig cfg_;
  std::unique_ptr<nn::Conv2d> stem_;
  std::unique_ptr<nn::BatchNorm2d> stem_bn_;
  nn::ReLU stem_relu_;
  std::vector<BasicBlock> blocks_;
  nn::GlobalAvgPool pool_;
  std::unique_ptr<nn::Linear> head_;
};

}  // namespace casgen::eval
