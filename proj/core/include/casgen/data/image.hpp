#pragma once

#include <vector>

namespace casgen::data {

/// Image with CHW layout. Raw ingested values lie in [0,255]; after
/// normalization all values lie in [-1,1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;  // channels*height*width

  ImageTensor() = default;
  ImageTensor(int h, int w, int c)
      : height(h), width(w), channels(c), values(static_cast<size_t>(h) * w * c, 0.0) {}

  double& at(int c, int y, int x) {
    return values[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return values[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

/// Resize to target x target, half-pixel-center convention:
/// source coordinate = (dst + 0.5) * scale - 0.5, clamped at borders.
ImageTensor bilinear_resize(const ImageTensor& img, int target);

/// v' = v/127.5 - 1. Input must lie in [0,255].
ImageTensor normalize_to_unit_range(const ImageTensor& img);

/// v = (v'+1)*127.5, clamped to [0,255]. Inverse of normalize_to_unit_range.
ImageTensor denormalize_from_unit_range(const ImageTensor& img);

}  // namespace casgen::data
