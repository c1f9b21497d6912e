#include "casgen/data/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace casgen::data {

ImageTensor bilinear_resize(const ImageTensor& img, int target) {
  if (target < 1) throw std::invalid_argument("bilinear_resize: target < 1");
  if (img.height == target && img.width == target) return img;
  ImageTensor out(target, target, img.channels);
  const double sy = static_cast<double>(img.height) / target;
  const double sx = static_cast<double>(img.width) / target;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < target; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
      const int y0 = static_cast<int>(std::floor(fy));
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double wy = fy - y0;
      for (int x = 0; x < target; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
        const int x0 = static_cast<int>(std::floor(fx));
        const int x1 = std::min(x0 + 1, img.width - 1);
        const double wx = fx - x0;
        out.at(c, y, x) = (1 - wy) * ((1 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x1)) +
                          wy * ((1 - wx) * img.at(c, y1, x0) + wx * img.at(c, y1, x1));
      }
    }
  }
  return out;
}

ImageTensor normalize_to_unit_range(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.values) {
    if (v < 0.0 || v > 255.0)
      throw std::invalid_argument("normalize_to_unit_range: value outside [0,255]");
    v = v / 127.5 - 1.0;
  }
  return out;
}

ImageTensor denormalize_from_unit_range(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.values) v = std::clamp((v + 1.0) * 127.5, 0.0, 255.0);
  return out;
}

}  // namespace casgen::data
