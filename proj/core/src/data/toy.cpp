#include "casgen/data/toy.hpp"

#include "casgen/nn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace casgen::data {
namespace {

// Signed distance to the shape boundary in unit coordinates (negative inside).
double shape_sdf(int shape, double x, double y, double r) {
  switch (shape) {
    case 0:  // circle
      return std::sqrt(x * x + y * y) - r;
    case 1:  // square
      return std::max(std::abs(x), std::abs(y)) - r;
    case 2: {  // triangle (upward)
      const double k = std::sqrt(3.0);
      double d1 = y - (-r);                     // below base
      double d2 = (k * x + y) / 2.0 - r * 0.5;  // right edge
      double d3 = (-k * x + y) / 2.0 - r * 0.5; // left edge
      return std::max({-d1, d2, d3});
    }
    case 3: {  // diamond
      return (std::abs(x) + std::abs(y)) - r * 1.2;
    }
    case 4: {  // cross
      const double w = r * 0.4;
      const double dx = std::max(std::abs(x) - r, std::abs(y) - w);
      const double dy = std::max(std::abs(y) - r, std::abs(x) - w);
      return std::min(dx, dy);
    }
    default: {  // ring
      const double d = std::sqrt(x * x + y * y);
      return std::max(d - r, (r * 0.55) - d);
    }
  }
}

constexpr int kPalette[12][3] = {
    {220, 50, 40},  {40, 200, 60},   {40, 80, 220},  {230, 200, 40},
    {200, 50, 200}, {40, 200, 200},  {240, 130, 30}, {130, 60, 220},
    {120, 200, 40}, {220, 60, 120},  {60, 130, 130}, {180, 180, 200},
};

}  // namespace

LabeledDataset make_toy_dataset(const ToySpec& spec) {
  if (spec.num_classes < 1) throw std::invalid_argument("make_toy_dataset: num_classes < 1");
  if (spec.resolution < 8) throw std::invalid_argument("make_toy_dataset: resolution < 8");

  std::vector<long> counts = spec.counts;
  if (counts.empty()) counts.assign(static_cast<size_t>(spec.num_classes), spec.per_class);
  if (static_cast<int>(counts.size()) != spec.num_classes)
    throw std::invalid_argument("make_toy_dataset: counts size mismatch");

  LabeledDataset ds;
  ds.num_classes = spec.num_classes;
  ds.split = spec.split;
  ds.provenance = Provenance::real;
  for (int c = 0; c < spec.num_classes; ++c) ds.class_names.push_back("class" + std::to_string(c));
  ds.meta["generator"] = "toy-shapes";
  ds.meta["variant"] = std::to_string(spec.variant);
  ds.meta["seed"] = std::to_string(spec.seed);
  ds.meta["resolution"] = std::to_string(spec.resolution);

  const int res = spec.resolution;
  const double px = 2.0 / res;  // antialias width in unit coords

  for (int cls = 0; cls < spec.num_classes; ++cls) {
    const int shape = (cls + 2 * spec.variant) % 6;
    const int* color = kPalette[(cls + 6 * spec.variant) % 12];
    for (long i = 0; i < counts[static_cast<size_t>(cls)]; ++i) {
      nn::Rng rng(nn::derive_seed(spec.seed, (static_cast<std::uint64_t>(spec.variant) << 32) |
                                                 static_cast<std::uint64_t>(cls),
                                  static_cast<std::uint64_t>(i) |
                                      (spec.split == Split::test ? 1ULL << 48 : 0)));
      const double cx = nn::rand_uniform(rng, -0.25, 0.25);
      const double cy = nn::rand_uniform(rng, -0.25, 0.25);
      const double r = nn::rand_uniform(rng, 0.35, 0.55);
      const double bg = nn::rand_uniform(rng, 15.0, 55.0);
      double fg[3];
      for (int ch = 0; ch < 3; ++ch)
        fg[ch] = std::clamp(color[ch] + nn::rand_uniform(rng, -30.0, 30.0), 0.0, 255.0);

      ImageTensor raw(res, res, 3);
      for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
          const double ux = (x + 0.5) / res * 2.0 - 1.0 - cx;
          const double uy = (y + 0.5) / res * 2.0 - 1.0 - cy;
          const double d = shape_sdf(shape, ux, uy, r);
          const double cov = std::clamp(0.5 - d / px, 0.0, 1.0);
          for (int ch = 0; ch < 3; ++ch)
            raw.at(ch, y, x) = std::round(bg + cov * (fg[ch] - bg));
        }
      }
      ds.images.push_back(normalize_to_unit_range(raw));
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

}  // namespace casgen::data
