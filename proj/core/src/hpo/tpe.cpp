#include "casgen/hpo/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace casgen::hpo {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

/// Equal-weight truncated-Gaussian mixture over [lo, hi], plus one uniform
/// "prior" component so a collapsed point set keeps exploring the range.
struct Kde {
  std::vector<double> centers;
  double bandwidth = 1.0;
  double lo = 0.0, hi = 1.0;

  Kde(std::vector<double> pts, double lo_, double hi_) : centers(std::move(pts)), lo(lo_), hi(hi_) {
    if (centers.empty()) return;  // degenerates to a uniform density
    const double n = static_cast<double>(centers.size());
    double mean = 0.0;
    for (double c : centers) mean += c;
    mean /= n;
    double var = 0.0;
    for (double c : centers) var += (c - mean) * (c - mean);
    var /= n;
    // Scott's rule, clipped below by range/(n+1) so small or collapsed point
    // sets keep wide kernels and the floor tightens as evidence accumulates.
    bandwidth = std::sqrt(var) * std::pow(n, -0.2);
    const double floor = (hi - lo) / (n + 1.0) + 1e-12;
    bandwidth = std::max(bandwidth, floor);
  }

  double uniform_density() const { return hi > lo ? 1.0 / (hi - lo) : 1.0; }

  double density(double x) const {
    if (centers.empty()) return uniform_density();
    double sum = uniform_density();  // the prior component
    for (double c : centers) {
      const double z = normal_cdf((hi - c) / bandwidth) - normal_cdf((lo - c) / bandwidth);
      if (z <= 0.0) continue;
      sum += normal_pdf((x - c) / bandwidth) / (bandwidth * z);
    }
    return sum / static_cast<double>(centers.size() + 1);
  }

  double sample(nn::Rng& rng) const {
    const int pick = nn::rand_int(rng, 0, static_cast<int>(centers.size()));
    if (pick == static_cast<int>(centers.size())) return nn::rand_uniform(rng, lo, hi);
    const double c = centers[static_cast<size_t>(pick)];
    for (int attempt = 0; attempt < 256; ++attempt) {
      const double x = c + bandwidth * nn::rand_normal(rng);
      if (x >= lo && x <= hi) return x;
    }
    return nn::rand_uniform(rng, lo, hi);
  }
};

}  // namespace

int tpe_good_count(int n_completed, double gamma) {
  return std::max(1, static_cast<int>(std::ceil(gamma * n_completed)));
}

Assignment tpe_suggest(const SearchSpace& space, const std::vector<Trial>& completed,
                       const TpeSettings& settings, nn::Rng& rng) {
  space.validate();
  const int n = static_cast<int>(completed.size());
  if (n < settings.n_startup) return space.sample_uniform(rng);

  std::vector<const Trial*> sorted;
  sorted.reserve(completed.size());
  for (const auto& t : completed) sorted.push_back(&t);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Trial* a, const Trial* b) { return a->objective > b->objective; });
  const int n_good = tpe_good_count(n, settings.gamma);

  const int d = static_cast<int>(space.params.size());
  std::vector<Kde> good, bad;
  good.reserve(d);
  bad.reserve(d);
  for (int k = 0; k < d; ++k) {
    const auto& p = space.params[k];
    std::vector<double> g, b;
    for (int i = 0; i < n; ++i)
      (i < n_good ? g : b).push_back(sorted[i]->params[k]);
    good.emplace_back(std::move(g), p.lower, p.upper);
    bad.emplace_back(std::move(b), p.lower, p.upper);
  }

  Assignment best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < settings.n_candidates; ++c) {
    Assignment cand(d);
    double score = 0.0;
    for (int k = 0; k < d; ++k) {
      double x = good[k].sample(rng);
      if (space.params[k].integer) x = std::round(x);
      cand[k] = x;
      const double l = good[k].density(x);
      const double g = bad[k].density(x);
      score += std::log(l + 1e-300) - std::log(g + 1e-300);
    }
    if (score > best_score) {  // strict: tie keeps the lowest candidate index
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

}  // namespace casgen::hpo
