#include "casgen/hpo/hyperband.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace casgen::hpo {
namespace {

/// Linear-interpolation quantile of a sorted-ascending vector, q in [0,1].
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

int hyperband_num_brackets(const HyperbandSettings& s) {
  int count = 0;
  long long r = s.min_resource;
  while (r <= s.max_resource) {
    ++count;
    r *= s.eta;
  }
  return std::max(count, 1);
}

std::vector<int> hyperband_rungs(const HyperbandSettings& s, int bracket) {
  std::vector<int> rungs;
  long long r = s.min_resource;
  for (int k = 0; r <= s.max_resource; ++k, r *= s.eta)
    if (k >= bracket) rungs.push_back(static_cast<int>(r));
  return rungs;
}

int hyperband_bracket_of(const HyperbandSettings& s, int trial_id) {
  return trial_id % hyperband_num_brackets(s);
}

bool hyperband_should_prune(const HyperbandSettings& s, const std::vector<Trial>& trials,
                            const Trial& trial) {
  if (trial.intermediate.empty())
    throw std::logic_error("should_prune needs at least one intermediate value");
  const int bracket = hyperband_bracket_of(s, trial.id);
  const int reached = trial.last_step();
  for (int rung : hyperband_rungs(s, bracket)) {
    if (rung > reached) break;
    std::vector<double> prior;
    for (const auto& other : trials) {
      if (other.id == trial.id) continue;
      if (hyperband_bracket_of(s, other.id) != bracket) continue;
      const double v = other.value_at(rung);
      if (!std::isnan(v) && other.last_step() >= rung) prior.push_back(v);
    }
    // The trial itself counts toward the eta trials that must reach the rung.
    if (static_cast<int>(prior.size()) + 1 < s.eta) continue;
    const double cutoff = quantile(std::move(prior), 1.0 - 1.0 / static_cast<double>(s.eta));
    if (trial.value_at(rung) < cutoff) return true;
  }
  return false;
}

}  // namespace casgen::hpo
