#pragma once

#include "casgen/hpo/study.hpp"

#include <string>
#include <tuple>
#include <vector>

namespace casgen::hpo {

struct FanovaSettings {
  int num_trees = 64;
  int max_depth = 64;
  std::uint64_t seed = 0;
};

struct ImportanceReport {
  std::string stage;
  std::vector<std::string> names;                  // per-parameter, space order
  std::vector<double> individual;                  // V_i / V
  std::vector<std::tuple<int, int, double>> pairs; // (i, j, V_ij / V), i < j

  void write_csv(const std::string& path) const;
};

/// Functional-ANOVA importances from a random-forest surrogate fit on the
/// completed trials (params -> objective).  Variance fractions are computed
/// per tree from the axis-aligned leaf partition and averaged; a zero-variance
/// surrogate yields all-zero fractions.  Needs >= 2 * num_params trials.
ImportanceReport fanova_importance(const SearchSpace& space, const std::vector<Trial>& completed,
                                   const FanovaSettings& settings = {},
                                   const std::string& stage = "");

}  // namespace casgen::hpo
