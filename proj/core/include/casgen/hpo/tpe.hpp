#pragma once

#include "casgen/hpo/study.hpp"

namespace casgen::hpo {

/// TPE suggestion over the completed trials of a maximizing study.  Below
/// n_startup completed trials this is a uniform draw; afterwards the top
/// gamma fraction (good) and the rest (bad) get per-parameter truncated
/// Gaussian KDEs, and the best of n_candidates draws from the good density
/// by density ratio l/g wins (ties -> lowest candidate index).
Assignment tpe_suggest(const SearchSpace& space, const std::vector<Trial>& completed,
                       const TpeSettings& settings, nn::Rng& rng);

/// Number of "good" trials for n completed: max(1, ceil(gamma * n)).
int tpe_good_count(int n_completed, double gamma);

}  // namespace casgen::hpo
