#pragma once

#include "casgen/hpo/study.hpp"

namespace casgen::hpo {

/// Rung resources r * eta^k <= R for bracket s: the bracket skips its first
/// s rungs of the base schedule.
std::vector<int> hyperband_rungs(const HyperbandSettings& s, int bracket);

/// Number of brackets s_max + 1 with s_max = floor(log_eta(R / r)).
int hyperband_num_brackets(const HyperbandSettings& s);

/// Bracket assignment by round-robin over trial id.
int hyperband_bracket_of(const HyperbandSettings& s, int trial_id);

/// True when the trial sits below the top-1/eta quantile of prior same-bracket
/// values at a rung it has crossed.  Never prunes with fewer than eta prior
/// trials at the rung.
bool hyperband_should_prune(const HyperbandSettings& s, const std::vector<Trial>& trials,
                            const Trial& trial);

}  // namespace casgen::hpo
