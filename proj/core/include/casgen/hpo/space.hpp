#pragma once

#include "casgen/nn/rng.hpp"

#include <string>
#include <vector>

namespace casgen::hpo {

struct ParamSpec {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  bool integer = false;
};

/// Assignment values aligned with SearchSpace::params; integer parameters
/// hold whole numbers.
using Assignment = std::vector<double>;

struct SearchSpace {
  std::vector<ParamSpec> params;

  void validate() const;  // lower <= upper, names unique and non-empty
  int index_of(const std::string& name) const;
  bool contains(const Assignment& a) const;

  Assignment sample_uniform(nn::Rng& rng) const;
};

}  // namespace casgen::hpo
