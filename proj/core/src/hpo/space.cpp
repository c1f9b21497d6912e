#include "casgen/hpo/space.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace casgen::hpo {

void SearchSpace::validate() const {
  if (params.empty()) throw std::invalid_argument("search space has no parameters");
  std::set<std::string> names;
  for (const auto& p : params) {
    if (p.name.empty()) throw std::invalid_argument("parameter name must be non-empty");
    if (!names.insert(p.name).second)
      throw std::invalid_argument("duplicate parameter name: " + p.name);
    if (!(p.lower <= p.upper))
      throw std::invalid_argument("parameter " + p.name + " has lower > upper");
    if (p.integer && (std::floor(p.lower) != p.lower || std::floor(p.upper) != p.upper))
      throw std::invalid_argument("integer parameter " + p.name + " needs integer bounds");
  }
}

int SearchSpace::index_of(const std::string& name) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  throw std::out_of_range("no such parameter: " + name);
}

bool SearchSpace::contains(const Assignment& a) const {
  if (a.size() != params.size()) return false;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (a[i] < p.lower || a[i] > p.upper) return false;
    if (p.integer && std::floor(a[i]) != a[i]) return false;
  }
  return true;
}

Assignment SearchSpace::sample_uniform(nn::Rng& rng) const {
  Assignment a(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.integer) {
      a[i] = static_cast<double>(
          nn::rand_int(rng, static_cast<int>(p.lower), static_cast<int>(p.upper)));
    } else {
      a[i] = nn::rand_uniform(rng, p.lower, p.upper);
    }
  }
  return a;
}

}  // namespace casgen::hpo
