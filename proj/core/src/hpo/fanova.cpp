#include "casgen/hpo/fanova.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace casgen::hpo {
namespace {

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;
};

struct Leaf {
  double value = 0.0;
  std::vector<double> lo, hi;
};

class RegressionTree {
 public:
  RegressionTree(const std::vector<Assignment>& xs, const std::vector<double>& ys,
                 const std::vector<int>& sample, int max_depth) {
    build(xs, ys, sample, max_depth, 0);
  }

  void collect_leaves(std::vector<double> lo, std::vector<double> hi, std::vector<Leaf>& out,
                      int node = 0) const {
    const TreeNode& n = nodes_[node];
    if (n.feature < 0) {
      out.push_back({n.value, lo, hi});
      return;
    }
    const double save = hi[n.feature];
    hi[n.feature] = n.threshold;
    collect_leaves(lo, hi, out, n.left);
    hi[n.feature] = save;
    lo[n.feature] = n.threshold;
    collect_leaves(std::move(lo), std::move(hi), out, n.right);
  }

 private:
  int build(const std::vector<Assignment>& xs, const std::vector<double>& ys,
            const std::vector<int>& idx, int max_depth, int depth) {
    const int node = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double mean = 0.0;
    for (int i : idx) mean += ys[i];
    mean /= static_cast<double>(idx.size());
    nodes_[node].value = mean;
    if (depth >= max_depth || idx.size() < 2) return node;

    const int d = static_cast<int>(xs[0].size());
    int best_f = -1;
    double best_thr = 0.0, best_sse = std::numeric_limits<double>::infinity();
    std::vector<int> order(idx);
    for (int f = 0; f < d; ++f) {
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return xs[a][f] < xs[b][f]; });
      double lsum = 0.0, lsq = 0.0;
      double rsum = 0.0, rsq = 0.0;
      for (int i : order) {
        rsum += ys[i];
        rsq += ys[i] * ys[i];
      }
      for (size_t k = 0; k + 1 < order.size(); ++k) {
        const double y = ys[order[k]];
        lsum += y;
        lsq += y * y;
        rsum -= y;
        rsq -= y * y;
        const double a = xs[order[k]][f], b = xs[order[k + 1]][f];
        if (a == b) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = static_cast<double>(order.size() - k - 1);
        const double sse = (lsq - lsum * lsum / nl) + (rsq - rsum * rsum / nr);
        if (sse < best_sse) {
          best_sse = sse;
          best_f = f;
          best_thr = 0.5 * (a + b);
        }
      }
    }
    if (best_f < 0) return node;

    std::vector<int> left, right;
    for (int i : idx) (xs[i][best_f] <= best_thr ? left : right).push_back(i);
    if (left.empty() || right.empty()) return node;
    nodes_[node].feature = best_f;
    nodes_[node].threshold = best_thr;
    nodes_[node].left = build(xs, ys, left, max_depth, depth + 1);
    nodes_[node].right = build(xs, ys, right, max_depth, depth + 1);
    return node;
  }

  std::vector<TreeNode> nodes_;
};

double overlap_fraction(const Leaf& a, const Leaf& b, int d, double total) {
  const double lo = std::max(a.lo[d], b.lo[d]);
  const double hi = std::min(a.hi[d], b.hi[d]);
  if (total <= 0.0) return 1.0;  // zero-width parameter: everything coincides
  return std::max(0.0, hi - lo) / total;
}

}  // namespace

void ImportanceReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write importance csv: " + path);
  out << "parameter,fraction,stage\n";
  for (size_t i = 0; i < names.size(); ++i)
    out << names[i] << "," << individual[i] << "," << stage << "\n";
  for (const auto& [i, j, frac] : pairs)
    out << names[i] << "*" << names[j] << "," << frac << "," << stage << "\n";
}

ImportanceReport fanova_importance(const SearchSpace& space, const std::vector<Trial>& completed,
                                   const FanovaSettings& settings, const std::string& stage) {
  space.validate();
  const int d = static_cast<int>(space.params.size());
  const int n = static_cast<int>(completed.size());
  if (n < 2 * d)
    throw std::invalid_argument("fanova needs at least 2 trials per parameter");

  std::vector<Assignment> xs;
  std::vector<double> ys;
  xs.reserve(n);
  ys.reserve(n);
  for (const auto& t : completed) {
    if (t.state != TrialState::complete) throw std::invalid_argument("fanova needs complete trials");
    xs.push_back(t.params);
    ys.push_back(t.objective);
  }

  std::vector<double> lo(d), hi(d), width(d);
  for (int k = 0; k < d; ++k) {
    lo[k] = space.params[k].lower;
    hi[k] = space.params[k].upper;
    width[k] = hi[k] - lo[k];
  }

  ImportanceReport report;
  report.stage = stage;
  for (const auto& p : space.params) report.names.push_back(p.name);
  report.individual.assign(d, 0.0);
  std::vector<std::vector<double>> pair_sum(d, std::vector<double>(d, 0.0));

  for (int tree_idx = 0; tree_idx < settings.num_trees; ++tree_idx) {
    nn::Rng rng(nn::derive_seed(settings.seed, 0xfa70, tree_idx));
    std::vector<int> sample(n);
    for (int& s : sample) s = nn::rand_int(rng, 0, n - 1);
    RegressionTree tree(xs, ys, sample, settings.max_depth);
    std::vector<Leaf> leaves;
    tree.collect_leaves(lo, hi, leaves);
    const int nl = static_cast<int>(leaves.size());

    // Per-leaf marginal cell fractions and weights under the uniform measure.
    std::vector<std::vector<double>> frac(nl, std::vector<double>(d));
    std::vector<double> w(nl, 1.0);
    for (int l = 0; l < nl; ++l)
      for (int k = 0; k < d; ++k) {
        frac[l][k] = width[k] > 0.0 ? (leaves[l].hi[k] - leaves[l].lo[k]) / width[k] : 1.0;
        w[l] *= frac[l][k];
      }
    double mean = 0.0, second = 0.0;
    for (int l = 0; l < nl; ++l) {
      mean += w[l] * leaves[l].value;
      second += w[l] * leaves[l].value * leaves[l].value;
    }
    const double total_var = second - mean * mean;
    if (total_var <= 1e-12) continue;  // constant surrogate contributes zero fractions

    // Raw marginal variances from pairwise leaf-box overlaps.
    std::vector<double> vi(d, 0.0);
    std::vector<std::vector<double>> vij(d, std::vector<double>(d, 0.0));
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nl; ++b) {
        const double base = leaves[a].value * leaves[b].value * w[a] * w[b];
        if (base == 0.0) continue;
        std::vector<double> ratio(d);
        for (int k = 0; k < d; ++k) {
          const double ov = overlap_fraction(leaves[a], leaves[b], k, width[k]);
          ratio[k] = ov / (frac[a][k] * frac[b][k]);
        }
        for (int i = 0; i < d; ++i) {
          vi[i] += base * ratio[i];
          for (int j = i + 1; j < d; ++j) vij[i][j] += base * ratio[i] * ratio[j];
        }
      }
    for (int i = 0; i < d; ++i) vi[i] -= mean * mean;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) vij[i][j] -= mean * mean;

    for (int i = 0; i < d; ++i)
      report.individual[i] += std::clamp(vi[i] / total_var, 0.0, 1.0);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        const double partial = vij[i][j] - vi[i] - vi[j];
        pair_sum[i][j] += std::clamp(partial / total_var, 0.0, 1.0);
      }
  }

  const double trees = static_cast<double>(settings.num_trees);
  for (int i = 0; i < d; ++i) report.individual[i] /= trees;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      report.pairs.emplace_back(i, j, pair_sum[i][j] / trees);
  return report;
}

}  // namespace casgen::hpo
