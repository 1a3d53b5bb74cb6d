#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "equiprune/common.hpp"

namespace equiprune {

/// A Subset-Sum query: pick a subset of `values` whose sum approximates
/// `target`; `epsilon` is the tolerance the caller wants certified.
struct SubsetSumInstance {
  std::vector<double> values;
  double target = 0.0;
  double epsilon = 0.0;

  void validate() const {
    if (values.size() > 64) throw SizeCapError("subset-sum instances hold at most 64 values");
    for (double v : values)
      if (!std::isfinite(v)) throw Error("subset-sum values must be finite");
  }
};

/**
 * Result of one Subset-Sum solve. Bit i of `mask` selects values[i].
 * `achieved` is the canonical sum of the selected values (see ExactSolver
 * for the summation order), `residual` the nonnegative distance
 * |target - achieved|, and `optimal` marks exhaustively proved minimality.
 */
struct SubsetSumResult {
  std::uint64_t mask = 0;
  double achieved = 0.0;
  double residual = 0.0;
  bool optimal = false;
};

/**
 * Meet-in-the-middle exact solver over at most 40 values. The value list is
 * split into a left half (indices [0, n_left)) and a right half; each half
 * enumerates all subsets once, so repeated targets share the tables.
 *
 * Canonical summation: within a half, selected values accumulate in
 * descending index order, and the total is left_sum + right_sum. Optimality
 * ties break by fewer selected values, then the numerically smallest mask;
 * this makes the result unique and reproducible.
 */
class ExactSolver {
 public:
  static constexpr int kMaxValues = 40;

  explicit ExactSolver(std::vector<double> values) : values_(std::move(values)) {
    const int n = static_cast<int>(values_.size());
    if (n > kMaxValues) throw SizeCapError("exact subset-sum limited to 40 values");
    for (double v : values_)
      if (!std::isfinite(v)) throw Error("subset-sum values must be finite");
    n_left_ = (n + 1) / 2;
    const int n_right = n - n_left_;
    left_sums_ = half_sums(0, n_left_);
    right_.resize(std::size_t(1) << n_right);
    const std::vector<double> rs = half_sums(n_left_, n_right);
    for (std::uint32_t m = 0; m < right_.size(); ++m)
      right_[m] = {rs[m], static_cast<std::uint8_t>(std::popcount(m)), m};
    std::sort(right_.begin(), right_.end(), [](const Entry& a, const Entry& b) {
      if (a.sum != b.sum) return a.sum < b.sum;
      if (a.pc != b.pc) return a.pc < b.pc;
      return a.mask < b.mask;
    });
    left_sorted_ = left_sums_;
    std::sort(left_sorted_.begin(), left_sorted_.end());
    right_sorted_.reserve(right_.size());
    for (const Entry& e : right_) right_sorted_.push_back(e.sum);
  }

  int size() const { return static_cast<int>(values_.size()); }

  SubsetSumResult solve(double target) const {
    SubsetSumResult best;
    best.residual = std::numeric_limits<double>::infinity();
    auto consider = [&](std::uint32_t ml, double sl, const Entry& r) {
      const double achieved = sl + r.sum;
      const double res = std::abs(achieved - target);
      const std::uint64_t mask = std::uint64_t(ml) | (std::uint64_t(r.mask) << n_left_);
      const int pc = std::popcount(mask);
      bool better = res < best.residual;
      if (res == best.residual) {
        const int bpc = std::popcount(best.mask);
        better = pc < bpc || (pc == bpc && mask < best.mask);
      }
      if (better) best = {mask, achieved, res, true};
    };
    for (std::uint32_t ml = 0; ml < left_sums_.size(); ++ml) {
      const double sl = left_sums_[ml];
      const double needed = target - sl;
      auto it = std::lower_bound(right_.begin(), right_.end(), needed,
                                 [](const Entry& e, double t) { return e.sum < t; });
      if (it != right_.end()) consider(ml, sl, *run_start(it));
      if (it != right_.begin()) consider(ml, sl, *run_start(std::prev(it)));
    }
    return best;
  }

  /**
   * Minimum achievable |target - sum| without recovering a mask. Sweeps the
   * two sorted half-sum tables with opposing pointers, which visits the same
   * candidate pairs as solve() and therefore returns exactly its residual.
   */
  double min_abs_residual(double target) const {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t nr = right_sorted_.size();
    std::size_t j = nr;
    for (double sl : left_sorted_) {
      const double needed = target - sl;
      while (j > 0 && right_sorted_[j - 1] >= needed) --j;
      if (j < nr) best = std::min(best, std::abs(sl + right_sorted_[j] - target));
      if (j > 0) best = std::min(best, std::abs(sl + right_sorted_[j - 1] - target));
    }
    return best;
  }

 private:
  struct Entry {
    double sum;
    std::uint8_t pc;
    std::uint32_t mask;
  };

  // first entry sharing it->sum; sort order makes it the best tie-break
  std::vector<Entry>::const_iterator run_start(std::vector<Entry>::const_iterator it) const {
    return std::lower_bound(right_.begin(), it, it->sum,
                            [](const Entry& e, double s) { return e.sum < s; });
  }

  // sums[m] built by stripping the lowest set bit, which accumulates the
  // selected values in descending index order
  std::vector<double> half_sums(int offset, int count) const {
    std::vector<double> sums(std::size_t(1) << count);
    sums[0] = 0.0;
    for (std::uint32_t m = 1; m < sums.size(); ++m) {
      const int low = std::countr_zero(m);
      sums[m] = sums[m & (m - 1)] + values_[offset + low];
    }
    return sums;
  }

  std::vector<double> values_;
  int n_left_ = 0;
  std::vector<double> left_sums_;
  std::vector<double> left_sorted_;
  std::vector<double> right_sorted_;
  std::vector<Entry> right_;
};

inline SubsetSumResult solve_exact(const std::vector<double>& values, double target) {
  return ExactSolver(values).solve(target);
}

inline SubsetSumResult solve_exact(const SubsetSumInstance& inst) {
  inst.validate();
  return solve_exact(inst.values, inst.target);
}

/**
 * Greedy baseline: scan values by descending magnitude and keep any value
 * that moves the running sum strictly closer to the target. Never better
 * than the exact solver, never worse than the empty subset; no size cap.
 */
inline SubsetSumResult solve_greedy(const std::vector<double>& values, double target) {
  if (values.size() > 64) throw SizeCapError("subset-sum masks hold at most 64 values");
  std::vector<int> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  SubsetSumResult r;
  for (int i : order) {
    const double next = r.achieved + values[i];
    if (std::abs(target - next) < std::abs(target - r.achieved)) {
      r.achieved = next;
      r.mask |= std::uint64_t(1) << i;
    }
  }
  r.residual = std::abs(r.achieved - target);
  r.optimal = false;
  return r;
}

inline SubsetSumResult solve_greedy(const SubsetSumInstance& inst) {
  inst.validate();
  return solve_greedy(inst.values, inst.target);
}

/// Sign of the uniform factor U in the product distribution.
enum class Half { Positive, Negative };

/// Base law of the nonzero mixture component; only the product of uniforms
/// carries approximation guarantees, the others are exploratory hooks.
enum class BaseDistribution { ProductUniform, Uniform, Gaussian };

/**
 * One draw from the mixture 1/2 * delta_0 + 1/2 * P: a fair coin decides
 * between exactly zero and a draw from P. For the default base, P is the law
 * of U * V with U uniform on [0,1] (or [-1,0] for the negative half) and V
 * uniform on [-1,1].
 */
inline double sample_product_value(Rng& rng, Half half = Half::Positive,
                                   BaseDistribution base = BaseDistribution::ProductUniform) {
  const double coin = rng.unit();
  switch (base) {
    case BaseDistribution::ProductUniform: {
      double u = rng.unit();
      const double v = rng.uniform(-1.0, 1.0);
      if (half == Half::Negative) u = -u;
      return coin < 0.5 ? 0.0 : u * v;
    }
    case BaseDistribution::Uniform: {
      const double v = rng.uniform(-1.0, 1.0);
      return coin < 0.5 ? 0.0 : v;
    }
    case BaseDistribution::Gaussian: {
      // Box-Muller; both uniforms are consumed unconditionally
      const double a = rng.unit();
      const double b = rng.unit();
      const double g = std::sqrt(-2.0 * std::log(1.0 - a)) * std::cos(6.283185307179586 * b);
      return coin < 0.5 ? 0.0 : g;
    }
  }
  throw Error("unknown base distribution");
}

/// n iid draws from the mixture, deterministic under the seed.
inline std::vector<double> sample_product_distribution(
    int n, Half half, std::uint64_t seed,
    BaseDistribution base = BaseDistribution::ProductUniform) {
  if (n < 0) throw Error("sample count must be nonnegative");
  Rng rng(seed);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = sample_product_value(rng, half, base);
  return out;
}

/**
 * Interior epsilon-net of [-1, 1]: points -1 + j*epsilon for
 * j = 1 .. ceil(2/epsilon) - 1. Every z in [-1, 1] lies within epsilon of a
 * net point, so solver residuals <= epsilon on the net certify 2*epsilon
 * accuracy for the whole interval.
 */
inline std::vector<double> existence_target_grid(double epsilon, int targets_per_trial = 0) {
  if (epsilon <= 0.0) throw Error("net spacing must be positive");
  const int points = targets_per_trial > 0
                         ? targets_per_trial
                         : static_cast<int>(std::ceil(2.0 / epsilon)) - 1;
  std::vector<double> targets(static_cast<std::size_t>(std::max(points, 0)));
  for (int j = 0; j < points; ++j) targets[static_cast<std::size_t>(j)] = -1.0 + (j + 1) * epsilon;
  return targets;
}

/**
 * Fraction of trials in which n random values approximate every target on
 * the epsilon-net to within epsilon, using the exact solver. Pass
 * targets_per_trial = 0 for the default net size ceil(2/epsilon) - 1.
 */
inline double existence_rate(int n, double epsilon, int targets_per_trial, int trials,
                             std::uint64_t seed, Half half = Half::Positive,
                             BaseDistribution base = BaseDistribution::ProductUniform) {
  if (n < 0 || n > ExactSolver::kMaxValues)
    throw SizeCapError("existence probe width out of range");
  if (trials <= 0) throw Error("existence probe needs at least one trial");
  std::vector<double> targets = existence_target_grid(epsilon, targets_per_trial);
  // hardest targets first so failed trials exit early
  std::sort(targets.begin(), targets.end(),
            [](double a, double b) { return std::abs(a) > std::abs(b); });
  int successes = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<double> values(static_cast<std::size_t>(n));
    for (double& v : values) v = sample_product_value(rng, half, base);
    ExactSolver solver(std::move(values));
    bool ok = true;
    for (double target : targets) {
      if (solver.min_abs_residual(target) > epsilon) {
        ok = false;
        break;
      }
    }
    if (ok) ++successes;
  }
  return static_cast<double>(successes) / trials;
}

/**
 * Smallest width n in [0, 40] whose existence rate reaches `threshold`,
 * found by binary search (the rate is statistically non-decreasing in n).
 * Returns -1 if even the solver cap cannot reach the threshold.
 */
inline int minimal_width_for_rate(double epsilon, int trials, double threshold,
                                  std::uint64_t seed, int targets_per_trial = 0,
                                  Half half = Half::Positive,
                                  BaseDistribution base = BaseDistribution::ProductUniform) {
  int lo = 0, hi = ExactSolver::kMaxValues;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (existence_rate(mid, epsilon, targets_per_trial, trials, seed, half, base) >= threshold)
      hi = mid;
    else
      lo = mid + 1;
  }
  // the search assumed monotonicity; confirm the endpoint actually qualifies
  if (existence_rate(lo, epsilon, targets_per_trial, trials, seed, half, base) < threshold)
    return -1;
  return lo;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares fit y = slope * x + intercept with R^2.
inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw Error("line fit needs matching samples");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  const double vx = sxx - sx * sx / n;
  const double cxy = sxy - sx * sy / n;
  const double vy = syy - sy * sy / n;
  LineFit f;
  if (vx == 0.0) throw Error("line fit needs at least two distinct x values");
  f.slope = cxy / vx;
  f.intercept = (sy - f.slope * sx) / n;
  f.r2 = vy == 0.0 ? 1.0 : (cxy * cxy) / (vx * vy);
  return f;
}

}  // namespace equiprune
