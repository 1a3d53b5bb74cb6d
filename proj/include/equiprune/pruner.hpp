#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "equiprune/network.hpp"
#include "equiprune/subset_sum.hpp"

namespace equiprune {

enum class InitMode { Uniform, DeterministicBinary };

/// Which Subset-Sum routine resolves each pruning instance. Greedy trades
/// optimality for speed and typically raises the failure count.
enum class SolverKind { Exact, Greedy };

/**
 * One diamond: a pair of overparametrized layers replacing one target layer.
 * The first layer maps the n_i input blocks to n_tilde intermediate blocks
 * through the square basis (which must contain the identity); the second maps
 * them to the n_{i+1} output blocks through the target layer's basis. chi
 * assigns each intermediate block to the single input block feeding it.
 * Masks are 0/1 bytes aligned with the corresponding coefficient vectors;
 * coefficients keep their sampled values, masking happens at composition.
 */
struct DiamondBlock {
  CoefficientLayer first;
  CoefficientLayer second;
  std::vector<std::uint8_t> mask_first;
  std::vector<std::uint8_t> mask_second;
  int group_size = 1;

  int chi(int q) const { return q / group_size; }

  CoefficientLayer masked_first() const { return masked(first, mask_first); }
  CoefficientLayer masked_second() const { return masked(second, mask_second); }

 private:
  static CoefficientLayer masked(const CoefficientLayer& l,
                                 const std::vector<std::uint8_t>& m) {
    CoefficientLayer out = l;
    for (int i = 0; i < out.coeffs.size(); ++i)
      if (!m[static_cast<std::size_t>(i)]) out.coeffs[i] = 0.0;
    return out;
  }
};

/// Per-layer pruning outcome: signed per-coefficient errors of both ReLU
/// branches, indexed like the target coefficients, plus certificate pieces.
struct LayerPruneStats {
  Eigen::VectorXd err_pos;
  Eigen::VectorXd err_neg;
  double tolerance = 0.0;
  double layer_bound = 0.0;
  int failures = 0;
  int instances = 0;
  int truncated_instances = 0;
};

struct PruneReport {
  std::vector<LayerPruneStats> layers;
  double epsilon = 0.0;
  double delta = 0.0;
  double overparam_constant = 0.0;
  double network_bound = 0.0;
  double budget_ceiling = 0.0;  // (1 + eps/2l)^l - 1, the zero-failure ceiling
  bool recursion_check = false;
  double sampled_abs_error = -1.0;  // filled once certify_error has run
  double sampled_rel_error = -1.0;
  int total_failures = 0;
  long long target_params = 0;
  long long overparam_params = 0;
  long long pruned_params = 0;
  double ratio_overparam = 0.0;
  double ratio_pruned = 0.0;
};

struct PruneOutcome {
  std::vector<DiamondBlock> blocks;
  EquivariantNetwork pruned;
  PruneReport report;
};

/**
 * Intermediate width: ceil(C * n_i * ln(n_i * n_i1 * max(|B|, op-norm
 * constant) * l / min(epsilon, delta))), rounded up to a multiple of n_i so
 * the chi groups come out equal.
 */
inline int required_width(int n_i, int n_i1, const EquivariantBasis& basis, int l,
                          double epsilon, double delta, double C) {
  if (n_i < 1 || n_i1 < 1 || l < 1 || C <= 0.0)
    throw Error("width formula needs positive arguments");
  if (epsilon <= 0.0 || epsilon > 0.5 || delta <= 0.0 || delta > 0.5)
    throw Error("epsilon and delta must lie in (0, 1/2]");
  const double constant = std::max<double>(basis.cardinality(), basis.op_norm_bound);
  const double arg = n_i * n_i1 * constant * l / std::min(epsilon, delta);
  int w = static_cast<int>(std::ceil(C * n_i * std::log(arg)));
  w = std::max(w, n_i);
  return (w + n_i - 1) / n_i * n_i;
}

/**
 * Samples the two layers of a diamond. Uniform mode draws every coefficient
 * iid from U([-a, a]), first layer then second. The dyadic mode writes the
 * ladder +1, -1, +1/2, -1/2, ... into each chi group's identity coefficients,
 * sets every second-layer coefficient to the sign of its intermediate
 * block's ladder value, and leaves all other first-layer entries zero.
 */
inline DiamondBlock build_overparam_block(std::shared_ptr<const EquivariantBasis> square_basis,
                                          std::shared_ptr<const EquivariantBasis> next_basis,
                                          int n_i, int n_i1, int n_tilde, InitMode mode,
                                          double a, std::uint64_t seed) {
  if (square_basis->identity_index < 0)
    throw MissingIdentityError("square basis lacks an identity element");
  if (!square_basis->in_space.same_block(square_basis->out_space))
    throw UnsupportedSizeError("square basis must map a block to itself");
  if (!square_basis->out_space.same_block(next_basis->in_space))
    throw UnsupportedSizeError("bases of the two diamond layers do not chain");
  if (n_tilde < n_i || n_tilde % n_i != 0)
    throw UnsupportedSizeError("intermediate width must be a positive multiple of n_i");
  DiamondBlock b;
  b.group_size = n_tilde / n_i;
  b.first = make_layer(std::move(square_basis), n_i, n_tilde);
  b.second = make_layer(std::move(next_basis), n_tilde, n_i1);
  if (mode == InitMode::Uniform) {
    if (a <= 0.0) throw Error("uniform init needs a positive half-width");
    Rng rng(seed);
    for (int i = 0; i < b.first.coeffs.size(); ++i) b.first.coeffs[i] = rng.uniform(-a, a);
    for (int i = 0; i < b.second.coeffs.size(); ++i) b.second.coeffs[i] = rng.uniform(-a, a);
  } else {
    const int id = b.first.basis->identity_index;
    for (int q = 0; q < n_tilde; ++q) {
      const int t = q % b.group_size;
      const double v = std::ldexp(t % 2 ? -1.0 : 1.0, -(t / 2));
      b.first.coeff(q, b.chi(q), id) = v;
      for (int r = 0; r < n_i1; ++r)
        for (int k = 0; k < b.second.basis->cardinality(); ++k)
          b.second.coeff(r, q, k) = t % 2 ? -1.0 : 1.0;
    }
  }
  b.mask_first.assign(static_cast<std::size_t>(b.first.num_coeffs()), 1);
  b.mask_second.assign(static_cast<std::size_t>(b.second.num_coeffs()), 1);
  return b;
}

/**
 * Prunes one diamond against a target layer.
 *
 * The first layer keeps only identity coefficients on the diamond edges
 * (chi(q) = p), turning every intermediate block into lambda_q * x_p. The
 * ReLU then splits each scalar factor by sign, so each target coefficient
 * alpha(r, p, k) is approximated twice: a Subset-Sum over the products
 * mu(r, q, k) * lambda_q for q in the group with lambda_q > 0, and one over
 * the group with lambda_q < 0, both targeting alpha. Selected mu entries
 * form the second mask; the two index sets are disjoint by construction.
 *
 * Stored errors are recomputed from the masks in ascending q order, which is
 * the order the composed map accumulates in. An instance whose error exceeds
 * the tolerance counts as a failure but keeps its best mask. Sign groups
 * larger than the exact-solver cap fall back to the 40 largest |values|.
 */
inline LayerPruneStats prune_block(DiamondBlock& b, const CoefficientLayer& target,
                                   double epsilon_layer, int jobs = 1,
                                   SolverKind solver = SolverKind::Exact) {
  const int n_i = target.n_in;
  const int n_i1 = target.n_out;
  const int nk = target.basis->cardinality();
  if (b.first.n_in != n_i || b.second.n_out != n_i1)
    throw UnsupportedSizeError("diamond multiplicities do not match the target");
  if (b.second.basis->cardinality() != nk ||
      !b.second.basis->in_space.same_block(target.basis->in_space) ||
      !b.second.basis->out_space.same_block(target.basis->out_space))
    throw UnsupportedSizeError("diamond second basis does not match the target basis");
  if (epsilon_layer <= 0.0) throw Error("layer tolerance must be positive");

  LayerPruneStats stats;
  const double constant =
      std::max<double>(target.basis->cardinality(), target.basis->op_norm_bound);
  stats.tolerance = epsilon_layer / (2.0 * n_i * n_i1 * constant);
  stats.err_pos = Eigen::VectorXd::Zero(target.num_coeffs());
  stats.err_neg = Eigen::VectorXd::Zero(target.num_coeffs());

  // first mask: identity coefficient on the diamond edge, nothing else
  const int id = b.first.basis->identity_index;
  std::fill(b.mask_first.begin(), b.mask_first.end(), 0);
  for (int q = 0; q < b.first.n_out; ++q)
    b.mask_first[static_cast<std::size_t>(b.first.coeff_index(q, b.chi(q), id))] = 1;

  std::fill(b.mask_second.begin(), b.mask_second.end(), 0);

  // per input block: the group's lambda values split by sign
  std::vector<std::vector<std::pair<int, double>>> pos(n_i), neg(n_i);
  for (int q = 0; q < b.first.n_out; ++q) {
    const double lam = b.first.coeff(q, b.chi(q), id);
    if (lam > 0.0) pos[b.chi(q)].push_back({q, lam});
    if (lam < 0.0) neg[b.chi(q)].push_back({q, lam});
  }

  struct InstanceOut {
    double err = 0.0;
    bool failed = false;
    bool truncated = false;
  };
  const int total = n_i1 * n_i * nk;
  std::vector<InstanceOut> out_pos(total), out_neg(total);

  auto solve_branch = [&](const std::vector<std::pair<int, double>>& group, int r, int k,
                          double alpha, InstanceOut& out) {
    std::vector<int> qs;
    std::vector<double> values;
    qs.reserve(group.size());
    values.reserve(group.size());
    for (const auto& [q, lam] : group) {
      qs.push_back(q);
      values.push_back(b.second.coeff(r, q, k) * lam);
    }
    if (static_cast<int>(values.size()) > ExactSolver::kMaxValues) {
      // deterministic fallback: keep the 40 largest magnitudes
      std::vector<int> idx(values.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
      std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
        return std::abs(values[static_cast<std::size_t>(x)]) >
               std::abs(values[static_cast<std::size_t>(y)]);
      });
      idx.resize(ExactSolver::kMaxValues);
      std::sort(idx.begin(), idx.end());
      std::vector<int> tq;
      std::vector<double> tv;
      for (int i : idx) {
        tq.push_back(qs[static_cast<std::size_t>(i)]);
        tv.push_back(values[static_cast<std::size_t>(i)]);
      }
      qs.swap(tq);
      values.swap(tv);
      out.truncated = true;
    }
    const SubsetSumResult res = solver == SolverKind::Greedy
                                    ? solve_greedy(values, alpha)
                                    : ExactSolver(values).solve(alpha);
    double achieved = 0.0;  // ascending q order, as the composed map sums
    for (std::size_t i = 0; i < values.size(); ++i)
      if (res.mask >> i & 1) {
        achieved += values[i];
        b.mask_second[static_cast<std::size_t>(
            b.second.coeff_index(r, qs[i], k))] = 1;
      }
    out.err = achieved - alpha;
    out.failed = std::abs(out.err) > stats.tolerance;
  };

  parallel_for(static_cast<std::size_t>(total), jobs, [&](std::size_t flat) {
    const int k = static_cast<int>(flat) % nk;
    const int p = static_cast<int>(flat) / nk % n_i;
    const int r = static_cast<int>(flat) / nk / n_i;
    const double alpha = target.coeff(r, p, k);
    solve_branch(pos[p], r, k, alpha, out_pos[flat]);
    solve_branch(neg[p], r, k, alpha, out_neg[flat]);
  });

  for (int flat = 0; flat < total; ++flat) {
    stats.err_pos[flat] = out_pos[static_cast<std::size_t>(flat)].err;
    stats.err_neg[flat] = out_neg[static_cast<std::size_t>(flat)].err;
    stats.instances += 2;
    stats.failures += out_pos[static_cast<std::size_t>(flat)].failed;
    stats.failures += out_neg[static_cast<std::size_t>(flat)].failed;
    stats.truncated_instances += out_pos[static_cast<std::size_t>(flat)].truncated;
    stats.truncated_instances += out_neg[static_cast<std::size_t>(flat)].truncated;
  }

  // layer certificate: the difference map sends x to
  // sum_p M+_{p} x_p^+ - M-_{p} x_p^-, with M± = sum_k err±(r,p,k) B_k.
  // Since x^+ + x^- = |x|, an entrywise max of |M+| and |M-| bounds the
  // worst row sum, maximized over output blocks.
  const int bo = target.basis->out_space.block_dim;
  const int bi = target.basis->in_space.block_dim;
  std::vector<Eigen::MatrixXd> mats;
  mats.reserve(static_cast<std::size_t>(nk));
  for (int k = 0; k < nk; ++k) mats.push_back(materialize_element(target.basis->elements[k]));
  double bound = 0.0;
  for (int r = 0; r < n_i1; ++r) {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(bo);
    for (int p = 0; p < n_i; ++p) {
      Eigen::MatrixXd mp = Eigen::MatrixXd::Zero(bo, bi);
      Eigen::MatrixXd mn = Eigen::MatrixXd::Zero(bo, bi);
      for (int k = 0; k < nk; ++k) {
        const int flat = (r * n_i + p) * nk + k;
        if (stats.err_pos[flat] != 0.0) mp += stats.err_pos[flat] * mats[static_cast<std::size_t>(k)];
        if (stats.err_neg[flat] != 0.0) mn += stats.err_neg[flat] * mats[static_cast<std::size_t>(k)];
      }
      rows += mp.cwiseAbs().cwiseMax(mn.cwiseAbs()).rowwise().sum();
    }
    bound = std::max(bound, rows.maxCoeff());
  }
  stats.layer_bound = bound;
  return stats;
}

/// Depth-2l network from the masked diamond layers, in order.
inline EquivariantNetwork composed_network(const std::vector<DiamondBlock>& blocks) {
  EquivariantNetwork net;
  for (const auto& b : blocks) {
    net.layers.push_back(b.masked_first());
    net.layers.push_back(b.masked_second());
  }
  net.validate();
  return net;
}

/**
 * Full pipeline: per target layer, size the diamond with the width formula,
 * sample it, and prune it with the per-layer budget epsilon / (2 l). The
 * report carries the layer envelopes, the deviation recursion
 * D <- e_i * prod_{j<i}(1 + e_j) + D (valid because target layers are
 * non-expansive), and the zero-failure ceiling (1 + eps/2l)^l - 1 <= eps.
 * square_bases[i] supplies the identity-bearing basis on layer i's input
 * space.
 */
inline PruneOutcome prune_network(
    const EquivariantNetwork& target,
    const std::vector<std::shared_ptr<const EquivariantBasis>>& square_bases,
    double epsilon, double delta, double C, InitMode mode, std::uint64_t seed,
    int jobs = 1, SolverKind solver = SolverKind::Exact) {
  target.validate();
  if (static_cast<int>(square_bases.size()) != target.depth())
    throw UnsupportedSizeError("need one square basis per target layer");
  if (epsilon <= 0.0 || epsilon > 0.5 || delta <= 0.0 || delta > 0.5)
    throw Error("epsilon and delta must lie in (0, 1/2]");
  const int l = target.depth();
  double max_coeff = 0.0;
  for (const auto& layer : target.layers) {
    if (operator_norm_inf(layer) > 1.0 + 1e-9)
      throw Error("target layers must be non-expansive");
    if (layer.coeffs.size() > 0)
      max_coeff = std::max(max_coeff, layer.coeffs.cwiseAbs().maxCoeff());
  }
  const double a_target = max_coeff > 0.0 ? 2.0 * max_coeff : 1.0;
  const double eps_layer = epsilon / (2.0 * l);

  PruneOutcome out;
  out.report.epsilon = epsilon;
  out.report.delta = delta;
  out.report.overparam_constant = C;
  for (int i = 0; i < l; ++i) {
    const CoefficientLayer& tl = target.layers[static_cast<std::size_t>(i)];
    const int n_tilde = required_width(tl.n_in, tl.n_out, *tl.basis, l, epsilon, delta, C);
    // Half-width follows the target scale, floored per layer so a sign
    // branch's expected mass (group/2 draws averaging a^2/4 in magnitude)
    // stays a few times above the largest coefficient; layers normalized to
    // small coefficients would otherwise leave targets outside the
    // reachable range of the branch sums.
    const double a = std::max(a_target, 16.0 * tl.n_in / n_tilde);
    DiamondBlock block = build_overparam_block(
        square_bases[static_cast<std::size_t>(i)], tl.basis, tl.n_in, tl.n_out, n_tilde,
        mode, a, mix_seed(seed, static_cast<std::uint64_t>(i)));
    out.report.layers.push_back(prune_block(block, tl, eps_layer, jobs, solver));
    out.blocks.push_back(std::move(block));
  }
  out.pruned = composed_network(out.blocks);

  double running = 0.0, growth = 1.0;
  for (const auto& st : out.report.layers) {
    running = st.layer_bound * growth + running;
    growth *= 1.0 + st.layer_bound;
    out.report.total_failures += st.failures;
  }
  out.report.network_bound = running;
  out.report.budget_ceiling = std::pow(1.0 + epsilon / (2.0 * l), l) - 1.0;
  out.report.recursion_check =
      out.report.budget_ceiling <= std::expm1(epsilon / 2.0) &&
      std::expm1(epsilon / 2.0) <= epsilon;

  out.report.target_params = parameter_count(target);
  for (const auto& b : out.blocks) {
    out.report.overparam_params += b.first.num_coeffs() + b.second.num_coeffs();
    for (std::uint8_t m : b.mask_first) out.report.pruned_params += m;
    for (std::uint8_t m : b.mask_second) out.report.pruned_params += m;
  }
  out.report.ratio_overparam =
      static_cast<double>(out.report.overparam_params) / out.report.target_params;
  out.report.ratio_pruned =
      static_cast<double>(out.report.pruned_params) / out.report.target_params;
  return out;
}

struct SampledError {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

struct CertificationResult {
  double analytic_bound = 0.0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

/**
 * Monte-Carlo error of one network against another over inputs uniform on
 * the unit infinity-ball: maximum absolute and relative output deviations,
 * the relative denominator floored at 1e-12. Layers are materialized once
 * and samples run in batches.
 */
inline SampledError sample_output_error(const EquivariantNetwork& target,
                                        const EquivariantNetwork& pruned, int n_samples,
                                        std::uint64_t seed) {
  if (target.in_dim() != pruned.in_dim() || target.out_dim() != pruned.out_dim())
    throw UnsupportedSizeError("networks must share input and output shapes");
  if (n_samples <= 0) throw Error("need at least one sample");
  auto materialize_all = [](const EquivariantNetwork& net) {
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& l : net.layers) mats.push_back(materialize_layer(l));
    return mats;
  };
  const std::vector<Eigen::MatrixXd> mt = materialize_all(target);
  const std::vector<Eigen::MatrixXd> mp = materialize_all(pruned);
  auto run = [](const std::vector<Eigen::MatrixXd>& mats, Eigen::MatrixXd h) {
    for (std::size_t i = 0; i < mats.size(); ++i) {
      h = mats[i] * h;
      if (i + 1 < mats.size()) h = h.cwiseMax(0.0);
    }
    return h;
  };
  SampledError res;
  Rng rng(seed);
  const int chunk = 256;
  for (int done = 0; done < n_samples; done += chunk) {
    const int m = std::min(chunk, n_samples - done);
    Eigen::MatrixXd X(target.in_dim(), m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < X.rows(); ++i) X(i, j) = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd yt = run(mt, X);
    const Eigen::MatrixXd yp = run(mp, X);
    for (int j = 0; j < m; ++j) {
      const double abs_err = (yp.col(j) - yt.col(j)).cwiseAbs().maxCoeff();
      const double scale = std::max(yt.col(j).cwiseAbs().maxCoeff(), 1e-12);
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_rel_error = std::max(res.max_rel_error, abs_err / scale);
    }
  }
  return res;
}

/// Pairs the analytic bound carried by the prune report with freshly sampled
/// deviations, and records the sampled figures back into the report.
inline CertificationResult certify_error(const EquivariantNetwork& target,
                                         PruneOutcome& outcome, int n_samples,
                                         std::uint64_t seed) {
  const SampledError s = sample_output_error(target, outcome.pruned, n_samples, seed);
  outcome.report.sampled_abs_error = s.max_abs_error;
  outcome.report.sampled_rel_error = s.max_rel_error;
  return {outcome.report.network_bound, s.max_abs_error, s.max_rel_error};
}

/// Equivariance defect of a pruned network; masking only removes basis
/// coefficients, so this should match the unpruned defect scale.
inline double pruned_equivariance_check(const EquivariantNetwork& net, int trials = 20,
                                        std::uint64_t seed = 20240903) {
  return check_equivariance(net, trials, seed);
}

}  // namespace equiprune
