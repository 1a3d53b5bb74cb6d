#pragma once

#include <map>
#include <memory>
#include <tuple>
#include <utility>
#include <vector>

#include "equiprune/basis.hpp"

namespace equiprune {

/**
 * One linear layer stored as basis coefficients. The layer maps n_in copies
 * of the basis input block to n_out copies of its output block; the (p, q)
 * block of the weight operator is sum_k coeff(p, q, k) * B_k. Weights are
 * never stored densely, only as this coefficient vector.
 */
struct CoefficientLayer {
  std::shared_ptr<const EquivariantBasis> basis;
  int n_in = 1;
  int n_out = 1;
  Eigen::VectorXd coeffs;

  int num_coeffs() const { return n_out * n_in * basis->cardinality(); }
  int in_dim() const { return n_in * basis->in_space.block_dim; }
  int out_dim() const { return n_out * basis->out_space.block_dim; }

  int coeff_index(int p, int q, int k) const {
    return (p * n_in + q) * basis->cardinality() + k;
  }
  double coeff(int p, int q, int k) const { return coeffs[coeff_index(p, q, k)]; }
  double& coeff(int p, int q, int k) { return coeffs[coeff_index(p, q, k)]; }
};

inline CoefficientLayer make_layer(std::shared_ptr<const EquivariantBasis> basis,
                                   int n_in, int n_out) {
  if (n_in < 1 || n_out < 1) throw UnsupportedSizeError("layer multiplicities must be positive");
  CoefficientLayer layer;
  layer.basis = std::move(basis);
  layer.n_in = n_in;
  layer.n_out = n_out;
  layer.coeffs = Eigen::VectorXd::Zero(layer.num_coeffs());
  return layer;
}

inline Eigen::VectorXd apply_layer(const CoefficientLayer& layer, const Eigen::VectorXd& x) {
  if (x.size() != layer.in_dim()) throw UnsupportedSizeError("layer input dimension mismatch");
  const int bi = layer.basis->in_space.block_dim;
  const int bo = layer.basis->out_space.block_dim;
  const int nk = layer.basis->cardinality();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(layer.out_dim());
  for (int p = 0; p < layer.n_out; ++p) {
    double* op = out.data() + p * bo;
    for (int q = 0; q < layer.n_in; ++q) {
      const double* xq = x.data() + q * bi;
      const double* a = layer.coeffs.data() + (p * layer.n_in + q) * nk;
      for (int k = 0; k < nk; ++k) {
        if (a[k] != 0.0) apply_element_accum(layer.basis->elements[k], a[k], xq, op);
      }
    }
  }
  return out;
}

/// Dense matrix of the whole layer, blocks in (p, q) position.
inline Eigen::MatrixXd materialize_layer(const CoefficientLayer& layer) {
  const int bi = layer.basis->in_space.block_dim;
  const int bo = layer.basis->out_space.block_dim;
  const int nk = layer.basis->cardinality();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(layer.out_dim(), layer.in_dim());
  std::vector<Eigen::MatrixXd> mats;
  mats.reserve(nk);
  for (int k = 0; k < nk; ++k) mats.push_back(materialize_element(layer.basis->elements[k]));
  for (int p = 0; p < layer.n_out; ++p)
    for (int q = 0; q < layer.n_in; ++q) {
      auto blk = m.block(p * bo, q * bi, bo, bi);
      for (int k = 0; k < nk; ++k) {
        const double a = layer.coeff(p, q, k);
        if (a != 0.0) blk += a * mats[k];
      }
    }
  return m;
}

/**
 * Exact l_inf operator norm (maximum absolute row sum) of the layer. Kernel
 * blocks are not expanded: a circulant row of output channel co sums the
 * channel's tap mass once per input block, so per-channel tap totals of the
 * combined kernels suffice.
 */
inline double operator_norm_inf(const CoefficientLayer& layer) {
  const int bo = layer.basis->out_space.block_dim;
  const int nk = layer.basis->cardinality();
  double best = 0.0;
  std::vector<double> row_abs(bo);
  for (int p = 0; p < layer.n_out; ++p) {
    std::fill(row_abs.begin(), row_abs.end(), 0.0);
    for (int q = 0; q < layer.n_in; ++q) {
      bool kernel_mode = !layer.basis->elements.empty() && layer.basis->elements[0].is_kernel;
      if (kernel_mode) {
        const auto& k0 = layer.basis->elements[0].kernel;
        // combined tap values per (pix, co, ci) of the (p, q) block
        std::map<std::tuple<int, int, int>, double> taps;
        for (int k = 0; k < nk; ++k) {
          const double a = layer.coeff(p, q, k);
          if (a == 0.0) continue;
          for (const auto& e : layer.basis->elements[k].kernel.entries)
            taps[{e.pix, e.co, e.ci}] += a * e.v;
        }
        std::vector<double> per_co(k0.ch_out, 0.0);
        for (const auto& [key, v] : taps) per_co[std::get<1>(key)] += std::abs(v);
        const int dd = k0.d * k0.d;
        for (int co = 0; co < k0.ch_out; ++co)
          for (int pix = 0; pix < dd; ++pix) row_abs[co * dd + pix] += per_co[co];
      } else {
        Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(bo, layer.basis->in_space.block_dim);
        for (int k = 0; k < nk; ++k) {
          const double a = layer.coeff(p, q, k);
          if (a != 0.0) blk += a * layer.basis->elements[k].dense;
        }
        Eigen::VectorXd rs = blk.cwiseAbs().rowwise().sum();
        for (int r = 0; r < bo; ++r) row_abs[r] += rs[r];
      }
    }
    for (int r = 0; r < bo; ++r) best = std::max(best, row_abs[r]);
  }
  return best;
}

/**
 * Feedforward network of coefficient layers with ReLU between layers (none
 * after the last). All layers share one symmetry group; adjacent feature
 * spaces must agree.
 */
struct EquivariantNetwork {
  std::vector<CoefficientLayer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }

  std::vector<int> widths() const {
    std::vector<int> w;
    w.push_back(layers.front().n_in);
    for (const auto& l : layers) w.push_back(l.n_out);
    return w;
  }

  void validate() const {
    if (layers.empty()) throw UnsupportedSizeError("network needs at least one layer");
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      if (layers[i].n_out != layers[i + 1].n_in)
        throw UnsupportedSizeError("adjacent layer multiplicities disagree");
      if (!layers[i].basis->out_space.same_block(layers[i + 1].basis->in_space))
        throw UnsupportedSizeError("adjacent layer feature spaces disagree");
    }
  }
};

inline Eigen::VectorXd forward(const EquivariantNetwork& net, const Eigen::VectorXd& x) {
  Eigen::VectorXd h = x;
  for (int i = 0; i < net.depth(); ++i) {
    h = apply_layer(net.layers[i], h);
    if (i + 1 < net.depth()) h = h.cwiseMax(0.0);
  }
  return h;
}

/// Batched forward pass over the columns of X using materialized layers.
inline Eigen::MatrixXd forward_batch(const EquivariantNetwork& net, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd h = X;
  for (int i = 0; i < net.depth(); ++i) {
    h = materialize_layer(net.layers[i]) * h;
    if (i + 1 < net.depth()) h = h.cwiseMax(0.0);
  }
  return h;
}

/// Number of stored coefficients across all layers.
inline long long parameter_count(const EquivariantNetwork& net) {
  long long n = 0;
  for (const auto& l : net.layers) n += l.num_coeffs();
  return n;
}

/// Number of nonzero coefficients across all layers.
inline long long nonzero_count(const EquivariantNetwork& net) {
  long long n = 0;
  for (const auto& l : net.layers)
    for (int i = 0; i < l.coeffs.size(); ++i)
      if (l.coeffs[i] != 0.0) ++n;
  return n;
}

/**
 * Draws a target network with coefficients uniform in [-1, 1], then rescales
 * each layer by 1 / max(1, ||layer||_inf) so every layer is non-expansive.
 * `widths` lists the block multiplicities n_0 .. n_l.
 */
inline EquivariantNetwork sample_target_network(
    std::shared_ptr<const EquivariantBasis> basis, const std::vector<int>& widths, Rng& rng) {
  if (widths.size() < 2) throw UnsupportedSizeError("need at least input and output widths");
  EquivariantNetwork net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    CoefficientLayer layer = make_layer(basis, widths[i], widths[i + 1]);
    for (int j = 0; j < layer.coeffs.size(); ++j) layer.coeffs[j] = rng.uniform(-1.0, 1.0);
    const double norm = operator_norm_inf(layer);
    if (norm > 1.0) layer.coeffs /= norm;
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

/**
 * End-to-end equivariance defect of the network: max over group generators
 * and random probes of || f(g . x) - g . f(x) ||_inf. The group action applies
 * blockwise. Exactly zero when every layer action is a permutation, since
 * ReLU commutes with coordinate permutations.
 */
inline double check_equivariance(const EquivariantNetwork& net, int probes = 5,
                                 std::uint64_t seed = 20240902, int upsample = 3) {
  net.validate();
  const FeatureSpace& si = net.layers.front().basis->in_space;
  const FeatureSpace& so = net.layers.back().basis->out_space;
  const auto gens = group_generators(si.rep.group);
  if (gens.empty()) return 0.0;
  Rng rng(seed);
  double worst = 0.0;
  auto act_blocks = [&](const FeatureSpace& sp, int blocks, const GroupElement& g,
                        const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    for (int b = 0; b < blocks; ++b)
      out.segment(b * sp.block_dim, sp.block_dim) =
          apply_block_action(sp, g, v.segment(b * sp.block_dim, sp.block_dim), upsample);
    return out;
  };
  for (int t = 0; t < probes; ++t) {
    Eigen::VectorXd x(net.in_dim());
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd fx = forward(net, x);
    for (const auto& g : gens) {
      Eigen::VectorXd lhs = forward(net, act_blocks(si, net.layers.front().n_in, g, x));
      Eigen::VectorXd rhs = act_blocks(so, net.layers.back().n_out, g, fx);
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace equiprune
