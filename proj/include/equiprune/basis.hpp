#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <tuple>
#include <vector>

#include "equiprune/common.hpp"
#include "equiprune/groups.hpp"

namespace equiprune {

/**
 * One tap of a convolution kernel: value `v` at kernel pixel `pix`
 * (row-major over a d x d stencil, offsets taken relative to the center
 * pixel), mapping input channel `ci` to output channel `co`.
 */
struct KernelEntry {
  int pix = 0;
  int co = 0;
  int ci = 0;
  double v = 0.0;
};

/// Sparse multi-channel kernel applied by circular convolution on a d x d grid.
struct SparseKernel {
  int d = 0;
  int ch_out = 1;
  int ch_in = 1;
  std::vector<KernelEntry> entries;
};

/**
 * One element of an equivariant layer basis. Either a dense matrix acting on
 * block vectors, or a sparse kernel acting by circular convolution on
 * channel-major fields (block layout: channel * d^2 + row * d + col).
 */
struct BasisElement {
  bool is_kernel = false;
  Eigen::MatrixXd dense;
  SparseKernel kernel;

  int out_dim() const {
    return is_kernel ? kernel.ch_out * kernel.d * kernel.d : static_cast<int>(dense.rows());
  }
  int in_dim() const {
    return is_kernel ? kernel.ch_in * kernel.d * kernel.d : static_cast<int>(dense.cols());
  }
};

/// Description of one feature block: representation, flat dimension, grid
/// side (0 for non-grid spaces), and how many copies are stacked in a layer.
struct FeatureSpace {
  RepSpec rep;
  int block_dim = 1;
  int multiplicity = 1;
  int grid_side = 0;

  bool same_block(const FeatureSpace& o) const {
    return rep == o.rep && block_dim == o.block_dim && grid_side == o.grid_side;
  }
};

/// A finite basis of equivariant linear maps between two feature blocks.
struct EquivariantBasis {
  FeatureSpace in_space;
  FeatureSpace out_space;
  std::vector<BasisElement> elements;
  int identity_index = -1;
  double op_norm_bound = 0.0;

  int cardinality() const { return static_cast<int>(elements.size()); }
};

// ---------------------------------------------------------------------------
// element application and materialization

inline void apply_element_accum(const BasisElement& el, double scale,
                                const double* x, double* out) {
  if (!el.is_kernel) {
    const auto& m = el.dense;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < m.cols(); ++c) acc += m(r, c) * x[c];
      out[r] += scale * acc;
    }
    return;
  }
  const int d = el.kernel.d;
  const int dd = d * d;
  const int ctr = (d - 1) / 2;
  for (const auto& e : el.kernel.entries) {
    const int dr = e.pix / d - ctr;
    const int dc = e.pix % d - ctr;
    const double v = scale * e.v;
    const double* xin = x + e.ci * dd;
    double* o = out + e.co * dd;
    for (int r = 0; r < d; ++r) {
      const int sr = ((r - dr) % d + d) % d;
      for (int c = 0; c < d; ++c) {
        const int sc = ((c - dc) % d + d) % d;
        o[r * d + c] += v * xin[sr * d + sc];
      }
    }
  }
}

inline Eigen::VectorXd apply_element(const BasisElement& el, const Eigen::VectorXd& x) {
  if (x.size() != el.in_dim()) throw UnsupportedSizeError("element input dimension mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(el.out_dim());
  apply_element_accum(el, 1.0, x.data(), out.data());
  return out;
}

/// Dense matrix of the element's linear action.
inline Eigen::MatrixXd materialize_element(const BasisElement& el) {
  if (!el.is_kernel) return el.dense;
  const int d = el.kernel.d;
  const int dd = d * d;
  const int ctr = (d - 1) / 2;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(el.out_dim(), el.in_dim());
  for (const auto& e : el.kernel.entries) {
    const int dr = e.pix / d - ctr;
    const int dc = e.pix % d - ctr;
    for (int r = 0; r < d; ++r) {
      const int sr = ((r - dr) % d + d) % d;
      for (int c = 0; c < d; ++c) {
        const int sc = ((c - dc) % d + d) % d;
        m(e.co * dd + r * d + c, e.ci * dd + sr * d + sc) += e.v;
      }
    }
  }
  return m;
}

/// Exact infinity operator norm (max absolute row sum) of one element.
inline double element_op_norm(const BasisElement& el) {
  if (!el.is_kernel) return el.dense.cwiseAbs().rowwise().sum().maxCoeff();
  // Circulant structure: every output position of channel co sees each tap
  // of that channel exactly once, so the row sum is the per-channel l1 mass.
  std::vector<double> per_co(el.kernel.ch_out, 0.0);
  for (const auto& e : el.kernel.entries) per_co[e.co] += std::abs(e.v);
  double mx = 0.0;
  for (double v : per_co) mx = std::max(mx, v);
  return mx;
}

// ---------------------------------------------------------------------------
// block actions

/**
 * Applies a group element to one feature block:
 *  - index-power spaces permute tensor indices,
 *  - Translation2D spaces circularly shift the field,
 *  - planar grid spaces permute channels by the representation and resample
 *    the field through the grid action,
 *  - anything else multiplies by the representation matrix.
 */
inline Eigen::VectorXd apply_block_action(const FeatureSpace& space, const GroupElement& g,
                                          const Eigen::VectorXd& x, int upsample = 3) {
  if (x.size() != space.block_dim) throw UnsupportedSizeError("block dimension mismatch");
  const GroupSpec gs = space.rep.group;
  if (space.rep.kind == RepKind::IndexPower) {
    std::vector<int> perm(gs.n);
    Group(gs).check_member(g);
    for (int i = 0; i < gs.n; ++i) perm[i] = g.perm[i];
    return act_on_tensor_indices(gs.n, space.rep.tensor_power, perm, x);
  }
  if (gs.kind == GroupKind::Translation2D) {
    Group(gs).check_member(g);
    const int d = gs.n;
    Eigen::VectorXd out(x.size());
    for (int r = 0; r < d; ++r) {
      const int sr = ((r - g.tx) % d + d) % d;
      for (int c = 0; c < d; ++c) {
        const int sc = ((c - g.ty) % d + d) % d;
        out[r * d + c] = x[sr * d + sc];
      }
    }
    return out;
  }
  if (space.grid_side > 0) {
    GridAction action(gs, space.grid_side, upsample);
    const Group& grp = action.group();
    grp.check_member(g);
    const int dd = space.grid_side * space.grid_side;
    const int ch = space.rep.kind == RepKind::Regular ? static_cast<int>(grp.size()) : 1;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
    for (int ci = 0; ci < ch; ++ci) {
      const Eigen::VectorXd moved = action.apply(g, x.segment(ci * dd, dd));
      const int co =
          ch == 1 ? 0 : static_cast<int>(grp.index_of(grp.multiply(g, grp.element(ci))));
      out.segment(co * dd, dd) = moved;
    }
    return out;
  }
  return rep_matrix(space.rep, g) * x;
}

// ---------------------------------------------------------------------------
// builders

/// Basis of the unconstrained 1 x 1 layer space: the single scalar identity.
inline EquivariantBasis build_mlp_basis() {
  EquivariantBasis b;
  FeatureSpace s;
  s.rep = RepSpec{RepKind::Trivial, {GroupKind::Trivial, 1}, 0};
  s.block_dim = 1;
  b.in_space = b.out_space = s;
  BasisElement el;
  el.is_kernel = false;
  el.dense = Eigen::MatrixXd::Identity(1, 1);
  b.elements.push_back(el);
  b.identity_index = 0;
  b.op_norm_bound = 1.0;
  return b;
}

/**
 * Basis of translation-equivariant maps on a d x d grid (d odd): the d^2
 * single-tap circular-convolution kernels. The identity element is the tap
 * at the kernel center.
 */
inline EquivariantBasis build_translation_basis(int d) {
  if (d < 1 || d % 2 == 0) throw UnsupportedSizeError("grid side must be odd and >= 1");
  EquivariantBasis b;
  FeatureSpace s;
  s.rep = RepSpec{RepKind::Regular, {GroupKind::Translation2D, d}, 0};
  s.block_dim = d * d;
  s.grid_side = d;
  b.in_space = b.out_space = s;
  const int c = (d - 1) / 2;
  for (int r = 0; r < d; ++r) {
    for (int col = 0; col < d; ++col) {
      BasisElement el;
      el.is_kernel = true;
      el.kernel.d = d;
      el.kernel.ch_out = el.kernel.ch_in = 1;
      el.kernel.entries.push_back({r * d + col, 0, 0, 1.0});
      b.elements.push_back(std::move(el));
    }
  }
  b.identity_index = c * d + c;
  b.op_norm_bound = static_cast<double>(d * d);
  return b;
}

namespace detail {

/// Disjoint-set over pixel indices.
class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) {
    for (int i = 0; i < n; ++i) parent_[i] = i;
  }
  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

inline std::map<std::tuple<int, int, int>, double> kernel_as_map(const SparseKernel& k) {
  std::map<std::tuple<int, int, int>, double> m;
  for (const auto& e : k.entries) m[{e.pix, e.co, e.ci}] += e.v;
  return m;
}

inline bool maps_equal(const std::map<std::tuple<int, int, int>, double>& ma,
                       const std::map<std::tuple<int, int, int>, double>& mb, double tol) {
  for (const auto& [k, v] : ma) {
    const auto it = mb.find(k);
    const double w = it == mb.end() ? 0.0 : it->second;
    if (std::abs(v - w) > tol) return false;
  }
  for (const auto& [k, v] : mb) {
    if (ma.find(k) == ma.end() && std::abs(v) > tol) return false;
  }
  return true;
}

inline double kernel_dot(const SparseKernel& a, const SparseKernel& b) {
  auto ma = kernel_as_map(a);
  auto mb = kernel_as_map(b);
  double acc = 0.0;
  for (const auto& [k, v] : ma) {
    const auto it = mb.find(k);
    if (it != mb.end()) acc += v * it->second;
  }
  return acc;
}

inline double element_dot(const BasisElement& a, const BasisElement& b) {
  if (a.is_kernel && b.is_kernel) return kernel_dot(a.kernel, b.kernel);
  if (!a.is_kernel && !b.is_kernel)
    return (a.dense.array() * b.dense.array()).sum();
  throw UnsupportedRepError("mixed element forms in one basis");
}

}  // namespace detail

/// Result of a linear-independence certification of a basis.
struct IndependenceReport {
  bool checked = false;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool independent = false;
};

/**
 * Certifies linear independence of the basis elements through the Gram
 * matrix of their L2-normalized vectorizations. Bases above `max_size`
 * elements are skipped (checked = false).
 */
inline IndependenceReport certify_independence(const EquivariantBasis& b,
                                               double rel_threshold = 1e-8,
                                               int max_size = 2000) {
  IndependenceReport rep;
  const int n = b.cardinality();
  if (n == 0 || n > max_size) return rep;
  Eigen::MatrixXd gram(n, n);
  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i)
    norms[i] = std::sqrt(detail::element_dot(b.elements[i], b.elements[i]));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double g = detail::element_dot(b.elements[i], b.elements[j]) /
                       (norms[i] * norms[j]);
      gram(i, j) = g;
      gram(j, i) = g;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  rep.checked = true;
  rep.min_eigenvalue = es.eigenvalues().minCoeff();
  rep.max_eigenvalue = es.eigenvalues().maxCoeff();
  rep.independent = rep.min_eigenvalue > rel_threshold * rep.max_eigenvalue;
  return rep;
}

/**
 * Steerable basis on a d x d grid (d odd) for a planar point group:
 * seed kernels are symmetrized over the group, one per (grid-orbit
 * representative, output channel, input channel); the origin contributes the
 * commutant elements (right translations for regular reps, the scalar delta
 * for trivial reps). Pixels outside the inscribed disk are attenuated by
 * exp(-5 * max(0, r - R) / R) for nontrivial groups. Duplicates arising from
 * stabilizers are merged (tolerance 1e-10).
 */
inline EquivariantBasis build_steerable_basis(GroupSpec group, int d, RepKind rep_in,
                                              RepKind rep_out, int upsample = 3) {
  if (rep_in == RepKind::IndexPower || rep_out == RepKind::IndexPower)
    throw UnsupportedRepError("steerable bases take trivial or regular reps");
  GridAction action(group, d, upsample);
  const Group& G = action.group();
  const int gsz = static_cast<int>(G.size());
  const int ch_in = rep_in == RepKind::Regular ? gsz : 1;
  const int ch_out = rep_out == RepKind::Regular ? gsz : 1;
  const int dd = d * d;
  const int ctr = (d - 1) / 2;

  // Left-translation index tables sigma[g][h] = index(g * h).
  std::vector<std::vector<int>> sigma(gsz, std::vector<int>(gsz));
  for (int gi = 0; gi < gsz; ++gi)
    for (int hi = 0; hi < gsz; ++hi)
      sigma[gi][hi] =
          static_cast<int>(G.index_of(G.multiply(G.element(gi), G.element(hi))));

  // Discrete orbits: nearest-pixel rounding of exact orbits, merged by
  // union-find; the representative is the lexicographically smallest
  // centered coordinate pair.
  detail::UnionFind uf(dd);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      const Eigen::Vector2d x = action.pixel_center(r, c);
      for (int gi = 0; gi < gsz; ++gi) {
        const Eigen::Vector2d y = action.map_point(G.element(gi), x);
        const int yc = static_cast<int>(std::lround(y.x())) + ctr;
        const int yr = ctr - static_cast<int>(std::lround(y.y()));
        if (yr < 0 || yr >= d || yc < 0 || yc >= d) continue;
        uf.unite(r * d + c, yr * d + yc);
      }
    }
  }
  std::map<int, std::pair<int, int>> rep_pixel;  // class root -> best (x1, x2)
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      if (r == ctr && c == ctr) continue;  // origin handled separately
      const int root = uf.find(r * d + c);
      if (root == uf.find(ctr * d + ctr)) continue;
      const std::pair<int, int> coord{c - ctr, ctr - r};
      auto it = rep_pixel.find(root);
      if (it == rep_pixel.end() || coord < it->second) rep_pixel[root] = coord;
    }
  }
  std::vector<std::pair<int, int>> reps;
  for (const auto& [root, coord] : rep_pixel) reps.push_back(coord);
  std::sort(reps.begin(), reps.end());

  const bool masked = gsz >= 2;
  const double R = (d - 1) / 2.0;
  auto disk_weight = [&](int pix) {
    if (!masked || R == 0.0) return 1.0;
    const int pr = pix / d, pc = pix % d;
    const double r = std::hypot(pc - ctr, double(ctr - pr));
    return std::exp(-5.0 * std::max(0.0, r - R) / R);
  };

  auto symmetrize = [&](const Eigen::Vector2d& x0, int p, int q) {
    std::map<std::tuple<int, int, int>, double> acc;
    std::vector<std::pair<int, double>> taps;
    for (int gi = 0; gi < gsz; ++gi) {
      const GroupElement g = G.element(gi);
      const Eigen::Vector2d pos = action.map_point(g, x0);
      taps.clear();
      action.splat(pos, taps);
      const int co = ch_out == 1 ? 0 : sigma[gi][p];
      const int ci = ch_in == 1 ? 0 : sigma[gi][q];
      for (const auto& [pix, w] : taps) acc[{pix, co, ci}] += w;
    }
    BasisElement el;
    el.is_kernel = true;
    el.kernel.d = d;
    el.kernel.ch_out = ch_out;
    el.kernel.ch_in = ch_in;
    for (const auto& [key, v] : acc) {
      const auto [pix, co, ci] = key;
      const double w = v * disk_weight(pix);
      if (w != 0.0) el.kernel.entries.push_back({pix, co, ci, w});
    }
    return el;
  };

  EquivariantBasis b;
  b.in_space =
      FeatureSpace{RepSpec{rep_in, G.spec(), 0}, ch_in * dd, 1, d};
  b.out_space =
      FeatureSpace{RepSpec{rep_out, G.spec(), 0}, ch_out * dd, 1, d};

  std::vector<BasisElement> raw;
  std::vector<bool> raw_is_identity;

  // Origin elements: symmetrized seeds at the fixed point. For
  // regular-regular reps these are exactly the |G| right-translation
  // permutation kernels; for trivial reps, the scalar delta.
  const int pairs_out = ch_out == 1 ? 1 : gsz;
  const int pairs_in = ch_in == 1 ? 1 : gsz;
  for (int p = 0; p < pairs_out; ++p) {
    for (int q = 0; q < pairs_in; ++q) {
      BasisElement el = symmetrize(Eigen::Vector2d::Zero(), p, q);
      if (ch_in == 1 && ch_out == 1) {
        // Trivial-trivial: the symmetrization stacks |G| copies of the
        // scalar delta; emit the single normalized element.
        for (auto& e : el.kernel.entries) e.v /= gsz;
      }
      raw.push_back(std::move(el));
      raw_is_identity.push_back(ch_in == ch_out && p == q);
    }
  }
  for (const auto& [x1, x2] : reps) {
    const Eigen::Vector2d x0(static_cast<double>(x1), static_cast<double>(x2));
    for (int p = 0; p < pairs_out; ++p) {
      for (int q = 0; q < pairs_in; ++q) {
        raw.push_back(symmetrize(x0, p, q));
        raw_is_identity.push_back(false);
      }
    }
  }

  // Merge duplicates, keeping first occurrences; stabilizer subgroups
  // produce exact repeats under exact planar elements.
  std::vector<std::map<std::tuple<int, int, int>, double>> kept_maps;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto mi = detail::kernel_as_map(raw[i].kernel);
    bool dup = false;
    for (const auto& km : kept_maps) {
      if (detail::maps_equal(km, mi, 1e-10)) {
        dup = true;
        break;
      }
    }
    if (!dup) {
      kept_maps.push_back(std::move(mi));
      b.elements.push_back(std::move(raw[i]));
      if (raw_is_identity[i] && b.identity_index < 0 && rep_in == rep_out)
        b.identity_index = static_cast<int>(b.elements.size()) - 1;
    }
  }

  double mx = 0.0;
  for (const auto& el : b.elements) mx = std::max(mx, element_op_norm(el));
  b.op_norm_bound = static_cast<double>(b.cardinality()) * mx;
  return b;
}

namespace detail {

/// Restricted-growth-string pattern of a tuple: first occurrences get
/// increasing labels, so equal patterns mean equal equality relations.
inline std::vector<int> tuple_pattern(const std::vector<int>& t) {
  std::vector<int> pattern(t.size());
  std::vector<int> label_of(t.size() ? *std::max_element(t.begin(), t.end()) + 1 : 0, -1);
  int next = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (label_of[t[i]] < 0) label_of[t[i]] = next++;
    pattern[i] = label_of[t[i]];
  }
  return pattern;
}

}  // namespace detail

/**
 * Basis of Symmetric(n)-equivariant maps R^(n^k_in) -> R^(n^k_out): one 0/1
 * matrix per equality pattern of (k_in + k_out)-tuples over [n]. When
 * k_in == k_out, the all-equal pattern is replaced by the identity matrix
 * (an equivalent basis with an explicit identity element).
 */
inline EquivariantBasis build_symmetric_basis(int n, int k_in, int k_out) {
  if (n < 1 || n > 8) throw UnsupportedSizeError("symmetric degree must be in [1, 8]");
  if (k_in < 0 || k_out < 0 || k_in > 2 || k_out > 2)
    throw UnsupportedSizeError("tensor orders are capped at 2");
  const int m = k_in + k_out;
  int dim_in = 1, dim_out = 1;
  for (int i = 0; i < k_in; ++i) dim_in *= n;
  for (int i = 0; i < k_out; ++i) dim_out *= n;

  std::size_t tuples = 1;
  for (int i = 0; i < m; ++i) tuples *= static_cast<std::size_t>(n);

  std::map<std::vector<int>, int> class_of_pattern;
  std::vector<Eigen::MatrixXd> mats;
  std::vector<std::vector<int>> patterns;
  std::vector<int> digits(std::max(m, 1), 0);
  for (std::size_t t = 0; t < tuples; ++t) {
    std::size_t rest = t;
    for (int pos = m - 1; pos >= 0; --pos) {
      digits[pos] = static_cast<int>(rest % n);
      rest /= n;
    }
    std::vector<int> tup(digits.begin(), digits.begin() + m);
    const auto pattern = detail::tuple_pattern(tup);
    auto it = class_of_pattern.find(pattern);
    int cls;
    if (it == class_of_pattern.end()) {
      cls = static_cast<int>(mats.size());
      class_of_pattern[pattern] = cls;
      mats.emplace_back(Eigen::MatrixXd::Zero(dim_out, dim_in));
      patterns.push_back(pattern);
    } else {
      cls = it->second;
    }
    int a = 0, b = 0;
    for (int i = 0; i < k_in; ++i) a = a * n + tup[i];
    for (int i = 0; i < k_out; ++i) b = b * n + tup[k_in + i];
    mats[static_cast<std::size_t>(cls)](b, a) = 1.0;
  }

  EquivariantBasis basis;
  basis.in_space = FeatureSpace{RepSpec{RepKind::IndexPower, {GroupKind::Symmetric, n}, k_in},
                                dim_in, 1, 0};
  basis.out_space = FeatureSpace{RepSpec{RepKind::IndexPower, {GroupKind::Symmetric, n}, k_out},
                                 dim_out, 1, 0};

  for (std::size_t i = 0; i < mats.size(); ++i) {
    BasisElement el;
    el.is_kernel = false;
    el.dense = std::move(mats[i]);
    basis.elements.push_back(std::move(el));
  }

  if (k_in == k_out) {
    const std::vector<int> all_equal(m, 0);
    const auto it = class_of_pattern.find(all_equal);
    if (it != class_of_pattern.end()) {
      basis.identity_index = it->second;
      basis.elements[static_cast<std::size_t>(it->second)].dense =
          Eigen::MatrixXd::Identity(dim_out, dim_in);
    }
    basis.op_norm_bound = std::pow(static_cast<double>(n), k_in) + 1.0;
  } else {
    Eigen::MatrixXd absum = Eigen::MatrixXd::Zero(dim_out, dim_in);
    for (const auto& el : basis.elements) absum += el.dense.cwiseAbs();
    basis.op_norm_bound = absum.rowwise().sum().maxCoeff();
  }
  return basis;
}

// ---------------------------------------------------------------------------
// verification

/// Canonical generating set of each catalog group.
inline std::vector<GroupElement> group_generators(const GroupSpec& spec) {
  Group g(spec);
  std::vector<GroupElement> out;
  switch (spec.kind) {
    case GroupKind::Trivial:
      break;
    case GroupKind::Cyclic:
      if (spec.n > 1) out.push_back(g.element(1));
      break;
    case GroupKind::Dihedral:
      if (spec.n > 1) out.push_back(g.element(1));
      out.push_back(g.element(spec.n));  // first reflection
      break;
    case GroupKind::Translation2D:
      if (spec.n > 1) {
        out.push_back(g.element(spec.n));  // (tx, ty) = (1, 0)
        out.push_back(g.element(1));       // (0, 1)
      }
      break;
    case GroupKind::Symmetric:
      if (spec.n >= 2) {
        GroupElement t = g.identity();
        t.perm[0] = 1;
        t.perm[1] = 0;
        out.push_back(t);
        GroupElement c = g.identity();
        for (int i = 0; i < spec.n; ++i)
          c.perm[i] = static_cast<std::int8_t>((i + 1) % spec.n);
        out.push_back(c);
      }
      break;
  }
  return out;
}

struct EquivarianceReport {
  double max_residual = 0.0;
  std::vector<double> per_element;
};

/**
 * Measures, for every basis element and every group generator, the maximum
 * commutation defect || action_out(g, b(x)) - b(action_in(g, x)) ||_inf over
 * random probe inputs. Exact for permutation actions; resampling groups
 * report a discretization constant instead of zero.
 */
inline EquivarianceReport verify_basis_equivariance(const EquivariantBasis& basis,
                                                    int probes = 5,
                                                    std::uint64_t seed = 20240901,
                                                    int upsample = 3) {
  EquivarianceReport rep;
  rep.per_element.assign(basis.elements.size(), 0.0);
  const auto gens = group_generators(basis.in_space.rep.group);
  if (gens.empty()) return rep;
  Rng rng(seed);
  std::vector<Eigen::VectorXd> xs;
  for (int t = 0; t < probes; ++t) {
    Eigen::VectorXd x(basis.in_space.block_dim);
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    xs.push_back(std::move(x));
  }
  for (std::size_t k = 0; k < basis.elements.size(); ++k) {
    const auto& el = basis.elements[k];
    double worst = 0.0;
    for (const auto& g : gens) {
      for (const auto& x : xs) {
        const Eigen::VectorXd lhs =
            apply_block_action(basis.out_space, g, apply_element(el, x), upsample);
        const Eigen::VectorXd rhs =
            apply_element(el, apply_block_action(basis.in_space, g, x, upsample));
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
      }
    }
    rep.per_element[k] = worst;
    rep.max_residual = std::max(rep.max_residual, worst);
  }
  return rep;
}

/// Content hash of a basis: stable across runs, used as a reference when
/// networks are serialized without inlining their bases.
inline std::uint64_t basis_hash(const EquivariantBasis& b) {
  Fnv1a h;
  h.feed_u64(static_cast<std::uint64_t>(b.in_space.rep.kind));
  h.feed_u64(static_cast<std::uint64_t>(b.in_space.rep.group.kind));
  h.feed_i64(b.in_space.rep.group.n);
  h.feed_i64(b.in_space.block_dim);
  h.feed_u64(static_cast<std::uint64_t>(b.out_space.rep.kind));
  h.feed_u64(static_cast<std::uint64_t>(b.out_space.rep.group.kind));
  h.feed_i64(b.out_space.rep.group.n);
  h.feed_i64(b.out_space.block_dim);
  h.feed_i64(b.identity_index);
  for (const auto& el : b.elements) {
    if (el.is_kernel) {
      h.feed_u64(1);
      auto m = detail::kernel_as_map(el.kernel);
      for (const auto& [key, v] : m) {
        h.feed_i64(std::get<0>(key));
        h.feed_i64(std::get<1>(key));
        h.feed_i64(std::get<2>(key));
        h.feed_double(v);
      }
    } else {
      h.feed_u64(2);
      for (Eigen::Index i = 0; i < el.dense.size(); ++i) h.feed_double(el.dense.data()[i]);
    }
  }
  return h.value();
}

}  // namespace equiprune
