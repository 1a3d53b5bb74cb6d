#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "equiprune/common.hpp"

namespace equiprune {

enum class GroupKind { Trivial, Cyclic, Dihedral, Translation2D, Symmetric };

inline const char* group_kind_name(GroupKind k) {
  switch (k) {
    case GroupKind::Trivial: return "trivial";
    case GroupKind::Cyclic: return "cyclic";
    case GroupKind::Dihedral: return "dihedral";
    case GroupKind::Translation2D: return "translation2d";
    case GroupKind::Symmetric: return "symmetric";
  }
  return "?";
}

/**
 * Identifies a finite group from the supported catalog.
 * `n` is the order parameter: rotation count for Cyclic/Dihedral, grid side
 * for Translation2D, permutation degree for Symmetric; ignored for Trivial.
 */
struct GroupSpec {
  GroupKind kind = GroupKind::Trivial;
  int n = 1;

  bool operator==(const GroupSpec& o) const {
    if (kind != o.kind) return false;
    if (kind == GroupKind::Trivial) return true;
    return n == o.n;
  }
};

/**
 * A group element, tagged with the spec it belongs to so foreign elements
 * can be rejected. Data fields are interpreted per kind:
 *  - Cyclic: rot in [0, n)
 *  - Dihedral: rot in [0, n), flip in {0, 1}
 *  - Translation2D: (tx, ty) row/column shifts in [0, d)
 *  - Symmetric: perm[0..n) one-line notation
 */
struct GroupElement {
  GroupSpec spec;
  int rot = 0;
  int flip = 0;
  int tx = 0;
  int ty = 0;
  std::array<std::int8_t, 8> perm{};

  bool operator==(const GroupElement& o) const {
    if (!(spec == o.spec)) return false;
    switch (spec.kind) {
      case GroupKind::Trivial: return true;
      case GroupKind::Cyclic: return rot == o.rot;
      case GroupKind::Dihedral: return rot == o.rot && flip == o.flip;
      case GroupKind::Translation2D: return tx == o.tx && ty == o.ty;
      case GroupKind::Symmetric:
        for (int i = 0; i < spec.n; ++i)
          if (perm[i] != o.perm[i]) return false;
        return true;
    }
    return false;
  }
};

/**
 * Finite group operations for one GroupSpec. Elements are enumerated in a
 * canonical order: Cyclic by increasing rotation angle, Dihedral rotations
 * before reflections, Translation2D row-major shifts, Symmetric permutations
 * in lexicographic order.
 */
class Group {
 public:
  explicit Group(GroupSpec spec) : spec_(spec) {
    switch (spec_.kind) {
      case GroupKind::Trivial:
        spec_.n = 1;
        size_ = 1;
        break;
      case GroupKind::Cyclic:
        if (spec_.n < 1) throw UnsupportedSizeError("cyclic group order must be >= 1");
        size_ = spec_.n;
        break;
      case GroupKind::Dihedral:
        if (spec_.n < 1) throw UnsupportedSizeError("dihedral group order must be >= 1");
        size_ = 2 * spec_.n;
        break;
      case GroupKind::Translation2D:
        if (spec_.n < 1) throw UnsupportedSizeError("grid side must be >= 1");
        size_ = static_cast<std::size_t>(spec_.n) * spec_.n;
        break;
      case GroupKind::Symmetric:
        if (spec_.n < 1 || spec_.n > 8)
          throw UnsupportedSizeError("symmetric group degree must be in [1, 8]");
        size_ = 1;
        for (int i = 2; i <= spec_.n; ++i) size_ *= i;
        break;
    }
  }

  const GroupSpec& spec() const { return spec_; }
  std::size_t size() const { return size_; }

  GroupElement identity() const { return element(0); }

  /// Element at position `i` of the canonical enumeration.
  GroupElement element(std::size_t i) const {
    if (i >= size_) throw UnsupportedSizeError("element index out of range");
    GroupElement e;
    e.spec = spec_;
    const int n = spec_.n;
    switch (spec_.kind) {
      case GroupKind::Trivial:
        break;
      case GroupKind::Cyclic:
        e.rot = static_cast<int>(i);
        break;
      case GroupKind::Dihedral:
        e.rot = static_cast<int>(i % n);
        e.flip = static_cast<int>(i / n);
        break;
      case GroupKind::Translation2D:
        e.tx = static_cast<int>(i / n);
        e.ty = static_cast<int>(i % n);
        break;
      case GroupKind::Symmetric: {
        // Factorial-base unranking yields lexicographic order.
        std::vector<int> avail(n);
        std::iota(avail.begin(), avail.end(), 0);
        std::size_t rem = i;
        std::size_t fact = size_;
        for (int pos = 0; pos < n; ++pos) {
          fact /= (n - pos);
          const std::size_t digit = rem / fact;
          rem %= fact;
          e.perm[pos] = static_cast<std::int8_t>(avail[digit]);
          avail.erase(avail.begin() + static_cast<long>(digit));
        }
        break;
      }
    }
    return e;
  }

  /// Position of `e` in the canonical enumeration.
  std::size_t index_of(const GroupElement& e) const {
    check_member(e);
    const int n = spec_.n;
    switch (spec_.kind) {
      case GroupKind::Trivial: return 0;
      case GroupKind::Cyclic: return static_cast<std::size_t>(e.rot);
      case GroupKind::Dihedral:
        return static_cast<std::size_t>(e.rot) + static_cast<std::size_t>(n) * e.flip;
      case GroupKind::Translation2D:
        return static_cast<std::size_t>(e.tx) * n + e.ty;
      case GroupKind::Symmetric: {
        std::size_t rank = 0;
        std::size_t fact = size_;
        std::vector<int> avail(n);
        std::iota(avail.begin(), avail.end(), 0);
        for (int pos = 0; pos < n; ++pos) {
          fact /= (n - pos);
          const auto it = std::find(avail.begin(), avail.end(), e.perm[pos]);
          rank += static_cast<std::size_t>(it - avail.begin()) * fact;
          avail.erase(it);
        }
        return rank;
      }
    }
    return 0;
  }

  std::vector<GroupElement> elements() const {
    std::vector<GroupElement> out;
    out.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) out.push_back(element(i));
    return out;
  }

  GroupElement multiply(const GroupElement& a, const GroupElement& b) const {
    check_member(a);
    check_member(b);
    GroupElement e;
    e.spec = spec_;
    const int n = spec_.n;
    switch (spec_.kind) {
      case GroupKind::Trivial:
        break;
      case GroupKind::Cyclic:
        e.rot = (a.rot + b.rot) % n;
        break;
      case GroupKind::Dihedral:
        // a = rot(r1) m^f1, b = rot(r2) m^f2 with m rot(r) m = rot(-r).
        if (a.flip == 0) {
          e.rot = (a.rot + b.rot) % n;
        } else {
          e.rot = ((a.rot - b.rot) % n + n) % n;
        }
        e.flip = a.flip ^ b.flip;
        break;
      case GroupKind::Translation2D:
        e.tx = (a.tx + b.tx) % n;
        e.ty = (a.ty + b.ty) % n;
        break;
      case GroupKind::Symmetric:
        // (a b)(i) = a(b(i)).
        for (int i = 0; i < n; ++i) e.perm[i] = a.perm[b.perm[i]];
        break;
    }
    return e;
  }

  GroupElement inverse(const GroupElement& a) const {
    check_member(a);
    GroupElement e;
    e.spec = spec_;
    const int n = spec_.n;
    switch (spec_.kind) {
      case GroupKind::Trivial:
        break;
      case GroupKind::Cyclic:
        e.rot = (n - a.rot) % n;
        break;
      case GroupKind::Dihedral:
        // Reflections are involutions; rotations invert as usual.
        e.rot = a.flip ? a.rot : (n - a.rot) % n;
        e.flip = a.flip;
        break;
      case GroupKind::Translation2D:
        e.tx = (n - a.tx) % n;
        e.ty = (n - a.ty) % n;
        break;
      case GroupKind::Symmetric:
        for (int i = 0; i < n; ++i) e.perm[a.perm[i]] = static_cast<std::int8_t>(i);
        break;
    }
    return e;
  }

  /// Throws WrongGroupError unless `e` is a well-formed element of this group.
  void check_member(const GroupElement& e) const {
    if (!(e.spec == spec_)) throw WrongGroupError("element belongs to a different group");
    const int n = spec_.n;
    switch (spec_.kind) {
      case GroupKind::Trivial:
        return;
      case GroupKind::Cyclic:
        if (e.rot < 0 || e.rot >= n) throw WrongGroupError("rotation index out of range");
        return;
      case GroupKind::Dihedral:
        if (e.rot < 0 || e.rot >= n || (e.flip != 0 && e.flip != 1))
          throw WrongGroupError("dihedral element out of range");
        return;
      case GroupKind::Translation2D:
        if (e.tx < 0 || e.tx >= n || e.ty < 0 || e.ty >= n)
          throw WrongGroupError("translation out of range");
        return;
      case GroupKind::Symmetric: {
        std::array<bool, 8> seen{};
        for (int i = 0; i < n; ++i) {
          const int v = e.perm[i];
          if (v < 0 || v >= n || seen[v]) throw WrongGroupError("invalid permutation");
          seen[v] = true;
        }
        return;
      }
    }
  }

  /// True for groups that act on the plane as rotations/reflections.
  bool is_planar() const {
    return spec_.kind == GroupKind::Trivial || spec_.kind == GroupKind::Cyclic ||
           spec_.kind == GroupKind::Dihedral;
  }

  /**
   * 2x2 orthogonal matrix of a planar element: rotation by 2*pi*rot/n,
   * composed after an optional left-right mirror (x -> -x). Entries are
   * snapped exactly to {0, +-1} when the angle is a multiple of 90 degrees.
   */
  Eigen::Matrix2d planar_matrix(const GroupElement& e) const {
    check_member(e);
    if (!is_planar()) throw WrongGroupError("group does not act on the plane");
    double c = 1.0, s = 0.0;
    if (spec_.kind != GroupKind::Trivial) {
      const int n = spec_.n;
      if ((4 * e.rot) % n == 0) {
        static const int ct[4] = {1, 0, -1, 0};
        static const int st[4] = {0, 1, 0, -1};
        const int q = (4 * e.rot / n) % 4;
        c = ct[q];
        s = st[q];
      } else {
        const double a = 2.0 * M_PI * e.rot / n;
        c = std::cos(a);
        s = std::sin(a);
      }
    }
    Eigen::Matrix2d m;
    m << c, -s, s, c;
    if (spec_.kind == GroupKind::Dihedral && e.flip) {
      Eigen::Matrix2d mirror;
      mirror << -1.0, 0.0, 0.0, 1.0;
      m = m * mirror;
    }
    return m;
  }

 private:
  GroupSpec spec_;
  std::size_t size_ = 1;
};

enum class RepKind { Trivial, Regular, IndexPower };

/**
 * A representation descriptor. Trivial acts as 1 on R^1; Regular permutes
 * coordinates indexed by group elements (left translation); IndexPower is
 * the k-fold tensor-power permutation action of Symmetric(n) on R^(n^k).
 */
struct RepSpec {
  RepKind kind = RepKind::Trivial;
  GroupSpec group;
  int tensor_power = 0;  // k, IndexPower only

  int dimension() const {
    switch (kind) {
      case RepKind::Trivial: return 1;
      case RepKind::Regular: return static_cast<int>(Group(group).size());
      case RepKind::IndexPower: {
        int d = 1;
        for (int i = 0; i < tensor_power; ++i) d *= group.n;
        return d;
      }
    }
    return 1;
  }

  bool operator==(const RepSpec& o) const {
    return kind == o.kind && group == o.group &&
           (kind != RepKind::IndexPower || tensor_power == o.tensor_power);
  }
};

inline const char* rep_kind_name(RepKind k) {
  switch (k) {
    case RepKind::Trivial: return "trivial";
    case RepKind::Regular: return "regular";
    case RepKind::IndexPower: return "index_power";
  }
  return "?";
}

/**
 * Applies a permutation to the index axes of a tensor: rows of X are indexed
 * by multi-indices (i_1 .. i_k) over [n]^k (row-major flattening) and the
 * output satisfies Y[(i_1 .. i_k)] = X[(g^-1 i_1 .. g^-1 i_k)].
 * `perm` is one-line notation of g; columns of X are carried along.
 */
inline Eigen::MatrixXd act_on_tensor_indices(int n, int k, const std::vector<int>& perm,
                                             const Eigen::MatrixXd& X) {
  if (n < 1 || k < 0) throw UnsupportedSizeError("bad tensor shape");
  if (static_cast<int>(perm.size()) != n) throw WrongGroupError("permutation degree mismatch");
  std::vector<int> inv(n, -1);
  {
    std::vector<bool> seen(n, false);
    for (int i = 0; i < n; ++i) {
      const int v = perm[i];
      if (v < 0 || v >= n || seen[v]) throw WrongGroupError("invalid permutation");
      seen[v] = true;
      inv[v] = i;
    }
  }
  std::size_t rows = 1;
  for (int i = 0; i < k; ++i) rows *= static_cast<std::size_t>(n);
  if (X.rows() != static_cast<Eigen::Index>(rows))
    throw UnsupportedSizeError("tensor row count does not match n^k");

  Eigen::MatrixXd Y(X.rows(), X.cols());
  std::vector<int> digits(std::max(k, 1), 0);
  for (std::size_t a = 0; a < rows; ++a) {
    std::size_t rest = a;
    for (int pos = k - 1; pos >= 0; --pos) {
      digits[pos] = static_cast<int>(rest % n);
      rest /= n;
    }
    std::size_t src = 0;
    for (int pos = 0; pos < k; ++pos) src = src * n + static_cast<std::size_t>(inv[digits[pos]]);
    Y.row(static_cast<Eigen::Index>(a)) = X.row(static_cast<Eigen::Index>(src));
  }
  return Y;
}

/**
 * Materializes the representation matrix of `g`. Regular representations are
 * capped at |G| <= 4096 to keep the result dense-friendly.
 */
inline Eigen::MatrixXd rep_matrix(const RepSpec& rep, const GroupElement& g) {
  Group G(rep.group);
  G.check_member(g);
  switch (rep.kind) {
    case RepKind::Trivial: {
      Eigen::MatrixXd m(1, 1);
      m(0, 0) = 1.0;
      return m;
    }
    case RepKind::Regular: {
      const std::size_t sz = G.size();
      if (sz > 4096) throw UnsupportedSizeError("regular representation too large");
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sz),
                                                static_cast<Eigen::Index>(sz));
      for (std::size_t h = 0; h < sz; ++h) {
        const std::size_t gh = G.index_of(G.multiply(g, G.element(h)));
        m(static_cast<Eigen::Index>(gh), static_cast<Eigen::Index>(h)) = 1.0;
      }
      return m;
    }
    case RepKind::IndexPower: {
      if (rep.group.kind != GroupKind::Symmetric)
        throw UnsupportedRepError("index_power requires a symmetric group");
      const int n = rep.group.n;
      const int dim = rep.dimension();
      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = g.perm[i];
      Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
      // Columns of the identity are the canonical basis; permuting their
      // tensor indices materializes the action.
      return act_on_tensor_indices(n, rep.tensor_power, perm, eye);
    }
  }
  throw UnsupportedRepError("unknown representation kind");
}

/**
 * Discretized action of a planar group on scalar fields over an odd
 * d x d pixel grid centered at the middle pixel. Elements whose matrices
 * are integer (multiples of 90 degrees, axis/diagonal mirrors) act as exact
 * pixel permutations; all others act by upsample -> bilinear resample ->
 * block-average downsample.
 */
class GridAction {
 public:
  GridAction(GroupSpec group, int side, int upsample_factor = 3)
      : group_(group), side_(side), upsample_(upsample_factor) {
    if (side_ < 1 || side_ % 2 == 0)
      throw UnsupportedSizeError("grid side must be odd and >= 1");
    if (!group_.is_planar())
      throw WrongGroupError("grid action requires a planar group");
    if (upsample_ < 1) throw UnsupportedSizeError("upsample factor must be >= 1");
  }

  const Group& group() const { return group_; }
  int side() const { return side_; }
  int upsample_factor() const { return upsample_; }

  /// True when the element acts as an exact pixel permutation.
  bool is_exact(const GroupElement& e) const {
    const Eigen::Matrix2d m = group_.planar_matrix(e);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (m(i, j) != std::round(m(i, j))) return false;
    return true;
  }

  /// Image of a centered point under the element's planar matrix.
  Eigen::Vector2d map_point(const GroupElement& e, const Eigen::Vector2d& x) const {
    return group_.planar_matrix(e) * x;
  }

  /// Centered (x, y) coordinates of pixel (row, col).
  Eigen::Vector2d pixel_center(int row, int col) const {
    const double c = (side_ - 1) / 2.0;
    return Eigen::Vector2d(col - c, c - row);
  }

  /**
   * Bilinear splat of unit mass at centered point `pos` onto the grid.
   * Appends (pixel_index, weight) pairs; weights are nonnegative and sum to
   * at most 1 (mass falling outside the grid is dropped).
   */
  void splat(const Eigen::Vector2d& pos, std::vector<std::pair<int, double>>& out) const {
    const double c = (side_ - 1) / 2.0;
    const double row = c - pos.y();
    const double col = pos.x() + c;
    const double fr = std::floor(row);
    const double fc = std::floor(col);
    const double ar = row - fr;
    const double ac = col - fc;
    const int r0 = static_cast<int>(fr);
    const int c0 = static_cast<int>(fc);
    const double w[4] = {(1 - ar) * (1 - ac), (1 - ar) * ac, ar * (1 - ac), ar * ac};
    const int rr[4] = {r0, r0, r0 + 1, r0 + 1};
    const int cc[4] = {c0, c0 + 1, c0, c0 + 1};
    for (int i = 0; i < 4; ++i) {
      if (w[i] == 0.0) continue;
      if (rr[i] < 0 || rr[i] >= side_ || cc[i] < 0 || cc[i] >= side_) continue;
      out.emplace_back(rr[i] * side_ + cc[i], w[i]);
    }
  }

  /// Applies the element to a row-major scalar field of length side^2.
  Eigen::VectorXd apply(const GroupElement& e, const Eigen::VectorXd& field) const {
    if (field.size() != static_cast<Eigen::Index>(side_) * side_)
      throw UnsupportedSizeError("field length does not match grid");
    const Eigen::Matrix2d m = group_.planar_matrix(e);
    if (is_exact(e)) return apply_exact(m, field);
    return apply_resampled(m, field);
  }

 private:
  Eigen::VectorXd apply_exact(const Eigen::Matrix2d& m, const Eigen::VectorXd& field) const {
    // out(p) = in(M^-1 p); for orthogonal M the inverse is the transpose.
    const Eigen::Matrix2d minv = m.transpose();
    const int c = (side_ - 1) / 2;
    Eigen::VectorXd out(field.size());
    for (int r = 0; r < side_; ++r) {
      for (int col = 0; col < side_; ++col) {
        const int x = col - c;
        const int y = c - r;
        const int sx = static_cast<int>(std::lround(minv(0, 0) * x + minv(0, 1) * y));
        const int sy = static_cast<int>(std::lround(minv(1, 0) * x + minv(1, 1) * y));
        const int sr = c - sy;
        const int sc = sx + c;
        out[r * side_ + col] = field[sr * side_ + sc];
      }
    }
    return out;
  }

  Eigen::VectorXd apply_resampled(const Eigen::Matrix2d& m, const Eigen::VectorXd& field) const {
    const Eigen::Matrix2d minv = m.transpose();
    const double c = (side_ - 1) / 2.0;
    const int u = upsample_;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(field.size());
    for (int r = 0; r < side_; ++r) {
      for (int col = 0; col < side_; ++col) {
        double acc = 0.0;
        for (int si = 0; si < u; ++si) {
          for (int sj = 0; sj < u; ++sj) {
            const double x = (col - c) + ((sj + 0.5) / u - 0.5);
            const double y = (c - r) - ((si + 0.5) / u - 0.5);
            const double sx = minv(0, 0) * x + minv(0, 1) * y;
            const double sy = minv(1, 0) * x + minv(1, 1) * y;
            acc += bilinear(field, sx, sy);
          }
        }
        out[r * side_ + col] = acc / (u * u);
      }
    }
    return out;
  }

  double bilinear(const Eigen::VectorXd& field, double x, double y) const {
    const double c = (side_ - 1) / 2.0;
    const double row = c - y;
    const double col = x + c;
    const double fr = std::floor(row);
    const double fc = std::floor(col);
    const double ar = row - fr;
    const double ac = col - fc;
    const int r0 = static_cast<int>(fr);
    const int c0 = static_cast<int>(fc);
    double acc = 0.0;
    const double w[4] = {(1 - ar) * (1 - ac), (1 - ar) * ac, ar * (1 - ac), ar * ac};
    const int rr[4] = {r0, r0, r0 + 1, r0 + 1};
    const int cc[4] = {c0, c0 + 1, c0, c0 + 1};
    for (int i = 0; i < 4; ++i) {
      if (w[i] == 0.0) continue;
      if (rr[i] < 0 || rr[i] >= side_ || cc[i] < 0 || cc[i] >= side_) continue;
      acc += w[i] * field[rr[i] * side_ + cc[i]];
    }
    return acc;
  }

  Group group_;
  int side_;
  int upsample_;
};

}  // namespace equiprune
