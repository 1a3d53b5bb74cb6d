#include <catch2/catch_amalgamated.hpp>

#include <iostream>

#include "equiprune/groups.hpp"

using namespace equiprune;

namespace {

std::vector<GroupSpec> catalog() {
  return {
      {GroupKind::Trivial, 1},      {GroupKind::Cyclic, 1},       {GroupKind::Cyclic, 2},
      {GroupKind::Cyclic, 4},       {GroupKind::Cyclic, 8},       {GroupKind::Dihedral, 1},
      {GroupKind::Dihedral, 2},     {GroupKind::Dihedral, 4},     {GroupKind::Translation2D, 3},
      {GroupKind::Translation2D, 5}, {GroupKind::Symmetric, 3},   {GroupKind::Symmetric, 4},
  };
}

Eigen::VectorXd delta_field(int d, int row, int col) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(d * d);
  f[row * d + col] = 1.0;
  return f;
}

}  // namespace

TEST_CASE("enumeration sizes and canonical order") {
  CHECK(Group({GroupKind::Trivial, 1}).size() == 1);
  CHECK(Group({GroupKind::Cyclic, 4}).size() == 4);
  CHECK(Group({GroupKind::Dihedral, 4}).size() == 8);
  CHECK(Group({GroupKind::Translation2D, 3}).size() == 9);
  CHECK(Group({GroupKind::Symmetric, 3}).size() == 6);
  CHECK(Group({GroupKind::Symmetric, 8}).size() == 40320);

  // Cyclic elements are ordered by increasing angle.
  Group c4({GroupKind::Cyclic, 4});
  for (int i = 0; i < 4; ++i) CHECK(c4.element(i).rot == i);

  // Dihedral lists rotations first, then reflections.
  Group d4({GroupKind::Dihedral, 4});
  for (int i = 0; i < 4; ++i) {
    CHECK(d4.element(i).flip == 0);
    CHECK(d4.element(i + 4).flip == 1);
  }

  // Symmetric elements are lexicographic in one-line notation.
  Group s3({GroupKind::Symmetric, 3});
  auto first = s3.element(0);
  auto last = s3.element(5);
  CHECK((first.perm[0] == 0 && first.perm[1] == 1 && first.perm[2] == 2));
  CHECK((last.perm[0] == 2 && last.perm[1] == 1 && last.perm[2] == 0));
  for (std::size_t i = 0; i + 1 < s3.size(); ++i) {
    auto a = s3.element(i);
    auto b = s3.element(i + 1);
    std::vector<int> va(a.perm.begin(), a.perm.begin() + 3);
    std::vector<int> vb(b.perm.begin(), b.perm.begin() + 3);
    CHECK(va < vb);
  }
}

TEST_CASE("group axioms hold on the catalog") {
  for (const auto& spec : catalog()) {
    Group g(spec);
    const auto els = g.elements();
    const auto e = g.identity();
    CHECK(g.index_of(e) == 0);

    for (std::size_t i = 0; i < els.size(); ++i) {
      // index round-trip
      CHECK(g.index_of(els[i]) == i);
      // identity and inverse laws
      CHECK(g.multiply(e, els[i]) == els[i]);
      CHECK(g.multiply(els[i], e) == els[i]);
      CHECK(g.multiply(els[i], g.inverse(els[i])) == e);
      CHECK(g.multiply(g.inverse(els[i]), els[i]) == e);
    }

    // closure
    for (const auto& a : els)
      for (const auto& b : els) CHECK(g.index_of(g.multiply(a, b)) < g.size());

    // associativity, exhaustive for small groups, sampled otherwise
    if (els.size() <= 16) {
      for (const auto& a : els)
        for (const auto& b : els)
          for (const auto& c : els)
            CHECK(g.multiply(g.multiply(a, b), c) == g.multiply(a, g.multiply(b, c)));
    } else {
      Rng rng(7);
      for (int t = 0; t < 200; ++t) {
        const auto& a = els[rng.below(els.size())];
        const auto& b = els[rng.below(els.size())];
        const auto& c = els[rng.below(els.size())];
        CHECK(g.multiply(g.multiply(a, b), c) == g.multiply(a, g.multiply(b, c)));
      }
    }
  }
}

TEST_CASE("foreign elements are rejected") {
  Group c4({GroupKind::Cyclic, 4});
  Group c5({GroupKind::Cyclic, 5});
  CHECK_THROWS_AS(c4.multiply(c4.element(1), c5.element(1)), WrongGroupError);
  RepSpec reg{RepKind::Regular, {GroupKind::Cyclic, 4}, 0};
  CHECK_THROWS_AS(rep_matrix(reg, c5.element(2)), WrongGroupError);

  GroupElement bogus = c4.element(0);
  bogus.rot = 9;
  CHECK_THROWS_AS(c4.check_member(bogus), WrongGroupError);
}

TEST_CASE("representation matrices") {
  SECTION("trivial rep is the 1x1 identity") {
    RepSpec triv{RepKind::Trivial, {GroupKind::Dihedral, 4}, 0};
    Group d4({GroupKind::Dihedral, 4});
    for (const auto& e : d4.elements()) {
      auto m = rep_matrix(triv, e);
      REQUIRE(m.rows() == 1);
      CHECK(m(0, 0) == 1.0);
    }
  }

  SECTION("cyclic-2 regular rep swaps coordinates on the non-identity element") {
    Group c2({GroupKind::Cyclic, 2});
    RepSpec reg{RepKind::Regular, c2.spec(), 0};
    auto m = rep_matrix(reg, c2.element(1));
    Eigen::MatrixXd want(2, 2);
    want << 0, 1, 1, 0;
    CHECK((m - want).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep_matrix(reg, c2.identity()).isIdentity(0.0));
  }

  SECTION("homomorphism property for |G| <= 16, all pairs, both kinds") {
    for (const auto& spec : catalog()) {
      Group g(spec);
      if (g.size() > 16) continue;
      for (auto kind : {RepKind::Trivial, RepKind::Regular}) {
        RepSpec rep{kind, spec, 0};
        const auto els = g.elements();
        for (const auto& a : els) {
          for (const auto& b : els) {
            Eigen::MatrixXd lhs = rep_matrix(rep, g.multiply(a, b));
            Eigen::MatrixXd rhs = rep_matrix(rep, a) * rep_matrix(rep, b);
            CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);
          }
        }
      }
    }
    // index-power rep of S3 on [3]^2
    Group s3({GroupKind::Symmetric, 3});
    RepSpec rep{RepKind::IndexPower, s3.spec(), 2};
    for (const auto& a : s3.elements()) {
      for (const auto& b : s3.elements()) {
        Eigen::MatrixXd lhs = rep_matrix(rep, s3.multiply(a, b));
        Eigen::MatrixXd rhs = rep_matrix(rep, a) * rep_matrix(rep, b);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }

  SECTION("planar matrices are a homomorphism") {
    for (const auto& spec : catalog()) {
      Group g(spec);
      if (!g.is_planar()) continue;
      for (const auto& a : g.elements()) {
        for (const auto& b : g.elements()) {
          Eigen::Matrix2d lhs = g.planar_matrix(g.multiply(a, b));
          Eigen::Matrix2d rhs = g.planar_matrix(a) * g.planar_matrix(b);
          CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
        }
      }
    }
  }
}

TEST_CASE("tensor index action") {
  SECTION("identity permutation leaves tensors unchanged") {
    Rng rng(11);
    Eigen::MatrixXd X(9, 2);
    for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
    std::vector<int> id{0, 1, 2};
    CHECK((act_on_tensor_indices(3, 2, id, X) - X).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("swap on n=2, k=1 exchanges the two rows") {
    Eigen::MatrixXd X(2, 1);
    X << 3.0, 7.0;
    std::vector<int> swap{1, 0};
    auto Y = act_on_tensor_indices(2, 1, swap, X);
    CHECK(Y(0, 0) == 7.0);
    CHECK(Y(1, 0) == 3.0);
  }

  SECTION("k=2 entry placement") {
    // Y[(i,j)] = X[(g^-1 i, g^-1 j)] for the 3-cycle g = (0 1 2).
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(9, 1);
    X(0 * 3 + 1, 0) = 1.0;  // X[(0,1)] = 1
    std::vector<int> cyc{1, 2, 0};
    auto Y = act_on_tensor_indices(3, 2, cyc, X);
    // g maps (0,1) to (1,2), so the mass must appear at row (1,2).
    CHECK(Y(1 * 3 + 2, 0) == 1.0);
    CHECK(Y.cwiseAbs().sum() == 1.0);
  }

  SECTION("action law over all of S4 on [4]^2") {
    Group s4({GroupKind::Symmetric, 4});
    Rng rng(5);
    Eigen::MatrixXd X(16, 3);
    for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
    auto as_vec = [&](const GroupElement& e) {
      return std::vector<int>(e.perm.begin(), e.perm.begin() + 4);
    };
    for (std::size_t i = 0; i < s4.size(); i += 3) {
      for (std::size_t j = 0; j < s4.size(); j += 5) {
        auto a = s4.element(i), b = s4.element(j);
        auto lhs = act_on_tensor_indices(4, 2, as_vec(a),
                                         act_on_tensor_indices(4, 2, as_vec(b), X));
        auto rhs = act_on_tensor_indices(4, 2, as_vec(s4.multiply(a, b)), X);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }

  SECTION("invalid permutations are rejected") {
    Eigen::MatrixXd X(4, 1);
    X.setZero();
    CHECK_THROWS_AS(act_on_tensor_indices(2, 2, std::vector<int>{0, 0}, X), WrongGroupError);
    CHECK_THROWS_AS(act_on_tensor_indices(2, 2, std::vector<int>{0}, X), WrongGroupError);
  }
}

TEST_CASE("grid action") {
  SECTION("construction guards") {
    CHECK_THROWS_AS(GridAction({GroupKind::Cyclic, 4}, 4), UnsupportedSizeError);
    CHECK_THROWS_AS(GridAction({GroupKind::Symmetric, 3}, 3), WrongGroupError);
  }

  SECTION("identity is bit-exact") {
    GridAction act({GroupKind::Cyclic, 8}, 5);
    Rng rng(3);
    Eigen::VectorXd f(25);
    for (int i = 0; i < 25; ++i) f[i] = rng.uniform(-1, 1);
    Eigen::VectorXd g = act.apply(act.group().identity(), f);
    for (int i = 0; i < 25; ++i) CHECK(g[i] == f[i]);
  }

  SECTION("quarter turn moves the right neighbor of center to the top") {
    GridAction act({GroupKind::Cyclic, 4}, 3);
    const int c = 1;
    auto rot90 = act.group().element(1);
    Eigen::VectorXd out = act.apply(rot90, delta_field(3, c, c + 1));
    CHECK(out[(c - 1) * 3 + c] == 1.0);
    CHECK(out.cwiseAbs().sum() == 1.0);
  }

  SECTION("D1 mirror flips a field horizontally and squares to identity") {
    GridAction act({GroupKind::Dihedral, 1}, 3);
    auto mirror = act.group().element(1);
    Eigen::VectorXd f(9);
    for (int i = 0; i < 9; ++i) f[i] = i;
    Eigen::VectorXd g = act.apply(mirror, f);
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) CHECK(g[r * 3 + col] == f[r * 3 + (2 - col)]);
    Eigen::VectorXd h = act.apply(mirror, g);
    for (int i = 0; i < 9; ++i) CHECK(h[i] == f[i]);
  }

  SECTION("grid center is fixed by every element") {
    for (auto spec : {GroupSpec{GroupKind::Cyclic, 8}, GroupSpec{GroupKind::Dihedral, 4}}) {
      GridAction act(spec, 5);
      for (const auto& e : act.group().elements()) {
        Eigen::Vector2d img = act.map_point(e, Eigen::Vector2d::Zero());
        CHECK(img.norm() == 0.0);
      }
    }
  }

  SECTION("axis-aligned composition is bit-exact") {
    GridAction act({GroupKind::Dihedral, 4}, 5);
    Rng rng(17);
    Eigen::VectorXd f(25);
    for (int i = 0; i < 25; ++i) f[i] = rng.uniform(-1, 1);
    Group g = act.group();
    for (const auto& a : g.elements()) {
      for (const auto& b : g.elements()) {
        Eigen::VectorXd lhs = act.apply(a, act.apply(b, f));
        Eigen::VectorXd rhs = act.apply(g.multiply(a, b), f);
        for (int i = 0; i < 25; ++i) CHECK(lhs[i] == rhs[i]);
      }
    }
  }

  SECTION("non-axis-aligned composition residual is a bounded, reported constant") {
    // 45-degree steps of C8 involve bilinear resampling; double resampling vs
    // the exact 90-degree permutation has a measurable residual. The value
    // below was measured once on unit-infinity-norm fields and frozen as a
    // regression ceiling.
    GridAction act({GroupKind::Cyclic, 8}, 7);
    Group g = act.group();
    auto r45 = g.element(1);
    auto r90 = g.element(2);
    Rng rng(23);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd f(49);
      for (int i = 0; i < 49; ++i) f[i] = rng.uniform(-1, 1);
      Eigen::VectorXd twice = act.apply(r45, act.apply(r45, f));
      Eigen::VectorXd once = act.apply(r90, f);
      worst = std::max(worst, (twice - once).cwiseAbs().maxCoeff());
    }
    std::cout << "[measured] C8 double-vs-single resampling residual: " << worst << "\n";
    CHECK(worst > 0.0);
    CHECK(worst <= 1.25);  // regression ceiling, not an accuracy claim
  }
}
