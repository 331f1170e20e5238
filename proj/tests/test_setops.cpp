#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pnpmpc/setops.hpp"

using namespace pnpmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

Zonotope random_zonotope(std::mt19937_64& rng, int n, int e) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd c(n);
  MatrixXd G(n, e);
  for (int i = 0; i < n; ++i) c(i) = u(rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < e; ++j) G(i, j) = u(rng);
  return Zonotope(c, G, 0.5 + 0.5 * std::abs(u(rng)));
}

}  // namespace

TEST_CASE("support: unit box, singleton, sheared square") {
  Zonotope box = Zonotope::box(vec2(1, 1));
  CHECK(support(box, vec2(1, 1)) == doctest::Approx(2.0));

  VectorXd p(3);
  p << 1, -2, 0.5;
  Zonotope s = Zonotope::singleton(p);
  VectorXd c(3);
  c << 0.3, 1.0, -2.0;
  CHECK(support(s, c) == doctest::Approx(c.dot(p)));

  MatrixXd G(2, 2);
  G << 1, 1, 0, 1;
  Zonotope sheared(VectorXd::Zero(2), G, 1.0);
  // Oracle: max of c'v over the sign-pattern vertices.
  CHECK(support(sheared, vec2(0, 1)) == doctest::Approx(oracles::support_oracle(sheared, vec2(0, 1))));
  CHECK(support(sheared, vec2(0, 1)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(support(sheared, VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("minkowski_sum: intervals, identity element, support additivity") {
  Zonotope a = Zonotope::box(VectorXd::Constant(1, 1.0));
  Zonotope b = Zonotope::box(VectorXd::Constant(1, 2.0));
  Zonotope s = minkowski_sum(a, b);
  CHECK(support(s, VectorXd::Constant(1, 1.0)) == doctest::Approx(3.0));
  CHECK(support(s, VectorXd::Constant(1, -1.0)) == doctest::Approx(3.0));

  Zonotope z0 = Zonotope::singleton(VectorXd::Zero(1));
  Zonotope same = minkowski_sum(a, z0);
  CHECK(support(same, VectorXd::Constant(1, 1.0)) == doctest::Approx(1.0));

  // unit square (+) unit diamond: support in (1,0) is the sum of supports
  MatrixXd Gd(2, 2);
  Gd << 0.5, 0.5, 0.5, -0.5;
  Zonotope diamond(VectorXd::Zero(2), Gd, 1.0);
  Zonotope sq = Zonotope::box(vec2(1, 1));
  Zonotope sum = minkowski_sum(sq, diamond);
  CHECK(support(sum, vec2(1, 0)) == doctest::Approx(support(sq, vec2(1, 0)) + support(diamond, vec2(1, 0))));
  CHECK(support(sum, vec2(1, 0)) == doctest::Approx(2.0));
}

TEST_CASE("minkowski_sum support additivity on random pairs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    Zonotope A = random_zonotope(rng, 3, 4);
    Zonotope B = random_zonotope(rng, 3, 3);
    Zonotope S = minkowski_sum(A, B);
    for (int k = 0; k < 20; ++k) {
      VectorXd c(3);
      c << u(rng), u(rng), u(rng);
      CHECK(support(S, c) == doctest::Approx(support(A, c) + support(B, c)).epsilon(1e-10));
    }
  }
}

TEST_CASE("linear_image: identity, annihilation, scaling, adjoint property") {
  Zonotope box = Zonotope::box(vec2(1, 1));
  Zonotope same = linear_image(MatrixXd::Identity(2, 2), box);
  CHECK(support(same, vec2(1, 1)) == doctest::Approx(2.0));

  Zonotope zero = linear_image(MatrixXd::Zero(2, 2), box);
  CHECK(support(zero, vec2(1, 0)) == doctest::Approx(0.0));

  Zonotope twice = linear_image(2.0 * MatrixXd::Identity(2, 2), box);
  CHECK(support(twice, vec2(1, 0)) == doctest::Approx(2.0));
  CHECK(support(twice, vec2(0, -1)) == doctest::Approx(2.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    Zonotope Z = random_zonotope(rng, 3, 4);
    MatrixXd M(2, 3);
    for (int i = 0; i < 6; ++i) M(i / 3, i % 3) = u(rng);
    VectorXd c = vec2(u(rng), u(rng));
    CHECK(support(linear_image(M, Z), c) == doctest::Approx(support(Z, VectorXd(M.transpose() * c))));
  }
}

TEST_CASE("zonotope_to_hrep: axis box, parallelogram vertices, degenerate") {
  Zonotope box = Zonotope::box(vec2(1, 1));
  HPolytope H = zonotope_to_hrep(box);
  CHECK(H.num_faces() == 4);
  CHECK(H.contains(vec2(0.99, -0.99)));
  CHECK_FALSE(H.contains(vec2(1.01, 0.0)));

  MatrixXd G(2, 2);
  G << 1, 1, 0, 1;
  Zonotope par(VectorXd::Zero(2), G, 1.0);
  HPolytope Hp = zonotope_to_hrep(par);
  CHECK(Hp.num_faces() == 4);
  // every sign-pattern vertex lies on the boundary: all inside, and each
  // tight on at least n faces
  for (const auto& v : oracles::zonotope_vertices(par)) {
    CHECK(Hp.contains(v, 1e-9));
    int tight = 0;
    for (int r = 0; r < Hp.num_faces(); ++r)
      if (std::abs(Hp.normals.row(r).dot(v) - Hp.offsets(r)) < 1e-9) ++tight;
    CHECK(tight >= 1);
  }

  CHECK_THROWS_AS(zonotope_to_hrep(Zonotope::singleton(VectorXd::Zero(2))), std::domain_error);
  MatrixXd Gdeg(2, 2);
  Gdeg << 1, 2, 1, 2;  // rank 1
  CHECK_THROWS_AS(zonotope_to_hrep(Zonotope(VectorXd::Zero(2), Gdeg, 1.0)), std::domain_error);
  CHECK_THROWS_AS(zonotope_to_hrep(Zonotope(VectorXd::Zero(7), MatrixXd::Identity(7, 7), 1.0)),
                  std::invalid_argument);
}

TEST_CASE("hrep membership agrees with zonotope_member on random points") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 2 + static_cast<int>(rep % 2);
    Zonotope Z = random_zonotope(rng, n, 5);
    HPolytope H;
    try {
      H = zonotope_to_hrep(Z);
    } catch (const std::domain_error&) {
      continue;  // degenerate draw
    }
    for (int k = 0; k < 100; ++k) {
      VectorXd x(n);
      for (int i = 0; i < n; ++i) x(i) = 3.0 * u(rng);
      const bool via_hrep = H.contains(x, 1e-9);
      const bool via_member = zonotope_member(Z, x, 1e-9);
      // Skip the knife edge where the two tolerances may disagree.
      double margin = 1e9;
      for (int r = 0; r < H.num_faces(); ++r)
        margin = std::min(margin, std::abs(H.normals.row(r).dot(x) - H.offsets(r)));
      if (margin < 1e-7) continue;
      CHECK(via_hrep == via_member);
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("zonotope_member: center, separating direction, boundary vertex") {
  MatrixXd G(2, 3);
  G << 1, 0.5, 0.2, 0, 0.7, -0.3;
  Zonotope Z(vec2(0.1, -0.2), G, 1.0);
  CHECK(zonotope_member(Z, Z.center));

  VectorXd outside = Z.center + vec2(5, 0);
  CHECK_FALSE(zonotope_member(Z, outside));

  VectorXd d(3);
  d << 1, -1, 1;
  VectorXd vertex = Z.center + Z.generators * d;
  CHECK(zonotope_member(Z, vertex, 1e-9));

  // membership implies support consistency in random directions
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    VectorXd c = vec2(u(rng), u(rng));
    CHECK(c.dot(vertex) <= support(Z, c) + 1e-9);
  }
}

TEST_CASE("sum_in_polytope: interval examples and singleton") {
  HPolytope P = HPolytope::box(VectorXd::Constant(1, 1.0));
  std::vector<Zonotope> parts{Zonotope::box(VectorXd::Constant(1, 0.5)),
                              Zonotope::box(VectorXd::Constant(1, 0.3))};
  CHECK(sum_in_polytope(parts, P));

  parts[0] = Zonotope::box(VectorXd::Constant(1, 0.8));
  CHECK_FALSE(sum_in_polytope(parts, P));

  std::vector<Zonotope> only_zero{Zonotope::singleton(VectorXd::Zero(1))};
  CHECK(sum_in_polytope(only_zero, P));
}

TEST_CASE("generator dedup merges collinear columns without changing supports") {
  MatrixXd G(2, 4);
  G << 1, 0, -0.5, 0.3, 0, 1, 0, 0.3;
  Zonotope Z(VectorXd::Zero(2), G, 1.0);
  Zonotope D = Z.deduped();
  CHECK(D.num_generators() == 3);  // first and third merge
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    VectorXd c = vec2(u(rng), u(rng));
    CHECK(support(D, c) == doctest::Approx(support(Z, c)).epsilon(1e-12));
  }
}
