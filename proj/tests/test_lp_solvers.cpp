#include <cmath>

#include "doctest.h"
#include "phlin/lp.hpp"
#include "phlin/verification.hpp"

using namespace phlin;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

}  // namespace

TEST_CASE("admissible weights") {
  const SpectralStructure st = make_poly3().structure();
  const auto iv = unstable_rho_interval(st);
  CHECK(iv.first == doctest::Approx(1.1));
  CHECK(iv.second > iv.first);
  CHECK(log_midpoint({1.0, 4.0}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(admissible_unstable(st, {}).rho == doctest::Approx(std::sqrt(iv.first * iv.second)));
  LPConfig bad;
  bad.rho = 2.5;
  CHECK_THROWS_AS(admissible_unstable(st, bad), ConfigError);
  CHECK_THROWS_AS(FoliationChart(make_poly3(), st, bad), ConfigError);
  bad.rho = 0.95;
  CHECK_THROWS_AS(admissible_stable(st, bad), ConfigError);
}

TEST_CASE("unstable LP on the linear map") {
  const MapModel F = make_lin3();
  const FoliationChart chart(F, F.structure());
  const Vec x = vec({0.1, -0.05, 0.2});
  // the leaf through x is x_cs + X_u: nothing to solve
  const auto zero = chart.solve(x, vec({0.2}));
  for (int n = zero.lo; n <= zero.hi; ++n) CHECK(zero.at(n).norm() == 0.0);
  // offset q_n = A^n (z_u - x_u) on X_u
  const auto q = chart.solve(x, vec({0.15}));
  for (int n = q.lo; n <= q.hi; ++n) {
    CHECK(q.at(n)(2) == doctest::Approx(std::pow(2.0, n) * -0.05).epsilon(1e-13));
    CHECK(q.at(n).head(2).norm() == 0.0);
  }
}

TEST_CASE("unstable LP solutions are orbit differences") {
  const MapModel F = make_poly3();
  LPConfig cfg;
  cfg.N = 25;
  const FoliationChart chart(F, F.structure(), cfg);
  const Vec x = vec({0.2, 0.1, 0.1});
  const auto q = chart.solve(x, vec({0.3}));
  CHECK(q.lo == -25);
  CHECK(lp_orbit_consistency_check(F, q, x, -10) <= 1e-8);
  // h_u(x, pi_u x) = pi_cs x
  for (const Vec& y : {x, vec({-0.15, 0.2, -0.1}), vec({0.0, 0.0, 0.0})})
    CHECK((chart.h_u(y, project(F.layout(), y, Proj::u)) - project(F.layout(), y, Proj::cs)).norm() == 0.0);
  // leaves through points of one leaf coincide
  const Vec z = chart.leaf_point(x, vec({0.3}));
  CHECK((chart.leaf_point(z, vec({0.05})) - chart.leaf_point(x, vec({0.05}))).norm() < 1e-12);
}

TEST_CASE("stable LP on X_cs follows forward orbits") {
  const MapModel F = make_poly3b();
  const Layout& L = F.layout();
  const LPConfig cfg = admissible_stable(F.structure(), {});
  const Vec xcs = vec({0.1, 0.15});
  const Vec zs = vec({-0.12});
  const StableSolution sol = solve_stable_lp_on_Xcs(F, xcs, zs, cfg);
  auto G = [&](const Vec& y) { return project(L, F.eval(embed(L, y, Proj::cs)), Proj::cs); };
  Vec a = xcs, b(2);
  b << zs(0), sol.h_s(0);
  CHECK((b - a - sol.p.at(0)).norm() < 1e-15);
  for (int n = 0; n <= 10; ++n) {
    CHECK((sol.p.at(n) - (b - a)).norm() <= 1e-10);
    a = G(a);
    b = G(b);
  }
  // h_s(x_cs, pi_s x_cs) = x_c
  CHECK(std::abs(solve_stable_lp_on_Xcs(F, xcs, xcs.head(1), cfg).h_s(0) - 0.15) == 0.0);

  // the constant-coefficient LP in R^3 gives the same leaf when X_cs is invariant
  const auto cl = solve_classical_lp(F, embed(L, xcs, Proj::cs), zs, cfg);
  CHECK(std::abs(cl.at(0)(2)) < 1e-12);
  CHECK(std::abs(cl.at(0)(1) - sol.p.at(0)(1)) < 1e-10);
}

TEST_CASE("derivative LP matches differences of the classical LP") {
  const MapModel F = make_poly3b();
  const Layout& L = F.layout();
  const LPConfig cfg = admissible_stable(F.structure(), {});
  const Vec xc = vec({0.2});
  const auto D = solve_derivative_lp(F, xc, cfg);
  REQUIRE(D.size() == static_cast<size_t>(cfg.N + 1));
  const Vec x = embed(L, xc, Proj::c);
  const double h = 1e-5;
  const Vec pp = solve_classical_lp(F, x, vec({h}), cfg).at(0);
  const Vec pm = solve_classical_lp(F, x, vec({-h}), cfg).at(0);
  const Vec fd = (pp - pm) / (2 * h);
  CHECK((D[0].col(0) - fd).norm() < 1e-5);
  CHECK(D[0](0, 0) == 1.0);
}

TEST_CASE("leaf membership oracle") {
  const MapModel F = make_lin3();
  const double rho = log_midpoint(oracle_rho_interval(F.structure()));
  const Vec x = Vec::Zero(3);
  CHECK(leaf_membership_oracle(F, x, vec({0, 0, 0.1}), rho, 15).member);
  CHECK_FALSE(leaf_membership_oracle(F, x, vec({0.1, 0, 0}), rho, 15).member);
  CHECK_FALSE(leaf_membership_oracle(F, x, vec({0, 0.1, 0}), rho, 15).member);
  CHECK(leaf_membership_oracle(F, x, vec({0.1, 0, 0}), 1.5, 15, 10, true).member);

  const MapModel P = make_poly3();
  const FoliationChart chart(P, P.structure());
  const Vec y = vec({0.1, -0.1, 0.05});
  const Vec z = chart.leaf_point(y, vec({0.12}));
  CHECK(leaf_membership_oracle(P, y, z, rho, 20).member);
  Vec off = z;
  off(0) += 1e-3;
  CHECK_FALSE(leaf_membership_oracle(P, y, off, rho, 20).member);
}

TEST_CASE("invariant manifold graphs") {
  const MapModel F = make_poly3();
  CHECK(center_graph(F, F.structure(), vec({0.15})).norm() < 1e-14);
  CHECK(center_stable_graph(F, F.structure(), vec({0.1, 0.15})).norm() < 1e-14);
  // X_cu is not invariant for this map (x_u^2 feeds the stable row); its graph must be
  const Vec w = center_unstable_graph(F, F.structure(), vec({0.05, 0.04}));
  CHECK(w.norm() > 1e-6);
  const Vec y = F.eval(vec({w(0), 0.05, 0.04}));
  const Vec w1 = center_unstable_graph(F, F.structure(), y.tail(2));
  CHECK(std::abs(w1(0) - y(0)) < 1e-10);
}
