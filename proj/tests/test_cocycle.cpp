#include <cmath>
#include <random>

#include "doctest.h"
#include "phlin/cocycle.hpp"

using namespace phlin;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

// F^n by plain iteration
Vec iterate(const DynMap& F, Vec x, int n) {
  for (int k = 0; k < n; ++k) x = F.eval(x);
  return x;
}

// direction a generic vector converges to when pushed forward from g^{-n}(x)
Vec forward_direction(const Cocycle& c, const Vec& x, int n, const Vec& v) {
  std::vector<Vec> back{x};
  for (int k = 0; k < n; ++k) back.push_back(c.ginv(back.back()));
  Vec w = v;
  for (int k = n; k >= 1; --k) w = (c.A(back[static_cast<size_t>(k)]) * w).normalized();
  return w;
}

// direction a generic vector converges to when pulled back from g^{n}(x)
Vec backward_direction(const Cocycle& c, const Vec& x, int n, const Vec& v) {
  std::vector<Vec> fw{x};
  for (int k = 0; k < n; ++k) fw.push_back(c.g(fw.back()));
  Vec w = v;
  for (int k = n - 1; k >= 0; --k) w = c.A(fw[static_cast<size_t>(k)]).partialPivLu().solve(w).normalized();
  return w;
}

double line_angle(const Vec& a, const Vec& b) {
  return std::acos(std::min(1.0, std::abs(a.normalized().dot(b.normalized()))));
}

}  // namespace

TEST_CASE("cocycle product identities") {
  const MapModel F = make_poly3b();
  const Cocycle c = center_cocycle(F);
  const Vec b = vec({0.15});
  const Mat I = Mat::Identity(3, 3);
  CHECK((cocycle_product(c, 3, 3, b) - I).norm() == 0.0);
  for (int m : {-4, 0, 2, 5})
    for (int n : {-3, 1, 4}) {
      const Mat lhs = cocycle_product(c, m, n, b) * cocycle_product(c, n, m, b);
      CHECK((lhs - I).norm() < 1e-12);
    }
  // cocycle property A(m, k) A(k, n) = A(m, n)
  const Mat left = cocycle_product(c, 6, 2, b) * cocycle_product(c, 2, -3, b);
  CHECK((left - cocycle_product(c, 6, -3, b)).norm() < 1e-12);

  const MapModel lin = make_lin3();
  const Cocycle cl = center_cocycle(lin);
  const Mat A = lin.linear_part();
  for (int m : {-3, 0, 4})
    for (int n : {-2, 1}) {
      Mat want = Mat::Identity(3, 3);
      for (int k = 0; k < std::abs(m - n); ++k) want = want * (m >= n ? A : A.inverse());
      CHECK((cocycle_product(cl, m, n, vec({0.1})) - want).norm() < 1e-14);
    }
}

TEST_CASE("cocycle product is the derivative of the iterate along X_c") {
  const MapModel F = make_poly3b();
  const Cocycle c = center_cocycle(F);
  const Vec b = vec({0.15});
  const Vec x = embed(F.layout(), b, Proj::c);
  const Mat P = cocycle_product(c, 5, 0, b);
  const Mat J = fd_jacobian([&](const Vec& y) { return iterate(F, y, 5); }, x);
  CHECK((P - J).norm() / P.norm() < 1e-7);
}

TEST_CASE("dichotomy rates sit inside the declared envelopes") {
  for (const auto& F : {make_lin3(), make_poly3(), make_poly3b(), make_twou4()}) {
    const DichotomyEstimate d = estimate_dichotomy(F, F.structure(), 10, 20);
    CHECK_MESSAGE(d.violations.empty(), F.name());
    CHECK(d.s_plus < F.structure().ls_plus);
    CHECK(d.u_minus > F.structure().lu_minus);
  }
  const DichotomyEstimate lin = estimate_dichotomy(make_lin3(), make_lin3().structure(), 3, 10);
  CHECK(lin.s_plus == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(lin.u_minus == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("invariant splitting") {
  // without nonlinearity the splitting is the coordinate axes
  {
    const MapModel F = make_twou4(0.0);
    const Cocycle c = unstable_cocycle(F);
    const SplittingField f = compute_invariant_splitting(c, F.layout(), vec({0.1, -0.15}));
    CHECK((f.V - Mat::Identity(2, 2)).norm() < 1e-15);
  }
  const MapModel F = make_twou4();
  const Cocycle c = unstable_cocycle(F);
  const Vec g = vec({0.7, 0.3});
  for (const Vec& x : {vec({0.1, -0.15}), vec({-0.2, 0.2}), vec({0.0, 0.1})}) {
    const SplittingField f = compute_invariant_splitting(c, F.layout(), x);
    CHECK(line_angle(f.frames[1].col(0), forward_direction(c, x, 60, g)) < 1e-6);
    CHECK(line_angle(f.frames[0].col(0), backward_direction(c, x, 60, g)) < 1e-6);
    // brute force: the invariant line fields minimize the transport residual over an angle grid
    const Vec gx = c.g(x);
    const SplittingField fg = compute_invariant_splitting(c, F.layout(), gx);
    for (int i = 0; i < 2; ++i) {
      const Vec there = fg.frames[static_cast<size_t>(i)].col(0);
      auto residual = [&](double th) {
        const Vec w = c.A(x) * vec({std::cos(th), std::sin(th)});
        return (w - there * there.dot(w)).norm() / w.norm();
      };
      // golden-section refinement of the best angle on a coarse grid
      double best = 0, rbest = 1e300;
      for (int k = 0; k < 3600; ++k) {
        const double th = M_PI * k / 3600;
        if (residual(th) < rbest) rbest = residual(best = th);
      }
      double a = best - M_PI / 3600, b = best + M_PI / 3600;
      const double gr = (std::sqrt(5.0) - 1) / 2;
      for (int k = 0; k < 80; ++k) {
        const double m1 = b - gr * (b - a), m2 = a + gr * (b - a);
        (residual(m1) < residual(m2) ? b : a) = residual(m1) < residual(m2) ? m2 : m1;
      }
      const Vec brute = vec({std::cos(0.5 * (a + b)), std::sin(0.5 * (a + b))});
      CHECK(line_angle(brute, f.frames[static_cast<size_t>(i)].col(0)) < 1e-6);
    }
    const auto along = splitting_along_orbit(c, F.layout(), x, 3);
    for (int k = 0; k < 3; ++k) CHECK(along[static_cast<size_t>(k)].invariance_residual < 1e-10);

    // P_1 sends E_i to X_i
    const Mat P1 = assemble_P1(f);
    CHECK((P1 * f.V - Mat::Identity(2, 2)).norm() < 1e-12);
    const Vec e0 = P1 * f.frames[0].col(0), e1 = P1 * f.frames[1].col(0);
    CHECK(std::abs(e0(1)) < 1e-12);
    CHECK(std::abs(e1(0)) < 1e-12);
  }
}

TEST_CASE("transfer series") {
  const MapModel F = make_poly3();
  TransferField T(unstable_cocycle(F), F.layout());
  T.calibrate();
  for (double th : T.calibration().theta) CHECK(th < 1);

  // on X_c the series is trivial
  const BSeries onc = T.transfer_B(vec({0.0, 0.17}), 0);
  CHECK((onc.B - Mat::Identity(1, 1)).norm() == 0.0);

  // B = lim (A(c_{n-1})...A(c_0))^{-1} A(y_{n-1})...A(y_0)
  const Cocycle& c = T.cocycle();
  for (const Vec& x : {vec({0.1, 0.1}), vec({-0.2, 0.05})}) {
    Vec y = x, xc = x;
    xc(0) = 0;
    Mat Py = Mat::Identity(1, 1), Pc = Py;
    for (int k = 0; k < 40; ++k) {
      Py = c.A(y) * Py;
      Pc = c.A(xc) * Pc;
      y = c.g(y);
      xc = c.g(xc);
    }
    const Mat want = Pc.inverse() * Py;
    CHECK((T.transfer_B(x, 0).B - want).norm() < 1e-12);
  }
}

TEST_CASE("cohomological equation residual") {
  for (const auto& F : {make_poly3(), make_poly3b(), make_twou4()}) {
    TransferField T(unstable_cocycle(F), F.layout());
    T.calibrate();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-0.2, 0.2);
    double worst = 0;
    for (int i = 0; i < 10; ++i) worst = std::max(worst, cohomology_residual(T, vec({U(rng), U(rng)})));
    CHECK_MESSAGE(worst <= 1e-6, F.name());
  }
}

TEST_CASE("Holder exponent bound") {
  auto oracle = [](double t1, double t2, double rho, double a) {
    return std::log(t1 * rho) / std::log(t1 / t2) * a;
  };
  CHECK(holder_exponent_bound(0.5, 0.8, 1, 1) == 1.0);
  CHECK(holder_exponent_bound(0.25, 2, 1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(holder_exponent_bound(0.5, 2, 1, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(holder_exponent_bound(0.5, 1, 1, 1) == doctest::Approx(0.99).epsilon(1e-14));
  CHECK(holder_exponent_bound(0.25, 2, 1.2, 0.7) == doctest::Approx(oracle(0.25, 2, 1.2, 0.7)).epsilon(1e-14));
  CHECK(holder_exponent_bound(0.25, 2, 1.2, 0.7) < holder_exponent_bound(0.25, 2, 1, 0.7));
  CHECK_THROWS_AS(holder_exponent_bound(0.5, 2, 2, 1), ConfigError);
  CHECK_THROWS_AS(holder_exponent_bound(0.5, 2, 1, 1.5), ConfigError);
}
