#include <cmath>
#include <random>

#include "doctest.h"
#include "phlin/map_model.hpp"

using namespace phlin;

namespace {

Vec v3(double a, double b, double c) {
  Vec x(3);
  x << a, b, c;
  return x;
}

SpectralStructure diag3(double u_modulus) {
  SpectralStructure st;
  st.blocks = {{1, 0.5, BlockClass::stable}, {1, 1.0, BlockClass::center}, {1, u_modulus, BlockClass::unstable}};
  st.ls_minus = 0.4;
  st.ls_plus = 0.6;
  st.lu_minus = 1.5;
  st.lu_plus = 3.0;
  st.varsigma = 0.1;
  return st;
}

}  // namespace

TEST_CASE("split selects coordinate blocks") {
  Layout L{{1}, 1, {1}};
  const BlockVector x(L, v3(0.1, 0.2, 0.3));
  const Vec cs = split(x, "cs");
  REQUIRE(cs.size() == 2);
  CHECK(cs(0) == 0.1);
  CHECK(cs(1) == 0.2);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 10; ++k) {
    const Vec y = v3(u(rng), u(rng), u(rng));
    const Vec sum = embed(L, project(L, y, Proj::s), Proj::s) + embed(L, project(L, y, Proj::c), Proj::c) +
                    embed(L, project(L, y, Proj::u), Proj::u);
    CHECK((sum - y).norm() == 0.0);
  }

  Layout L4{{1}, 1, {1, 1}};
  Vec x4(4);
  x4 << 1, 2, 3, 4;
  const BlockVector b4(L4, x4);
  // blocks: stable 0, unstable 1 and 2
  CHECK(b4.block(2)(0) == 4.0);
  CHECK(b4.block(1)(0) == 3.0);
  CHECK_THROWS_AS(split(b4, "xy"), ConfigError);
}

TEST_CASE("evaluate_map on catalog maps") {
  const MapModel lin = make_lin3();
  CHECK((lin.eval(v3(1, 1, 1)) - v3(0.5, 1, 2)).norm() == 0.0);
  for (const auto& m : builtin_test_maps()) CHECK(m.eval(Vec::Zero(m.layout().dim())).norm() == 0.0);

  // hand expansion of (0.5 s + e c s + e u^2, c + e s u, 2u + e c u)
  const double e = 0.05, s = 0.1, c = 0.2, u = 0.1;
  const Vec want = v3(0.5 * s + e * c * s + e * u * u, c + e * s * u, 2 * u + e * c * u);
  CHECK((make_poly3().eval(v3(s, c, u)) - want).norm() < 1e-16);
}

TEST_CASE("evaluate_jacobian") {
  const MapModel lin = make_lin3();
  const Mat A = Vec(v3(0.5, 1, 2)).asDiagonal();
  CHECK((lin.jacobian(v3(0.3, -0.2, 0.7)) - A).norm() == 0.0);
  const MapModel p = make_poly3();
  CHECK((p.jacobian(Vec::Zero(3)) - A).norm() == 0.0);
  const Vec x = v3(0.1, 0.2, 0.1);
  const Mat J = p.jacobian(x);
  const Mat Jfd = fd_jacobian([&](const Vec& y) { return p.eval(y); }, x);
  CHECK((J - Jfd).norm() / J.norm() < 1e-6);
}

TEST_CASE("spectral gap validation") {
  CHECK(validate_structure(diag3(2.0)).ok);
  const ValidationReport bad = validate_structure(diag3(0.9));
  CHECK_FALSE(bad.ok);
  CHECK_FALSE(bad.violations.empty());

  const MapModel tw = make_twou4();
  CHECK(validate_structure(tw.structure()).ok);
  CHECK(validate_spectral_gaps(tw.structure(), tw).ok);
  CHECK(validate_spectral_gaps(make_poly3().structure(), make_poly3()).ok);
}

TEST_CASE("builtin catalog") {
  const auto maps = builtin_test_maps();
  CHECK(maps.size() >= 5);
  for (const auto& m : maps) {
    const bool stable_only = m.layout().nc() == 0 && m.layout().nu() == 0;
    CHECK_MESSAGE(validate_structure(m.structure(), stable_only).ok, m.name());
  }
  CHECK_THROWS_AS(catalog_lookup("NOPE"), ConfigError);

  // POLY3 fixes X_c pointwise
  const MapModel p = make_poly3();
  for (double c : {-0.3, -0.1, 0.0, 0.2, 0.3}) CHECK((p.eval(v3(0, c, 0)) - v3(0, c, 0)).norm() == 0.0);
}

TEST_CASE("CEX1 is C1 with DF(0) = mu and a diverging Holder quotient") {
  const double mu = 0.5;
  const MapModel m = make_cex1(mu);
  Vec x(1);
  // the difference quotient F(h)/h tends to mu like mu / |log h|
  for (int j : {20, 100, 1000}) {
    const double h = std::ldexp(1.0, -j);
    x(0) = h;
    const double q = m.eval(x)(0) / h;
    CHECK(q > mu);
    CHECK(q - mu < 1.1 * mu / (j * std::log(2.0)));
  }
  // independent oracle: DF(x) = mu (1 - 1/log|x|)
  auto quotient = [&](int j, double alpha) {
    const double a = std::ldexp(1.0, -j), b = std::ldexp(1.0, -j - 1);
    const double da = mu * (1 - 1 / std::log(a)), db = mu * (1 - 1 / std::log(b));
    return std::abs(da - db) / std::pow(a - b, alpha);
  };
  for (int j : {40, 200, 800}) {
    const double a = std::ldexp(1.0, -j);
    x(0) = a;
    CHECK(m.jacobian(x)(0, 0) == doctest::Approx(mu * (1 - 1 / std::log(a))).epsilon(1e-14));
  }
  for (double alpha : {0.1, 0.3})
    CHECK(quotient(900, alpha) > 100 * quotient(100, alpha));
}

TEST_CASE("map spec round trip") {
  const MapModel p = make_poly3();
  const MapModel q = parse_map_spec(map_spec_json(p));
  CHECK(q.name() == p.name());
  const Vec x = v3(0.12, -0.07, 0.2);
  CHECK((q.eval(x) - p.eval(x)).norm() == 0.0);
  CHECK_THROWS_AS(parse_map_spec("{not json"), ConfigError);
}

TEST_CASE("declared flags hold on their grids") {
  for (const auto& m : {make_lin3(), make_poly3(), make_poly3b(), make_twou4()})
    for (const auto& f : check_flags(m))
      if (f.declared) {
        const std::string what = m.name() + " " + f.flag;
        CHECK_MESSAGE(f.residual <= 1e-12, what);
      }
}
