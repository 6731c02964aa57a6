#include <cmath>
#include <memory>

#include "doctest.h"
#include "phlin/linearization.hpp"
#include "phlin/verification.hpp"

using namespace phlin;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

ConjugacyChain chain_for(MapModel m) { return ConjugacyChain(run_pipeline(std::make_shared<MapModel>(std::move(m)))); }

const ConjugacyChain& poly3() {
  static const ConjugacyChain c = chain_for(make_poly3());
  return c;
}
const ConjugacyChain& poly3b() {
  static const ConjugacyChain c = chain_for(make_poly3b());
  return c;
}
const ConjugacyChain& twou4() {
  static const ConjugacyChain c = chain_for(make_twou4());
  return c;
}

std::vector<Vec> sample3() {
  return {vec({0.1, 0.1, 0.1}), vec({-0.2, 0.15, 0.05}), vec({0.05, -0.2, -0.15}), vec({0.2, 0.0, 0.2})};
}

}  // namespace

TEST_CASE("foliation chart H") {
  const ConjugacyChain& ch = poly3();
  const Layout& L = ch.layout();
  for (const Vec& x : sample3()) {
    const Vec xcs = embed(L, project(L, x, Proj::cs), Proj::cs);
    CHECK((ch.H(xcs) - xcs).norm() == 0.0);
    CHECK((ch.H_inv(ch.H(x)) - x).norm() < 1e-13);
    // F_hat keeps the leaves: its cs part only sees x_cs
    const Vec fh = ch.F_hat(x);
    CHECK((project(L, fh, Proj::cs) - ch.g(project(L, x, Proj::cs))).norm() <= 1e-8);
    // and F_hat = H^{-1} F_T H
    CHECK((fh - ch.H_inv(ch.FT().eval(ch.H(x)))).norm() < 1e-12);
  }
}

TEST_CASE("cocycle reduction Theta") {
  const ConjugacyChain lin = chain_for(make_lin3());
  for (const Vec& x : sample3()) CHECK((lin.Theta(x) - x).norm() == 0.0);

  const ConjugacyChain& ch = twou4();
  const Layout& L = ch.layout();
  for (const Vec& y : {vec({0.1, -0.1}), vec({-0.2, 0.2}), vec({0.15, 0.0})}) {
    Vec yc = y;
    yc(0) = 0;
    // D_v (pi_u F~)(y, 0) = A_u(y_c)
    const Mat D = fd_jacobian([&](const Vec& v) { return ch.fiber_step(y, v); }, Vec::Zero(2));
    CHECK((D - ch.A_u(yc)).norm() <= 1e-6);
    const Vec x = vec({y(0), y(1), 0.1, -0.05});
    CHECK((ch.Theta_inv(ch.Theta(x)) - x).norm() < 1e-14);
  }
  (void)L;
}

TEST_CASE("fiber linearization Phi") {
  const ConjugacyChain& ch = poly3();
  const Layout& L = ch.layout();
  for (const Vec& x : sample3()) {
    const Vec xcs = embed(L, project(L, x, Proj::cs), Proj::cs);
    CHECK((ch.Phi(xcs) - xcs).norm() == 0.0);
    CHECK((ch.Phi_inv(xcs) - xcs).norm() == 0.0);
    // Phi^{-1} F~ Phi = (g, A_u(y_c) y_u)
    const Vec cs = project(L, x, Proj::cs);
    Vec c = cs;
    c(0) = 0;
    Vec want = embed(L, ch.g(cs), Proj::cs);
    assign(L, want, Proj::u, ch.A_u(c) * project(L, x, Proj::u));
    CHECK((ch.Phi_inv(ch.F_tilde(ch.Phi(x))) - want).norm() <= 1e-7);
    CHECK((ch.Phi_inv(ch.Phi(x)) - x).norm() <= 1e-12);
  }
}

TEST_CASE("weak-unstable straightening") {
  CHECK_THROWS_AS(WeakUnstableStraightening(poly3(), 1), ConfigError);
  const ConjugacyChain& ch = twou4();
  CHECK_THROWS_AS(WeakUnstableStraightening(ch, 2), ConfigError);
  const WeakUnstableStraightening ws(ch, 1);
  CHECK(ws.window().first == doctest::Approx(2.1));
  CHECK(ws.window().second == doctest::Approx(3.9));
  CHECK(ws.rho() > 2.1);
  CHECK(ws.rho() < 3.9);

  // without nonlinearity the slow leaves are the slow axis
  const ConjugacyChain lin = chain_for(make_twou4(0.0));
  const WeakUnstableStraightening w0(lin, 1);
  CHECK(w0.leaf(vec({0.1, 0.1}), vec({0.2})).norm() == 0.0);

  // leaf points grow at most like rho^n, points off the leaf like 4^n
  for (const Vec& y : {vec({0.1, -0.1}), vec({-0.15, 0.2})}) {
    const Vec vs = vec({0.1});
    const Vec on = vec({0.1, ws.leaf(y, vs)(0)});
    const Vec off = vec({0.1, on(1) + 0.01});
    CHECK(ws.growth(y, on, 15) < 2);
    CHECK(ws.growth(y, off, 15) > 10);
    const Vec x = vec({y(0), y(1), 0.1, 0.05});
    CHECK((ws.inverse(ws.forward(x)) - x).norm() < 1e-15);
  }
}

TEST_CASE("stable linearization psi") {
  const ConjugacyChain& ch = poly3b();
  for (double c : {-0.2, 0.0, 0.15}) {
    const Vec xc = vec({0.0, c});
    CHECK((ch.psi(xc) - xc).norm() == 0.0);
  }
  for (const Vec& x : {vec({0.1, 0.1}), vec({-0.2, 0.15}), vec({0.2, -0.2})}) {
    // psi^{-1} g = (A_s(x_c) [psi^{-1}]_s, g_c(x_c))
    const Vec y = ch.psi_inv(x);
    const Vec lhs = ch.psi_inv(ch.g(x));
    const Vec xc = x.tail(1);
    CHECK(std::abs(lhs(0) - ch.A_s(xc)(0, 0) * y(0)) <= 1e-7);
    CHECK(std::abs(lhs(1) - ch.g_c(xc)(0)) <= 1e-15);
    CHECK((ch.psi(y) - x).norm() <= 1e-12);
  }
}

TEST_CASE("normal form") {
  const ConjugacyChain& ch = poly3();
  const NormalForm nf = ch.normal_form();
  for (double c : {-0.2, 0.1, 0.2}) {
    CHECK(nf.A_s(vec({c}))(0, 0) == doctest::Approx(0.5 + 0.05 * c).epsilon(1e-9));
    CHECK(nf.A_u(vec({c}))(0, 0) == doctest::Approx(2.0 + 0.05 * c).epsilon(1e-9));
    const Vec y = nf.eval(vec({0, c, 0}));
    CHECK(y(0) == 0.0);
    CHECK(y(2) == 0.0);
    CHECK(y(1) == c);
  }
  const Vec y = vec({0.1, 0.2, -0.1});
  const BlockVector b = evaluate_normal_form(nf, y);
  CHECK(b.s()(0) == doctest::Approx((0.5 + 0.05 * 0.2) * 0.1).epsilon(1e-9));
}

TEST_CASE("full conjugacy") {
  for (const ConjugacyChain* ch : {&poly3(), &poly3b(), &twou4()}) {
    const Layout& L = ch->layout();
    const NormalForm nf = ch->normal_form();
    for (const Vec& y : inner_grid(L, 0.2, 2)) {
      const double r = (ch->F().eval(ch->conj(y)) - ch->conj(nf.eval(y))).norm();
      CHECK_MESSAGE(r <= 1e-6, ch->F().name());
      CHECK((ch->conj_inv(ch->conj(y)) - y).norm() <= 1e-10);
    }
  }
}

TEST_CASE("derivative of the conjugacy on the center") {
  const ConjugacyChain& ch = poly3b();
  const Layout& L = ch.layout();
  CHECK((ch.Delta(vec({0.0})) - Mat::Identity(3, 3)).norm() <= 1e-8);
  const Vec x = embed(L, vec({0.2}), Proj::c);
  // one-sided steps large enough to see past the limit tolerances
  Mat fd(3, 3);
  const double h = 1e-4;
  for (int j = 0; j < 3; ++j) {
    Vec e = Vec::Zero(3);
    e(j) = h;
    fd.col(j) = (ch.conj(x + e) - ch.conj(x - e)) / (2 * h);
  }
  CHECK((fd - ch.Delta(vec({0.2}))).norm() <= 1e-5);
}
