#include <cmath>
#include <memory>

#include "doctest.h"
#include "phlin/normalization.hpp"

using namespace phlin;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

std::shared_ptr<const MapModel> shared(MapModel m) { return std::make_shared<MapModel>(std::move(m)); }

const StageRecord& stage(const Pipeline& P, const std::string& name) {
  for (const auto& s : P.manifest)
    if (s.name == name) return s;
  throw std::runtime_error("no stage " + name);
}

double round_trip(const Transform& S, double box) {
  double m = 0;
  for (double a : {-box, 0.0, box})
    for (double b : {-box, 0.5 * box})
      for (double c : {-0.5 * box, box}) {
        const Vec x = vec({a, b, c});
        m = std::max({m, (S.inverse(S.forward(x)) - x).norm(), (S.forward(S.inverse(x)) - x).norm()});
      }
  return m;
}

NormalizationFlags flags(bool c, bool bd, bool cs, bool cu, bool sf) { return {c, bd, cs, cu, sf}; }

}  // namespace

TEST_CASE("skip rule on declared identities") {
  const Pipeline lin = run_pipeline(shared(make_lin3()));
  CHECK(lin.S->is_identity());
  CHECK(lin.S->name() == "id");
  for (const auto& s : lin.manifest) CHECK_FALSE(s.ran);

  // POLY3 leaves X_cu non-invariant, so only G runs, and only its cu part
  const Pipeline p = run_pipeline(shared(make_poly3()));
  CHECK(p.S->name() == "G");
  CHECK(stage(p, "G").ran);
  CHECK(stage(p, "G").reason == "computed cu");
  CHECK_FALSE(stage(p, "center").ran);
  CHECK(stage(p, "G").residual <= 1e-10);
  CHECK(round_trip(*p.S, 0.2) < 1e-13);
  CHECK(p.S->identity_on_cs());
  CHECK(p.S->preserves_u());
}

TEST_CASE("center stage straightens a curved center manifold") {
  // s-row x_c^2: the center manifold is the graph of about 0.1 x_c^2, nothing else breaks
  const auto F = shared(make_lin3().with_terms("LIN3c", {term(0, {0, 2, 0}, "0.05")}, flags(false, true, true, true, true)));
  const Pipeline P = run_pipeline(F);
  CHECK(stage(P, "center").ran);
  CHECK(P.S->name() == "center");
  // |x_c| < 0.5 is inside the cutoff plateau: w_s = 0.05 c^2 / 0.5 exactly
  CHECK(std::abs(CenterStage(F, F->structure(), {}).graph(vec({0.2}))(0) - 0.004) < 1e-11);  // truncation 0.5^30 * 0.004
  // the graph is invariant under F
  const CenterStage cs(F, F->structure(), {});
  for (double c : {-0.2, -0.05, 0.1, 0.2}) {
    const Vec w = cs.graph(vec({c}));
    const Vec x = vec({w(0), c, w(1)});
    const Vec y = F->eval(x);
    const Vec w1 = cs.graph(vec({y(1)}));
    CHECK(std::abs(w1(0) - y(0)) < 1e-10);
    CHECK(std::abs(w1(1) - y(2)) < 1e-10);
    if (c != 0) CHECK(std::abs(w(0)) > 1e-4);
  }
  // X_c is invariant for S F S^{-1}
  for (double c : {-0.2, 0.07, 0.2}) {
    const Vec y = P.FT->eval(vec({0, c, 0}));
    CHECK(std::abs(y(0)) + std::abs(y(2)) <= 1e-9);
  }
  CHECK(center_invariance_residual(*P.FT, 0.2, 5) <= 1e-9);
  CHECK(round_trip(*P.S, 0.2) < 1e-12);
}

TEST_CASE("upsilon stage block-diagonalizes DF along the center") {
  const auto F = shared(make_poly3().with_terms("POLY3u", {term(1, {1, 1, 0}, "0.05")}, flags(true, false, true, false, false)));
  CHECK(block_diag_residual(*F, 0.2, 5) > 1e-3);
  const Pipeline P = run_pipeline(F);
  CHECK(stage(P, "upsilon").ran);
  for (double c : {-0.2, 0.1, 0.2}) {
    const Mat J = fd_jacobian([&](const Vec& y) { return P.FT->eval(y); }, vec({0, c, 0}));
    CHECK(std::abs(J(1, 0)) <= 1e-7);
    CHECK(std::abs(J(1, 2)) <= 1e-7);
  }
  CHECK(block_diag_residual(*P.FT, 0.2, 5) <= 1e-7);
  CHECK(round_trip(*P.S, 0.2) < 1e-12);
}

TEST_CASE("phi stage flattens the stable foliation on X_cs") {
  const auto F = shared(make_poly3b().with_terms("POLY3p", {term(1, {2, 0, 0}, "0.05")}, flags(true, true, true, false, false)));
  const LPConfig sc = admissible_stable(F->structure(), {});
  CHECK(stable_flatness_residual(*F, F->structure(), 0.2, 3, sc) > 1e-4);
  const Pipeline P = run_pipeline(F);
  CHECK(stage(P, "phi").ran);
  CHECK(stable_flatness_residual(*P.FT, F->structure(), 0.2, 3, sc) <= 1e-7);
  CHECK(round_trip(*P.S, 0.2) < 1e-12);
}

TEST_CASE("jet of the stack") {
  const Pipeline P = run_pipeline(shared(make_poly3b()));
  const Mat I = Mat::Identity(3, 3);
  CHECK((P.S->jet(Vec::Zero(3)) - I).norm() <= 1e-8);
  const Vec x = vec({0, 0.2, 0});
  const Mat fd = fd_jacobian([&](const Vec& y) { return P.S->inverse(y); }, x);
  CHECK((P.S->jet(x) - fd).norm() <= 1e-5);
}

TEST_CASE("tangent frames on the center") {
  const MapModel F = make_poly3b();
  const Layout& L = F.layout();
  for (double c : {-0.2, 0.1, 0.2}) {
    const TangentFrames t = tangent_frames_on_center(F, F.structure(), vec({c}));
    CHECK(t.Es(0, 0) == 1.0);
    CHECK(t.Eu(2, 0) == 1.0);
    CHECK((t.P * t.M - Mat::Identity(3, 3)).norm() < 1e-14);
    // DF(x_c) E(x_c) lies in E(g(x_c))
    const Vec x = vec({0, c, 0});
    const Vec gx = F.eval(x);
    const TangentFrames t1 = tangent_frames_on_center(F, F.structure(), project(L, gx, Proj::c));
    const Mat J = F.jacobian(x);
    const Vec vs = J * t.Es.col(0), vu = J * t.Eu.col(0);
    CHECK((vs - vs(0) * t1.Es.col(0)).norm() <= 1e-8);
    CHECK((vu - vu(2) * t1.Eu.col(0)).norm() <= 1e-8);
  }
}
