#include <cmath>
#include <memory>

#include "doctest.h"
#include "json.hpp"
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

TEST_CASE("grids and directions") {
  const Layout L{{1}, 1, {1}};
  const auto g = inner_grid(L, 0.2, 4);
  CHECK(g.size() == 64);
  double lo = 1, hi = -1;
  for (const Vec& x : g) {
    lo = std::min(lo, x.minCoeff());
    hi = std::max(hi, x.maxCoeff());
  }
  CHECK(lo == doctest::Approx(-0.2));
  CHECK(hi == doctest::Approx(0.2));
  CHECK(default_grid_n(3) == 10);
  CHECK(default_grid_n(4) == 6);
  const auto d1 = random_directions(3, 20, 5), d2 = random_directions(3, 20, 5);
  for (size_t i = 0; i < d1.size(); ++i) {
    CHECK(d1[i].norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((d1[i] - d2[i]).norm() == 0.0);
  }
}

TEST_CASE("exponent fits") {
  const Vec xt = vec({0.0, 0.1, 0.0});
  const auto scales = dyadic_scales(3, 10);
  const auto dirs = random_directions(3, 20, 1);
  const Mat I = Mat::Identity(3, 3);
  // a linear map has no remainder at all
  const DiffFit lin = differentiability_fit([](const Vec& x) { return x; }, xt, I, scales, dirs);
  CHECK_FALSE(lin.pooled.available);
  // T(x) = x + |x - x~|^2 v has remainder t^2
  const Vec v = vec({0.3, -0.4, 0.5});
  auto T = [&](const Vec& x) { return Vec(x + (x - xt).squaredNorm() * v); };
  const DiffFit q = differentiability_fit(T, xt, I, scales, dirs);
  REQUIRE(q.pooled.available);
  CHECK(std::abs(q.pooled.slope - 2.0) <= 0.01);
  CHECK(std::abs(q.min_direction_slope() - 2.0) <= 0.01);
  CHECK(q.table.header == std::vector<std::string>{"center_point", "scale", "direction_id", "remainder"});
  CHECK(q.table.rows.size() == scales.size() * dirs.size());
  // a wrong derivative leaves slope 1
  const DiffFit w = differentiability_fit(T, xt, 2 * I, scales, dirs);
  CHECK(std::abs(w.pooled.slope - 1.0) <= 0.01);
}

TEST_CASE("foliation and orbit checks on the linear map") {
  const MapModel F = make_lin3();
  const FoliationChart chart(F, F.structure());
  const std::vector<Vec> xs{vec({0.1, 0.1, 0.1}), vec({-0.2, 0.0, 0.05})};
  const std::vector<Vec> zus{vec({0.15}), vec({-0.1})};
  CHECK(foliation_invariance_check(F, chart, xs, zus).max == 0.0);
  // z = x: the leaf point is x itself
  CHECK(foliation_invariance_check(F, chart, xs, {vec({0.1}), vec({0.05})}).max == 0.0);
  CHECK(lp_orbit_consistency_check(F, chart.solve(xs[0], zus[0]), xs[0]) < 1e-16);
  CHECK(chart_identity_check(F, F.structure(), xs).max == 0.0);
  const SampleCheck o = oracle_agreement(F, F.structure(), xs, zus);
  CHECK(o.agree == 2);

  const MapModel P = make_poly3();
  const FoliationChart pc(P, P.structure());
  CHECK(foliation_invariance_check(P, pc, xs, zus).max <= 1e-7);
  // a made-up "solution" fails the orbit check
  WeightedSequence fake = pc.solve(xs[0], zus[0]);
  fake.at(-3)(0) += 1e-3;
  CHECK(lp_orbit_consistency_check(P, fake, xs[0]) >= 1e-3 * 0.999);
}

TEST_CASE("analytic jacobians agree with differences") {
  for (const auto& F : {make_lin3(), make_poly3(), make_poly3b(), make_twou4()}) CHECK(jacobian_fd_check(F) < 1e-8);
  CHECK(jacobian_fd_check(make_cex1()) < 1e-6);
}

TEST_CASE("counterexample demo") {
  const CounterexampleDemo d = counterexample_demo(0.5, 4, 60, 120);
  CHECK(d.scales.size() == 57);
  CHECK(d.smooth_min_slope > 1.9);
  CHECK(d.cex_min_slope < 1.05);
  CHECK(d.cex_local_slope.front() > d.cex_local_slope.back());
  CHECK(std::abs(d.df0_fd - 0.5) <= 2 * 0.5 / (1000 * std::log(2.0)));
  CHECK(d.holder_quotient.back() > 1e3 * d.holder_quotient.front());
  const CheckRecord r = check_sharpness(d);
  CHECK_FALSE(r.gating);
  CHECK(r.pass);
}

TEST_CASE("holder calculator record") {
  const CheckRecord r = check_holder_calculator();
  CHECK(r.pass);
  CHECK(r.measured <= 1e-12);
  CHECK(r.table.rows.size() == 4);
}

TEST_CASE("tables and report") {
  Table t{{"a", "b"}, {{"1", "x y"}, {"2", "z"}}};
  CHECK(t.csv() == "a,b\n1,x y\n2,z\n");
  VerificationReport rep;
  rep.environment = {{"map", "LIN3"}};
  CheckRecord ok;
  ok.name = "ok";
  ok.pass = true;
  ok.measured = 0.1;
  CheckRecord soft;
  soft.name = "soft";
  soft.gating = false;
  rep.records = {ok, soft};
  CHECK(rep.all_pass());
  const auto j = nlohmann::json::parse(rep.json());
  CHECK(j["all_pass"] == true);
  CHECK(j["records"].size() == 2);
  CHECK(j["records"][0]["measured"].get<double>() == 0.1);
  CHECK(j["environment"]["map"] == "LIN3");
  rep.records[0].pass = false;
  CHECK_FALSE(rep.all_pass());
}

TEST_CASE("checks are deterministic across runs and thread counts") {
  const MapModel F = make_poly3();
  SuiteConfig a;
  a.grid = 3;
  a.threads = 1;
  SuiteConfig b = a;
  b.threads = 3;
  CHECK(check_foliation(F, a).table.csv() == check_foliation(F, b).table.csv());
  const ConjugacyChain ch(run_pipeline(std::make_shared<MapModel>(F)));
  const ConjugacyChain ch2(run_pipeline(std::make_shared<MapModel>(F)));
  CHECK(check_conjugacy(ch, a).table.csv() == check_conjugacy(ch2, b).table.csv());
  CHECK(check_lp_orbit(F, a).table.csv() == check_lp_orbit(F, b).table.csv());
}

TEST_CASE("suite records on the linear map") {
  const MapModel F = make_lin3();
  SuiteConfig sc;
  sc.grid = 3;
  const ConjugacyChain ch(run_pipeline(std::make_shared<MapModel>(F)));
  for (const CheckRecord& r : {check_lp_orbit(F, sc), check_chart_identity(F, sc), check_foliation(F, sc),
                               check_cohomology(ch, sc), check_reduction(ch, sc), check_fiber_linearization(ch, sc),
                               check_conjugacy(ch, sc), check_center_fixed(ch, sc), check_differentiability(ch, sc)}) {
    CHECK_MESSAGE(r.pass, r.name);
    // the oracle record measures the agreement fraction
    const double want = r.name.rfind("foliation", 0) == 0 ? 1.0 : 0.0;
    const bool exact = r.measured == want || std::isnan(r.measured);
    CHECK_MESSAGE(exact, r.name);
    CHECK(r.table.rows.size() > 0);
  }
}
