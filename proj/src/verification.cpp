#include "phlin/verification.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace phlin {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::string num(double v) { return fmt17(v); }

nlohmann::json jnum(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string Table::csv() const {
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
  return os.str();
}

bool VerificationReport::all_pass() const {
  for (const auto& r : records)
    if (r.gating && !r.pass) return false;
  return true;
}

std::string VerificationReport::json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json env = nlohmann::ordered_json::object();
  for (const auto& [k, v] : environment) env[k] = v;
  j["environment"] = env;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json e;
    e["name"] = r.name;
    e["criterion"] = r.criterion;
    e["grid"] = r.grid;
    e["measured"] = jnum(r.measured);
    e["measured_text"] = num(r.measured);
    e["threshold"] = jnum(r.threshold);
    e["pass"] = r.pass;
    e["gating"] = r.gating;
    e["runtime_s"] = r.runtime;
    e["note"] = r.note;
    j["records"].push_back(e);
  }
  j["all_pass"] = all_pass();
  return j.dump(2) + "\n";
}

std::vector<Vec> inner_grid(const Layout& L, double box, int n) { return subspace_lattice(L, Proj::all, box, n); }

std::vector<Vec> random_directions(int dim, int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Vec> out;
  while (static_cast<int>(out.size()) < count) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = nd(rng);
    const double n = v.norm();
    if (n < 1e-8) continue;
    out.push_back(v / n);
  }
  return out;
}

ResidualStats conjugacy_residual_grid(const DynMap& F, const VecFn& H, const VecFn& Hinv, const VecFn& nf,
                                      const std::vector<Vec>& grid, int threads) {
  ResidualStats s;
  s.values.resize(grid.size());
  parallel_for(
      grid.size(),
      [&](size_t i) {
        const Vec& y = grid[i];
        s.values[i] = (Hinv(F.eval(H(y))) - nf(y)).norm();
      },
      threads);
  for (double r : s.values) {
    s.max = std::isfinite(r) ? std::max(s.max, r) : std::numeric_limits<double>::infinity();
    s.mean += r;
  }
  s.count = static_cast<int>(grid.size());
  if (s.count > 0) s.mean /= s.count;
  return s;
}

double DiffFit::min_direction_slope() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& f : per_direction)
    if (f.available) m = std::min(m, f.slope);
  return m;
}

DiffFit differentiability_fit(const VecFn& T, const Vec& x_tilde, const Mat& Delta, const std::vector<double>& scales,
                              const std::vector<Vec>& directions, double floor, int center_id) {
  DiffFit out;
  out.table.header = {"center_point", "scale", "direction_id", "remainder"};
  std::vector<double> all_t, all_r;
  for (size_t d = 0; d < directions.size(); ++d) {
    std::vector<double> ts, rs;
    for (double t : scales) {
      const Vec h = t * directions[d];
      const double r = (T(x_tilde + h) - x_tilde - Delta * h).norm();
      ts.push_back(t);
      rs.push_back(r);
      out.table.rows.push_back({std::to_string(center_id), num(t), std::to_string(d), num(r)});
    }
    out.per_direction.push_back(fit_loglog(ts, rs, floor));
    all_t.insert(all_t.end(), ts.begin(), ts.end());
    all_r.insert(all_r.end(), rs.begin(), rs.end());
  }
  out.pooled = fit_loglog(all_t, all_r, floor);
  return out;
}

SampleCheck foliation_invariance_check(const DynMap& F, const FoliationChart& chart, const std::vector<Vec>& xs,
                                       const std::vector<Vec>& zus) {
  const Layout& L = F.layout();
  SampleCheck out;
  out.table.header = {"sample", "residual"};
  for (size_t i = 0; i < xs.size(); ++i) {
    const Vec z = chart.leaf_point(xs[i], zus[i]);
    const Vec Fx = F.eval(xs[i]);
    const Vec Fz = F.eval(z);
    const double r = (project(L, Fz, Proj::cs) - chart.h_u(Fx, project(L, Fz, Proj::u))).norm();
    out.max = std::max(out.max, r);
    ++out.count;
    out.table.rows.push_back({std::to_string(i), num(r)});
  }
  return out;
}

SampleCheck stable_invariance_check(const DynMap& F, const SpectralStructure& st, const std::vector<Vec>& xcs,
                                    const std::vector<Vec>& zss, const LPConfig& cfg) {
  const Layout& L = F.layout();
  const LPConfig c = admissible_stable(st, cfg);
  const int ns = L.ns();
  SampleCheck out;
  out.table.header = {"sample", "residual"};
  auto g = [&](const Vec& y) { return project(L, F.eval(embed(L, y, Proj::cs)), Proj::cs); };
  for (size_t i = 0; i < xcs.size(); ++i) {
    Vec z(ns + L.nc());
    z.head(ns) = zss[i];
    z.tail(L.nc()) = solve_stable_lp_on_Xcs(F, xcs[i], zss[i], c).h_s;
    const Vec gx = g(xcs[i]);
    const Vec gz = g(z);
    const Vec hs = solve_stable_lp_on_Xcs(F, gx, gz.head(ns), c).h_s;
    const double r = (gz.tail(L.nc()) - hs).norm();
    out.max = std::max(out.max, r);
    ++out.count;
    out.table.rows.push_back({std::to_string(i), num(r)});
  }
  return out;
}

double lp_orbit_consistency_check(const DynMap& F, const WeightedSequence& q, const Vec& x, int n_min) {
  Vec a = x;
  Vec b = x + q.at(0);
  double dev = 0;
  const int stop = std::max(q.lo, n_min);
  for (int n = 0; n >= stop; --n) {
    dev = std::max(dev, (q.at(n) - (b - a)).norm());
    if (n == stop) break;
    a = F.inverse(a);
    b = F.inverse(b);
    if (!a.allFinite() || !b.allFinite()) throw NumericError("inverse failed in the orbit check");
  }
  return dev;
}

SampleCheck chart_identity_check(const DynMap& F, const SpectralStructure& st, const std::vector<Vec>& xs,
                                 const LPConfig& cfg) {
  const Layout& L = F.layout();
  SampleCheck out;
  out.table.header = {"sample", "unstable_residual", "stable_residual"};
  std::unique_ptr<FoliationChart> chart;
  if (L.nu() > 0) chart = std::make_unique<FoliationChart>(F, st, cfg);
  const LPConfig sc = L.ns() > 0 ? admissible_stable(st, cfg) : cfg;
  for (size_t i = 0; i < xs.size(); ++i) {
    const Vec& x = xs[i];
    double ru = 0, rs = 0;
    if (chart) ru = (chart->h_u(x, project(L, x, Proj::u)) - project(L, x, Proj::cs)).norm();
    if (L.ns() > 0) {
      const Vec xcs = project(L, x, Proj::cs);
      rs = (solve_stable_lp_on_Xcs(F, xcs, xcs.head(L.ns()), sc).h_s - xcs.tail(L.nc())).norm();
    }
    out.max = std::max({out.max, ru, rs});
    ++out.count;
    out.table.rows.push_back({std::to_string(i), num(ru), num(rs)});
  }
  return out;
}

SampleCheck oracle_agreement(const DynMap& F, const SpectralStructure& st, const std::vector<Vec>& xs,
                             const std::vector<Vec>& zus, int horizon, double bound_factor, const LPConfig& cfg) {
  FoliationChart chart(F, st, cfg);
  const double rho = log_midpoint(oracle_rho_interval(st));
  SampleCheck out;
  out.table.header = {"sample", "deviation", "bound", "member"};
  for (size_t i = 0; i < xs.size(); ++i) {
    const Vec z = chart.leaf_point(xs[i], zus[i]);
    const OracleVerdict v = leaf_membership_oracle(F, xs[i], z, rho, horizon, bound_factor);
    // a zero offset has a zero bound and a zero deviation
    const bool member = v.member || (v.deviation == 0 && v.bound == 0);
    out.max = std::max(out.max, v.bound > 0 ? v.deviation / v.bound : 0.0);
    ++out.count;
    if (member) ++out.agree;
    out.table.rows.push_back({std::to_string(i), num(v.deviation), num(v.bound), member ? "1" : "0"});
  }
  return out;
}

double jacobian_fd_check(const MapModel& model, int samples, unsigned seed) {
  const int d = model.layout().dim();
  const double box = model.radius() > 0 ? std::min(0.3, 0.9 * model.radius()) : 0.3;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-box, box);
  double worst = 0;
  const VecFn f = [&](const Vec& x) { return model.eval(x); };
  for (int k = 0; k < samples; ++k) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = u(rng);
    const Mat J = model.jacobian(x);
    const Mat Jfd = fd_jacobian(f, x);
    worst = std::max(worst, (J - Jfd).norm() / std::max(1.0, J.norm()));
  }
  return worst;
}

namespace {

// mu^{-n} F^n(t), the truncated stable-side limit in one dimension
double truncated_limit(const MapModel& F, double mu, double t, int steps) {
  Vec x(1);
  x(0) = t;
  double scale = 1;
  for (int n = 0; n < steps; ++n) {
    x = F.eval(x);
    scale /= mu;
  }
  return x(0) * scale;
}

std::vector<double> window_slopes(const std::vector<double>& t, const std::vector<double>& r,
                                  const std::vector<double>& floors, int width) {
  std::vector<double> out;
  for (size_t i = 0; i + static_cast<size_t>(width) <= t.size(); ++i) {
    std::vector<double> tw, rw;
    for (size_t k = i; k < i + static_cast<size_t>(width); ++k) {
      if (r[k] <= floors[k]) continue;
      tw.push_back(t[k]);
      rw.push_back(r[k]);
    }
    const SlopeFit f = fit_loglog(tw, rw, 0.0);
    out.push_back(f.available && f.used >= width / 2 ? f.slope : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

double min_finite(const std::vector<double>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (double x : v)
    if (std::isfinite(x)) m = std::min(m, x);
  return m;
}

}  // namespace

CounterexampleDemo counterexample_demo(double mu, int jmin, int jmax, int steps, double alpha) {
  CounterexampleDemo out;
  out.mu = mu;
  out.alpha = alpha;
  const MapModel cex = make_cex1(mu);
  const MapModel smooth = make_smooth_contrast();
  const double mu_s = smooth.linear_part()(0, 0);

  // F is odd, so the central quotient is F(h)/h; it approaches mu like 1/|log h|
  const double h = std::ldexp(1.0, -1000);
  Vec p(1), m(1);
  p(0) = h;
  m(0) = -h;
  out.df0_fd = (cex.eval(p)(0) - cex.eval(m)(0)) / (2 * h);

  out.scales = dyadic_scales(jmin, jmax);
  std::vector<double> floors;
  for (double t : out.scales) {
    out.cex_remainder.push_back(std::abs(truncated_limit(cex, mu, t, steps) - t));
    out.smooth_remainder.push_back(std::abs(truncated_limit(smooth, mu_s, t, steps) - t));
    floors.push_back(64 * kEps * t);
  }
  const int width = 8;
  out.cex_local_slope = window_slopes(out.scales, out.cex_remainder, floors, width);
  out.smooth_local_slope = window_slopes(out.scales, out.smooth_remainder, floors, width);
  out.cex_min_slope = min_finite(out.cex_local_slope);
  out.smooth_min_slope = min_finite(out.smooth_local_slope);
  {
    std::vector<double> tc, rc, ts, rs;
    for (size_t i = 0; i < out.scales.size(); ++i) {
      if (out.cex_remainder[i] > floors[i]) {
        tc.push_back(out.scales[i]);
        rc.push_back(out.cex_remainder[i]);
      }
      if (out.smooth_remainder[i] > floors[i]) {
        ts.push_back(out.scales[i]);
        rs.push_back(out.smooth_remainder[i]);
      }
    }
    out.cex_fit = fit_loglog(tc, rc, 0.0);
    out.smooth_fit = fit_loglog(ts, rs, 0.0);
  }

  auto dF = [&](double x) {
    Vec v(1);
    v(0) = x;
    return cex.jacobian(v)(0, 0);
  };
  for (int j = 8; j <= 1000; j += 8) {
    const double x = std::ldexp(1.0, -j), y = std::ldexp(1.0, -j - 1);
    out.holder_j.push_back(j);
    out.holder_quotient.push_back(std::abs(dF(x) - dF(y)) / std::pow(x - y, alpha));
  }

  out.table.header = {"scale", "cex_remainder", "smooth_remainder", "cex_local_slope", "smooth_local_slope"};
  for (size_t i = 0; i < out.scales.size(); ++i) {
    const bool has = i < out.cex_local_slope.size();
    out.table.rows.push_back({num(out.scales[i]), num(out.cex_remainder[i]), num(out.smooth_remainder[i]),
                              has ? num(out.cex_local_slope[i]) : "", has ? num(out.smooth_local_slope[i]) : ""});
  }
  return out;
}

int default_grid_n(int dim) {
  int n = 1;
  while (std::pow(n, dim) < 1000) ++n;
  return n;
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn, int threads) {
  size_t t = threads > 0 ? static_cast<size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  t = std::min(t, n);
  if (t <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  for (size_t k = 0; k < t; ++k)
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string point_cell(const Vec& x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? " " : "") + num(x(i));
  return s;
}

Table check_table() { return Table{{"point", "measured", "threshold", "pass"}, {}}; }

void add_row(Table& t, const std::string& point, double measured, double threshold, bool pass) {
  t.rows.push_back({point, num(measured), num(threshold), pass ? "1" : "0"});
}

std::string grid_text(int n, int dim, double box) {
  return std::to_string(n) + "^" + std::to_string(dim) + " lattice in [-" + num(box) + "," + num(box) + "]";
}

std::vector<Vec> uniform_samples(int dim, int count, double box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-box, box);
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x(i) = u(rng);
    out.push_back(x);
  }
  return out;
}

std::vector<Vec> center_points(const Layout& L, int count, double box, unsigned seed) {
  const int nc = L.nc();
  std::vector<Vec> out;
  if (nc == 1) {
    for (int k = 0; k < count; ++k) {
      Vec c(1);
      c(0) = count == 1 ? 0.0 : -box + 2 * box * k / (count - 1);
      out.push_back(c);
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  out = uniform_samples(nc, count, box, rng);
  if (!out.empty()) out[0].setZero();
  return out;
}

int grid_n(const SuiteConfig& sc, int dim) { return sc.grid > 0 ? sc.grid : default_grid_n(dim); }

CheckRecord finish(CheckRecord r, double measured, double threshold, bool pass, Clock::time_point t0) {
  r.measured = measured;
  r.threshold = threshold;
  r.pass = pass;
  r.runtime = seconds_since(t0);
  return r;
}

}  // namespace

namespace {

// exp of the log-slope of the differences above the floor, at least two of them
double transient_ratio(const std::vector<double>& d, double floor) {
  std::vector<double> k, r;
  for (size_t i = 0; i < d.size(); ++i)
    if (d[i] > floor) {
      k.push_back(std::exp(static_cast<double>(i)));
      r.push_back(d[i]);
    }
  const SlopeFit f = fit_loglog(k, r, 0.0);
  return f.available ? std::exp(f.slope) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

CheckRecord check_jacobian(const MapModel& F, const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  CheckRecord r;
  r.name = "jacobian_fd_" + F.name();
  r.grid = "100 seeded samples";
  const double e = jacobian_fd_check(F, 100, sc.seed + 16);
  r.table = check_table();
  add_row(r.table, "all", e, 1e-6, e <= 1e-6);
  return finish(r, e, 1e-6, e <= 1e-6, t0);
}

CheckRecord check_lp_orbit(const MapModel& F, const SuiteConfig& sc, LPConfig cfg) {
  const auto t0 = Clock::now();
  const Layout& L = F.layout();
  CheckRecord r;
  r.name = "lp_orbit_" + F.name();
  r.criterion = "2";
  r.grid = "25 seeded (x, z_u) samples, n in [-10, 0]";
  r.table = check_table();
  if (cfg.N == 30) cfg.N = 25;
  FoliationChart chart(F, F.structure(), cfg);
  std::mt19937_64 rng(sc.seed);
  const auto xs = uniform_samples(L.dim(), 25, sc.box, rng);
  const auto offs = uniform_samples(L.nu(), 25, 0.1, rng);
  std::vector<double> dev(xs.size());
  parallel_for(
      xs.size(),
      [&](size_t i) {
        const Vec zu = project(L, xs[i], Proj::u) + offs[i];
        dev[i] = lp_orbit_consistency_check(F, chart.solve(xs[i], zu), xs[i], -10);
      },
      sc.threads);
  double m = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    m = std::max(m, dev[i]);
    add_row(r.table, point_cell(xs[i]), dev[i], 1e-8, dev[i] <= 1e-8);
  }
  return finish(r, m, 1e-8, m <= 1e-8, t0);
}

CheckRecord check_chart_identity(const MapModel& F, const SuiteConfig& sc, const LPConfig& cfg) {
  const auto t0 = Clock::now();
  const Layout& L = F.layout();
  CheckRecord r;
  r.name = "chart_identity_" + F.name();
  r.criterion = "3";
  const int n = sc.grid > 0 ? sc.grid : 5;
  r.grid = grid_text(n, L.dim(), sc.box);
  const auto xs = inner_grid(L, sc.box, n);
  std::vector<SampleCheck> parts(xs.size());
  parallel_for(
      xs.size(), [&](size_t i) { parts[i] = chart_identity_check(F, F.structure(), {xs[i]}, cfg); }, sc.threads);
  r.table = check_table();
  double m = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    m = std::max(m, parts[i].max);
    add_row(r.table, point_cell(xs[i]), parts[i].max, 1e-10, parts[i].max <= 1e-10);
  }
  return finish(r, m, 1e-10, m <= 1e-10, t0);
}

CheckRecord check_foliation(const MapModel& F, const SuiteConfig& sc, const LPConfig& cfg) {
  const auto t0 = Clock::now();
  const Layout& L = F.layout();
  CheckRecord r;
  r.name = "foliation_oracle_" + F.name();
  r.criterion = "4";
  const int n = sc.grid > 0 ? sc.grid : 5;
  r.grid = grid_text(n, L.dim(), sc.box) + ", seeded leaf offsets, horizon " + std::to_string(sc.horizon);
  const auto xs = inner_grid(L, sc.box, n);
  std::mt19937_64 rng(sc.seed + 1);
  const auto offs = uniform_samples(L.nu(), static_cast<int>(xs.size()), 0.1, rng);
  const auto soffs = uniform_samples(L.ns(), static_cast<int>(xs.size()), 0.1, rng);
  FoliationChart chart(F, F.structure(), cfg);
  std::vector<SampleCheck> orc(xs.size()), inv(xs.size()), sinv(xs.size());
  parallel_for(
      xs.size(),
      [&](size_t i) {
        const Vec zu = project(L, xs[i], Proj::u) + offs[i];
        orc[i] = oracle_agreement(F, F.structure(), {xs[i]}, {zu}, sc.horizon, 10, cfg);
        inv[i] = foliation_invariance_check(F, chart, {xs[i]}, {zu});
        if (L.ns() > 0 && L.nc() > 0) {
          const Vec xcs = project(L, xs[i], Proj::cs);
          sinv[i] = stable_invariance_check(F, F.structure(), {xcs}, {Vec(xcs.head(L.ns()) + soffs[i])}, cfg);
        }
      },
      sc.threads);
  int agree = 0;
  double imax = 0, smax = 0;
  r.table = check_table();
  for (size_t i = 0; i < xs.size(); ++i) {
    agree += orc[i].agree;
    imax = std::max(imax, inv[i].max);
    smax = std::max(smax, sinv[i].max);
    add_row(r.table, point_cell(xs[i]), orc[i].max, 1.0, orc[i].agree == 1);
  }
  const double frac = static_cast<double>(agree) / static_cast<double>(xs.size());
  r.note = std::to_string(agree) + "/" + std::to_string(xs.size()) + " oracle agreement; unstable invariance " +
           num(imax) + ", stable invariance " + num(smax) + " (bound 1e-7)";
  return finish(r, frac, 1.0, agree == static_cast<int>(xs.size()) && imax <= 1e-7 && smax <= 1e-7, t0);
}

CheckRecord check_cohomology(const ConjugacyChain& chain, const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  const Layout& L = chain.layout();
  CheckRecord r;
  r.name = "cohomology_" + chain.F().name();
  r.criterion = "5";
  r.grid = "20 seeded base points in X_cs";
  r.table = check_table();
  std::mt19937_64 rng(sc.seed + 2);
  const auto bs = uniform_samples(L.ns() + L.nc(), 20, sc.box, rng);
  std::vector<double> res(bs.size());
  std::vector<TransferMap> tm(bs.size());
  parallel_for(
      bs.size(),
      [&](size_t i) {
        res[i] = cohomology_residual(chain.transfer(), bs[i]);
        tm[i] = chain.transfer().at(bs[i]);
      },
      sc.threads);
  double m = 0;
  int ratios = 0, vanished = 0, ratio_bad = 0;
  double worst_gap = 0, worst_ratio = 0;
  for (size_t i = 0; i < bs.size(); ++i) {
    m = std::max(m, res[i]);
    add_row(r.table, point_cell(bs[i]), res[i], 1e-6, res[i] <= 1e-6);
    for (const auto& b : tm[i].blocks) {
      if (!std::isfinite(b.cauchy_ratio)) {
        ++vanished;
        continue;
      }
      ++ratios;
      worst_ratio = std::max(worst_ratio, b.cauchy_ratio);
      worst_gap = std::max(worst_gap, std::abs(b.cauchy_ratio - b.theta));
      if (!(b.cauchy_ratio < 1) || std::abs(b.cauchy_ratio - b.theta) > 0.05) ++ratio_bad;
    }
  }
  std::string theta;
  for (double t : chain.transfer().calibration().theta) theta += (theta.empty() ? "" : " ") + num(t);
  r.note = "series ratio: " + std::to_string(ratios) + " measured, " + std::to_string(vanished) +
           " n/a (terms vanish); max ratio " + num(worst_ratio) + ", max |ratio - theta| " + num(worst_gap) +
           "; theta " + theta;
  return finish(r, m, 1e-6, m <= 1e-6 && ratio_bad == 0, t0);
}

CheckRecord check_reduction(const ConjugacyChain& chain, const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  const Layout& L = chain.layout();
  CheckRecord r;
  r.name = "reduction_" + chain.F().name();
  r.criterion = "6";
  const int n = grid_n(sc, L.ns() + L.nc());
  r.grid = grid_text(n, L.ns() + L.nc(), sc.box) + " in X_cs";
  r.table = check_table();
  std::vector<Vec> bs;
  for (const Vec& x : subspace_lattice(L, Proj::cs, sc.box, n)) bs.push_back(project(L, x, Proj::cs));
  std::vector<double> res(bs.size());
  parallel_for(
      bs.size(),
      [&](size_t i) {
        const Vec& y = bs[i];
        const Mat D = fd_jacobian([&](const Vec& v) { return chain.fiber_step(y, v); }, Vec::Zero(L.nu()));
        Vec yc = y;
        yc.head(L.ns()).setZero();
        res[i] = (D - chain.A_u(yc)).norm();
      },
      sc.threads);
  double m = 0;
  for (size_t i = 0; i < bs.size(); ++i) {
    m = std::max(m, res[i]);
    add_row(r.table, point_cell(bs[i]), res[i], 1e-6, res[i] <= 1e-6);
  }
  return finish(r, m, 1e-6, m <= 1e-6, t0);
}

CheckRecord check_fiber_linearization(const ConjugacyChain& chain, const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  const Layout& L = chain.layout();
  CheckRecord r;
  r.name = "fiber_linearization_" + chain.F().name();
  r.criterion = "7";
  const int n = grid_n(sc, L.dim());
  r.grid = grid_text(n, L.dim(), sc.box);
  r.table = check_table();
  const auto ys = inner_grid(L, sc.box, n);
  std::vector<double> res(ys.size()), ratio(ys.size()), transient(ys.size());
  parallel_for(
      ys.size(),
      [&](size_t i) {
        const Vec& y = ys[i];
        const Vec cs = project(L, y, Proj::cs);
        Vec c = cs;
        c.head(L.ns()).setZero();
        const Vec x = chain.Phi(y);
        const LimitValue back = chain.to_linear(chain.F_tilde(x));
        Vec want = embed(L, chain.g(cs), Proj::cs);
        assign(L, want, Proj::u, chain.A_u(c) * project(L, y, Proj::u));
        res[i] = (back.value - want).norm();
        const LimitValue lv = chain.to_linear(x);
        ratio[i] = lv.cauchy_ratio;
        transient[i] = transient_ratio(lv.diffs, 1e3 * kEps * std::max(lv.value.norm(), 1e-300));
      },
      sc.threads);
  double m = 0, worst_ratio = 0, worst_transient = 0;
  int measured = 0, vanished = 0, bad = 0, transients = 0;
  for (size_t i = 0; i < ys.size(); ++i) {
    m = std::max(m, res[i]);
    add_row(r.table, point_cell(ys[i]), res[i], 1e-7, res[i] <= 1e-7);
    if (std::isfinite(transient[i])) {
      ++transients;
      worst_transient = std::max(worst_transient, transient[i]);
    }
    if (!std::isfinite(ratio[i])) {
      ++vanished;
      continue;
    }
    ++measured;
    worst_ratio = std::max(worst_ratio, ratio[i]);
    if (!(ratio[i] < 1)) ++bad;
  }
  r.note = "backward-limit Cauchy ratio: " + std::to_string(measured) + " measured (max " + num(worst_ratio) +
           "), " + std::to_string(vanished) + " n/a (differences vanish after finitely many steps); " +
           "log-slope ratio of the nonzero differences before they vanish: max " + num(worst_transient) + " over " +
           std::to_string(transients) + " points";
  return finish(r, m, 1e-7, m <= 1e-7 && bad == 0, t0);
}

CheckRecord check_conjugacy(const ConjugacyChain& chain, const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  const Layout& L = chain.layout();
  CheckRecord r;
  r.name = "conjugacy_" + chain.F().name();
  r.criterion = "8";
  const int n = grid_n(sc, L.dim());
  r.grid = grid_text(n, L.dim(), sc.box);
  r.table = check_table();
  const auto ys = inner_grid(L, sc.box, n);
  const NormalForm nf = chain.normal_form();
  const ResidualStats st = conjugacy_residual_grid(
      chain.F(), [&](const Vec& y) { return chain.conj(y); }, [&](const Vec& x) { return chain.conj_inv(x); },
      [&](const Vec& y) { return nf.eval(y); }, ys, sc.threads);
  for (size_t i = 0; i < ys.size(); ++i) add_row(r.table, point_cell(ys[i]), st.values[i], 1e-6, st.values[i] <= 1e-6);
  r.note = "mean residual " + num(st.mean);
  return finish(r, st.max, 1e-6, st.max <= 1e-6, t0);
}

CheckRecord check_center_fixed(const ConjugacyChain& chain, const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  const Layout& L = chain.layout();
  CheckRecord r;
  r.name = "center_fixed_" + chain.F().name();
  r.criterion = "8";
  r.grid = "10 center points";
  r.table = check_table();
  double m = 0;
  for (const Vec& c : center_points(L, 10, sc.box, sc.seed + 3)) {
    const Vec x = embed(L, c, Proj::c);
    const double e = std::max((chain.conj(x) - x).norm(), (chain.conj_inv(x) - x).norm());
    m = std::max(m, e);
    add_row(r.table, point_cell(x), e, 1e-10, e <= 1e-10);
  }
  return finish(r, m, 1e-10, m <= 1e-10, t0);
}

CheckRecord check_differentiability(const ConjugacyChain& chain, const SuiteConfig& sc) {
  const auto t0 = Clock::now();
  const Layout& L = chain.layout();
  CheckRecord r;
  r.name = "differentiability_" + chain.F().name();
  r.criterion = "9";
  r.grid = "5 center points, 20 seeded directions, scales 2^-3..2^-10";
  r.table = Table{{"center_point", "scale", "direction_id", "remainder"}, {}};
  const auto cps = center_points(L, 5, sc.box, sc.seed + 4);
  const auto dirs = random_directions(L.dim(), 20, sc.seed + 5);
  const auto scales = dyadic_scales(3, 10);
  std::vector<DiffFit> fits(cps.size());
  parallel_for(
      cps.size(),
      [&](size_t k) {
        const Vec x = embed(L, cps[k], Proj::c);
        fits[k] = differentiability_fit([&](const Vec& y) { return chain.conj(y); }, x, chain.Delta(cps[k]), scales,
                                        dirs, 1e-13, static_cast<int>(k));
      },
      sc.threads);
  double min_slope = std::numeric_limits<double>::infinity();
  int unavailable = 0;
  std::string slopes;
  for (const auto& f : fits) {
    r.table.rows.insert(r.table.rows.end(), f.table.rows.begin(), f.table.rows.end());
    if (!f.pooled.available) {
      ++unavailable;
      slopes += " n/a";
      continue;
    }
    min_slope = std::min(min_slope, f.pooled.slope);
    slopes += " " + num(f.pooled.slope);
  }
  const double id_err = (chain.Delta(Vec::Zero(L.nc())) - Mat::Identity(L.dim(), L.dim())).norm();
  // grid modulus of continuity of Delta along the center
  double lip = 0;
  if (L.nc() > 0) {
    const auto line = center_points(L, 21, sc.box, sc.seed + 6);
    for (size_t k = 0; k + 1 < line.size(); ++k)
      lip = std::max(lip, (chain.Delta(line[k + 1]) - chain.Delta(line[k])).norm() / (line[k + 1] - line[k]).norm());
  }
  r.note = "pooled slopes:" + slopes + "; |Delta(0) - id| " + num(id_err) + " (bound 1e-8); Delta grid modulus " +
           num(lip) + " (bound 100)";
  if (unavailable == static_cast<int>(fits.size())) {
    r.note += "; fit unavailable, remainders at the noise floor";
    min_slope = std::numeric_limits<double>::quiet_NaN();
  }
  const bool slopes_ok = std::isnan(min_slope) || min_slope >= 1.05;
  return finish(r, min_slope, 1.05, slopes_ok && id_err <= 1e-8 && lip <= 100, t0);
}

CheckRecord check_holder_calculator() {
  const auto t0 = Clock::now();
  CheckRecord r;
  r.name = "holder_calculator";
  r.criterion = "10";
  r.grid = "three regimes of rho tau_2";
  r.table = check_table();
  struct Case {
    double t1, t2, rho, a, eps, want;
    const char* label;
  };
  const double a = 0.6;
  const std::vector<Case> cases{
      {0.5, 0.8, 1.2, a, 0.01, a, "rho tau2 < 1"},
      {0.5, 0.8, 1.25, a, 0.01, a - 0.01, "rho tau2 = 1"},
      {0.5, 1.5, 1.2, a, 0.01, (std::log(0.5) + std::log(1.2)) / (std::log(0.5) - std::log(1.5)) * a, "rho tau2 > 1"},
      {0.5, 1.5, 1.0, a, 0.01, std::log(0.5) / (std::log(0.5) - std::log(1.5)) * a, "rho = 1, tau2 > 1"},
  };
  double m = 0;
  for (const auto& c : cases) {
    const double e = std::abs(holder_exponent_bound(c.t1, c.t2, c.rho, c.a, c.eps) - c.want);
    m = std::max(m, e);
    add_row(r.table, c.label, e, 1e-12, e <= 1e-12);
  }
  return finish(r, m, 1e-12, m <= 1e-12, t0);
}

CheckRecord check_sharpness(const CounterexampleDemo& d) {
  const auto t0 = Clock::now();
  CheckRecord r;
  r.name = "sharpness_demo";
  r.criterion = "11";
  r.gating = false;
  r.grid = "scales 2^-" + std::to_string(static_cast<int>(std::lround(-std::log2(d.scales.front())))) + "..2^-" +
           std::to_string(static_cast<int>(std::lround(-std::log2(d.scales.back())))) + ", windows of 8";
  r.table = d.table;
  bool growing = d.holder_quotient.size() > 2;
  const size_t half = d.holder_quotient.size() / 2;
  for (size_t k = half; k + 1 < d.holder_quotient.size(); ++k)
    growing = growing && d.holder_quotient[k + 1] > d.holder_quotient[k];
  growing = growing && d.holder_quotient.back() > 1e3 * d.holder_quotient.front();
  const bool df0_ok = std::abs(d.df0_fd - d.mu) <= 2 * d.mu / (1000 * std::log(2.0));
  r.note = "CEX1 min window slope " + num(d.cex_min_slope) + ", smooth min window slope " +
           num(d.smooth_min_slope) + "; DF(0) quotient " + num(d.df0_fd) + "; Holder quotient " +
           num(d.holder_quotient.front()) + " at j=" + std::to_string(d.holder_j.front()) + " to " +
           num(d.holder_quotient.back()) + " at j=" + std::to_string(d.holder_j.back()) +
           (growing ? " (growing)" : " (not growing)");
  const bool pass = d.cex_min_slope < 1.05 && d.smooth_min_slope >= 1.05 && growing && df0_ok;
  return finish(r, d.cex_min_slope, 1.05, pass, t0);
}

}  // namespace phlin
