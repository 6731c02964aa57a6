#include <cmath>
#include <limits>

#include "phlin/lp.hpp"

namespace phlin {

double foliation_beta(const SpectralStructure& st) {
  return 0.5 * (std::log(1 + st.varsigma) - std::log(st.lu_minus)) / std::log(st.ls_minus);
}

std::pair<double, double> unstable_rho_interval(const SpectralStructure& st) {
  return {1 + st.varsigma, st.lu_minus * std::pow(st.ls_minus, foliation_beta(st))};
}

std::pair<double, double> stable_rho_interval(const SpectralStructure& st) {
  return {st.ls_plus, 1 - st.varsigma};
}

std::pair<double, double> oracle_rho_interval(const SpectralStructure& st) {
  return {1 + st.varsigma, st.lu_minus};
}

double log_midpoint(std::pair<double, double> iv) { return std::sqrt(iv.first * iv.second); }

namespace {

LPConfig admissible(std::pair<double, double> iv, LPConfig cfg, const char* what) {
  if (!(iv.first < iv.second)) throw ConfigError(std::string("empty admissible interval for ") + what);
  if (cfg.rho == 0) cfg.rho = log_midpoint(iv);
  if (!(cfg.rho > iv.first && cfg.rho < iv.second))
    throw ConfigError(std::string(what) + " weight " + fmt17(cfg.rho) + " outside (" + fmt17(iv.first) +
                      ", " + fmt17(iv.second) + ")");
  if (cfg.N < 1) throw ConfigError("truncation N must be positive");
  if (!(cfg.tol > 0)) throw ConfigError("tolerance must be positive");
  return cfg;
}

std::vector<int> coords(const std::vector<Sweep>& sw, Sweep which) {
  std::vector<int> out;
  for (size_t i = 0; i < sw.size(); ++i)
    if (sw[i] == which) out.push_back(static_cast<int>(i));
  return out;
}

Mat pick(const Mat& M, const std::vector<int>& r, const std::vector<int>& c) {
  Mat out(r.size(), c.size());
  for (size_t i = 0; i < r.size(); ++i)
    for (size_t j = 0; j < c.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = M(r[i], c[j]);
  return out;
}

Vec pick(const Vec& v, const std::vector<int>& r) {
  Vec out(r.size());
  for (size_t i = 0; i < r.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(r[i]);
  return out;
}

void put(Vec& v, const std::vector<int>& r, const Vec& w) {
  for (size_t i = 0; i < r.size(); ++i) v(r[i]) = w(static_cast<Eigen::Index>(i));
}

}  // namespace

LPConfig admissible_unstable(const SpectralStructure& st, LPConfig cfg) {
  return admissible(unstable_rho_interval(st), cfg, "unstable LP");
}

LPConfig admissible_stable(const SpectralStructure& st, LPConfig cfg) {
  return admissible(stable_rho_interval(st), cfg, "stable LP");
}

double WeightedSequence::weighted_norm() const {
  double m = 0;
  for (int n = lo; n <= hi; ++n) m = std::max(m, std::pow(weight, -n) * at(n).norm());
  return m;
}

WeightedSequence solve_lp(const LPProblem& p, double tol, int max_iter) {
  const int d = static_cast<int>(p.sweep.size());
  const auto F = coords(p.sweep, Sweep::forward);
  const auto B = coords(p.sweep, Sweep::backward);
  const auto Z = coords(p.sweep, Sweep::anchored);
  const int len = p.hi - p.lo;
  if (static_cast<int>(p.M.size()) != len) throw ConfigError("LP coefficient count does not match the range");
  if (!Z.empty() && (p.lo > 0 || p.hi < 0)) throw ConfigError("anchored coordinates need 0 in the range");
  std::vector<Mat> LF, LBi, LZ, LZi, Cpl;
  for (int k = 0; k < len; ++k) {
    const Mat& M = p.M[static_cast<size_t>(k)];
    Mat D = Mat::Zero(d, d);
    for (const auto* grp : {&F, &B, &Z})
      for (int i : *grp)
        for (int j : *grp) D(i, j) = M(i, j);
    Cpl.push_back(M - D);
    LF.push_back(pick(M, F, F));
    LBi.push_back(B.empty() ? Mat() : Mat(pick(M, B, B).inverse()));
    LZ.push_back(pick(M, Z, Z));
    LZi.push_back(Z.empty() ? Mat() : Mat(pick(M, Z, Z).inverse()));
  }
  auto weight = [&](int k) { return std::pow(p.rho, p.two_sided_weight ? -std::abs(k) : -k); };

  WeightedSequence s;
  s.lo = p.lo;
  s.hi = p.hi;
  s.weight = p.rho;
  s.q.assign(static_cast<size_t>(len + 1), Vec::Zero(d));
  std::vector<Vec> r(static_cast<size_t>(len));
  double prev = -1;
  int growth = 0, stall = 0;
  double first = 1;
  for (int it = 1; it <= max_iter; ++it) {
    for (int k = 0; k < len; ++k) {
      const Vec& qk = s.q[static_cast<size_t>(k)];
      r[static_cast<size_t>(k)] = p.remainder(p.lo + k, qk) + Cpl[static_cast<size_t>(k)] * qk;
    }
    std::vector<Vec> nq(static_cast<size_t>(len + 1), Vec::Zero(d));
    if (!F.empty()) {
      Vec v = pick(p.boundary, F);
      put(nq[0], F, v);
      for (int k = 0; k < len; ++k) {
        v = LF[static_cast<size_t>(k)] * v + pick(r[static_cast<size_t>(k)], F);
        put(nq[static_cast<size_t>(k + 1)], F, v);
      }
    }
    if (!B.empty()) {
      Vec v = pick(p.boundary, B);
      put(nq[static_cast<size_t>(len)], B, v);
      for (int k = len - 1; k >= 0; --k) {
        v = LBi[static_cast<size_t>(k)] * (v - pick(r[static_cast<size_t>(k)], B));
        put(nq[static_cast<size_t>(k)], B, v);
      }
    }
    if (!Z.empty()) {
      const int z = -p.lo;
      Vec v = pick(p.boundary, Z);
      put(nq[static_cast<size_t>(z)], Z, v);
      for (int k = z; k < len; ++k) {
        v = LZ[static_cast<size_t>(k)] * v + pick(r[static_cast<size_t>(k)], Z);
        put(nq[static_cast<size_t>(k + 1)], Z, v);
      }
      v = pick(p.boundary, Z);
      for (int k = z - 1; k >= 0; --k) {
        v = LZi[static_cast<size_t>(k)] * (v - pick(r[static_cast<size_t>(k)], Z));
        put(nq[static_cast<size_t>(k)], Z, v);
      }
    }
    double diff = 0, norm = 0;
    for (int k = 0; k <= len; ++k) {
      const double w = weight(p.lo + k);
      diff = std::max(diff, w * (nq[static_cast<size_t>(k)] - s.q[static_cast<size_t>(k)]).norm());
      norm = std::max(norm, w * nq[static_cast<size_t>(k)].norm());
    }
    if (!std::isfinite(diff)) throw NumericError("LP iteration produced non-finite values");
    s.q = std::move(nq);
    s.iterations = it;
    s.last_diff = diff;
    if (prev > 0 && it > 2) s.lipschitz_estimate = std::max(s.lipschitz_estimate, diff / prev);
    if (diff <= tol * std::max(1.0, norm)) break;
    // stalled at the rounding floor (inner solves are only accurate to a few ulps)
    stall = (prev > 0 && diff >= 0.9 * prev) ? stall + 1 : 0;
    if (stall >= 10 && diff <= 1e3 * tol * std::max(1.0, norm)) break;
    growth = (prev > 0 && diff > prev) ? growth + 1 : 0;
    if (it == 1) first = std::max(diff, 1.0);
    if (growth >= 5 || diff > 1e8 * first)
      throw NumericError("LP iteration does not contract (Lipschitz estimate " + fmt17(s.lipschitz_estimate) + ")");
    prev = diff;
    if (it == max_iter) throw NumericError("LP iteration did not converge within " + std::to_string(max_iter) + " sweeps");
  }
  // geometric tail beyond the truncated ends
  auto tail = [&](int end, int inner) {
    const double a = s.at(end).norm(), b = s.at(inner).norm();
    if (a == 0) return 0.0;
    const double ratio = b > 0 ? std::min(0.95, a / b) : 0.95;
    return a * ratio / (1 - ratio);
  };
  if (p.lo < 0 && p.lo < p.hi) s.tail_bound = std::max(s.tail_bound, tail(p.lo, p.lo + 1));
  if (p.hi > 0 && p.lo < p.hi) s.tail_bound = std::max(s.tail_bound, tail(p.hi, p.hi - 1));
  return s;
}

UnstableContext prepare_unstable(const DynMap& F, const Vec& x, int N) {
  const Layout& L = F.layout();
  UnstableContext ctx;
  ctx.x = x;
  ctx.N = N;
  ctx.xk.assign(static_cast<size_t>(N + 1), Vec());
  ctx.Mk.assign(static_cast<size_t>(N), Mat());
  ctx.Dfk.assign(static_cast<size_t>(N), Mat());
  Vec xi = x;
  Vec c = embed(L, project(L, x, Proj::c), Proj::c);
  ctx.xk[static_cast<size_t>(N)] = xi;
  for (int k = -1; k >= -N; --k) {
    xi = F.inverse(xi);
    c = F.inverse(c);
    ctx.xk[static_cast<size_t>(k + N)] = xi;
    Mat M = F.jacobian(c);
    ctx.Dfk[static_cast<size_t>(k + N)] = M - F.linear_part();
    ctx.Mk[static_cast<size_t>(k + N)] = std::move(M);
  }
  return ctx;
}

WeightedSequence solve_unstable_lp(const DynMap& F, const UnstableContext& ctx, const Vec& z_u,
                                   const LPConfig& cfg) {
  const Layout& L = F.layout();
  const int N = ctx.N;
  if (z_u.size() != L.nu()) throw ConfigError("z_u has the wrong dimension");
  LPProblem p;
  p.lo = -N;
  p.hi = 0;
  p.sweep.assign(static_cast<size_t>(L.dim()), Sweep::forward);
  for (int i : L.indices(Proj::u)) p.sweep[static_cast<size_t>(i)] = Sweep::backward;
  p.boundary = Vec::Zero(L.dim());
  assign(L, p.boundary, Proj::u, z_u - project(L, ctx.x, Proj::u));
  p.M = ctx.Mk;
  std::vector<Vec> fx;
  for (const auto& xk : ctx.xk) fx.push_back(F.nonlinear_part(xk));
  p.remainder = [&](int k, const Vec& q) -> Vec {
    const size_t i = static_cast<size_t>(k + N);
    if (q.isZero(0)) return Vec::Zero(q.size());
    return F.nonlinear_part(ctx.xk[i] + q) - fx[i] - ctx.Dfk[i] * q;
  };
  p.rho = cfg.rho;
  return solve_lp(p, cfg.tol, cfg.max_iter);
}

WeightedSequence solve_unstable_lp(const DynMap& F, const Vec& x, const Vec& z_u, const LPConfig& cfg) {
  return solve_unstable_lp(F, prepare_unstable(F, x, cfg.N), z_u, cfg);
}

FoliationChart::FoliationChart(const DynMap& F, const SpectralStructure& st, LPConfig cfg)
    : F_(&F), cfg_(admissible_unstable(st, cfg)) {}

WeightedSequence FoliationChart::solve(const Vec& x, const Vec& z_u) const {
  return solve_unstable_lp(*F_, x, z_u, cfg_);
}

Vec FoliationChart::h_u(const Vec& x, const Vec& z_u) const {
  const Layout& L = F_->layout();
  const auto s = solve(x, z_u);
  return project(L, x, Proj::cs) + project(L, s.at(0), Proj::cs);
}

Vec FoliationChart::leaf_point(const Vec& x, const Vec& z_u) const {
  const Layout& L = F_->layout();
  Vec z = embed(L, h_u(x, z_u), Proj::cs);
  assign(L, z, Proj::u, z_u);
  return z;
}

namespace {

// F restricted to X_cs, in cs coordinates.
struct Restricted {
  const DynMap& F;
  Layout L;
  Vec g(const Vec& y) const { return project(L, F.eval(embed(L, y, Proj::cs)), Proj::cs); }
  Vec f(const Vec& y) const { return project(L, F.nonlinear_part(embed(L, y, Proj::cs)), Proj::cs); }
  Mat Dg(const Vec& y) const {
    const Mat J = F.jacobian_columns(embed(L, y, Proj::cs), L.indices(Proj::cs));
    Mat out(J.rows() - L.nu(), J.cols());
    const auto rows = L.indices(Proj::cs);
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = J.row(rows[i]);
    return out;
  }
  Mat A() const { return sub_block(L, F.linear_part(), Proj::cs, Proj::cs); }
};

}  // namespace

StableSolution solve_stable_lp_on_Xcs(const DynMap& F, const Vec& x_cs, const Vec& z_s, const LPConfig& cfg) {
  const Layout& L = F.layout();
  const int ns = L.ns(), nc = L.nc(), N = cfg.N;
  if (x_cs.size() != ns + nc || z_s.size() != ns) throw ConfigError("stable LP input dimensions");
  Restricted R{F, L};
  std::vector<Vec> xk{x_cs};
  Vec c = x_cs;
  c.head(ns).setZero();
  std::vector<Mat> M, Df;
  const Mat Acs = R.A();
  for (int k = 0; k < N; ++k) {
    M.push_back(R.Dg(c));
    Df.push_back(M.back() - Acs);
    xk.push_back(R.g(xk.back()));
    c = R.g(c);
  }
  std::vector<Vec> fx;
  for (const auto& v : xk) fx.push_back(R.f(v));
  LPProblem p;
  p.lo = 0;
  p.hi = N;
  p.sweep.assign(static_cast<size_t>(ns + nc), Sweep::backward);
  for (int i = 0; i < ns; ++i) p.sweep[static_cast<size_t>(i)] = Sweep::forward;
  p.boundary = Vec::Zero(ns + nc);
  p.boundary.head(ns) = z_s - x_cs.head(ns);
  p.M = M;
  p.remainder = [&](int k, const Vec& q) -> Vec {
    if (q.isZero(0)) return Vec::Zero(q.size());
    return R.f(xk[static_cast<size_t>(k)] + q) - fx[static_cast<size_t>(k)] - Df[static_cast<size_t>(k)] * q;
  };
  p.rho = cfg.rho;
  StableSolution out;
  out.p = solve_lp(p, cfg.tol, cfg.max_iter);
  out.h_s = x_cs.tail(nc) + out.p.at(0).tail(nc);
  return out;
}

WeightedSequence solve_classical_lp(const DynMap& F, const Vec& x, const Vec& z_s, const LPConfig& cfg) {
  const Layout& L = F.layout();
  const int N = cfg.N;
  std::vector<Vec> xk{x};
  for (int k = 0; k < N; ++k) xk.push_back(F.eval(xk.back()));
  std::vector<Vec> fx;
  for (const auto& v : xk) fx.push_back(F.nonlinear_part(v));
  LPProblem p;
  p.lo = 0;
  p.hi = N;
  p.sweep.assign(static_cast<size_t>(L.dim()), Sweep::backward);
  for (int i : L.indices(Proj::s)) p.sweep[static_cast<size_t>(i)] = Sweep::forward;
  p.boundary = Vec::Zero(L.dim());
  assign(L, p.boundary, Proj::s, z_s - project(L, x, Proj::s));
  p.M.assign(static_cast<size_t>(N), F.linear_part());
  p.remainder = [&](int k, const Vec& q) -> Vec {
    if (q.isZero(0)) return Vec::Zero(q.size());
    return F.nonlinear_part(xk[static_cast<size_t>(k)] + q) - fx[static_cast<size_t>(k)];
  };
  p.rho = cfg.rho;
  return solve_lp(p, cfg.tol, cfg.max_iter);
}

std::vector<Mat> solve_derivative_lp(const DynMap& F, const Vec& x_c, const LPConfig& cfg) {
  const Layout& L = F.layout();
  const int N = cfg.N, d = L.dim(), ns = L.ns();
  std::vector<Mat> Df;
  Vec c = embed(L, x_c, Proj::c);
  for (int k = 0; k < N; ++k) {
    Df.push_back(F.jacobian(c) - F.linear_part());
    c = F.eval(c);
  }
  std::vector<Mat> P(static_cast<size_t>(N + 1), Mat::Zero(d, ns));
  LPProblem p;
  p.lo = 0;
  p.hi = N;
  p.sweep.assign(static_cast<size_t>(d), Sweep::backward);
  for (int i : L.indices(Proj::s)) p.sweep[static_cast<size_t>(i)] = Sweep::forward;
  p.M.assign(static_cast<size_t>(N), F.linear_part());
  p.remainder = [&](int k, const Vec& q) -> Vec { return Df[static_cast<size_t>(k)] * q; };
  p.rho = cfg.rho;
  for (int j = 0; j < ns; ++j) {
    p.boundary = Vec::Zero(d);
    p.boundary(L.s0() + j) = 1.0;
    const auto s = solve_lp(p, cfg.tol, cfg.max_iter);
    for (int n = 0; n <= N; ++n) P[static_cast<size_t>(n)].col(j) = s.at(n);
  }
  return P;
}

std::vector<Mat> solve_unstable_derivative_lp(const DynMap& F, const Vec& x_c, const LPConfig& cfg) {
  const Layout& L = F.layout();
  const int N = cfg.N, d = L.dim(), nu = L.nu();
  std::vector<Mat> Df(static_cast<size_t>(N));
  Vec c = embed(L, x_c, Proj::c);
  for (int k = -1; k >= -N; --k) {
    c = F.inverse(c);
    Df[static_cast<size_t>(k + N)] = F.jacobian(c) - F.linear_part();
  }
  std::vector<Mat> Q(static_cast<size_t>(N + 1), Mat::Zero(d, nu));
  LPProblem p;
  p.lo = -N;
  p.hi = 0;
  p.sweep.assign(static_cast<size_t>(d), Sweep::forward);
  for (int i : L.indices(Proj::u)) p.sweep[static_cast<size_t>(i)] = Sweep::backward;
  p.M.assign(static_cast<size_t>(N), F.linear_part());
  p.remainder = [&](int k, const Vec& q) -> Vec { return Df[static_cast<size_t>(k + N)] * q; };
  p.rho = cfg.rho;
  for (int j = 0; j < nu; ++j) {
    p.boundary = Vec::Zero(d);
    p.boundary(L.u0() + j) = 1.0;
    const auto s = solve_lp(p, cfg.tol, cfg.max_iter);
    for (int n = -N; n <= 0; ++n) Q[static_cast<size_t>(n + N)].col(j) = s.at(n);
  }
  return Q;
}

OracleVerdict leaf_membership_oracle(const DynMap& F, const Vec& x, const Vec& z, double rho, int horizon,
                                     double bound_factor, bool stable) {
  OracleVerdict v;
  v.bound = bound_factor * (z - x).norm();
  Vec a = x, b = z;
  for (int n = 0; n <= horizon; ++n) {
    const double w = stable ? std::pow(rho, -n) : std::pow(rho, n);
    v.deviation = std::max(v.deviation, w * (b - a).norm());
    if (n == horizon) break;
    if (stable) {
      a = F.eval(a);
      b = F.eval(b);
    } else {
      a = F.inverse(a);
      b = F.inverse(b);
    }
  }
  v.member = v.deviation <= v.bound;
  return v;
}

namespace {

WeightedSequence orbit_lp(const DynMap& F, int lo, int hi, std::vector<Sweep> sweep, Vec boundary, double rho,
                          bool two_sided, const LPConfig& cfg) {
  LPProblem p;
  p.lo = lo;
  p.hi = hi;
  p.sweep = std::move(sweep);
  p.boundary = std::move(boundary);
  p.M.assign(static_cast<size_t>(hi - lo), F.linear_part());
  p.remainder = [&](int, const Vec& x) -> Vec {
    if (x.isZero(0)) return Vec::Zero(x.size());
    return F.nonlinear_part(x);
  };
  p.rho = rho;
  p.two_sided_weight = two_sided;
  return solve_lp(p, cfg.tol, cfg.max_iter);
}

}  // namespace

Vec center_graph(const DynMap& F, const SpectralStructure& st, const Vec& x_c, const LPConfig& cfg) {
  const Layout& L = F.layout();
  std::pair<double, double> iv{1 + st.varsigma, std::min(st.lu_minus, 1 / st.ls_plus)};
  const LPConfig c = admissible(iv, cfg, "center manifold");
  std::vector<Sweep> sw(static_cast<size_t>(L.dim()), Sweep::anchored);
  for (int i : L.indices(Proj::s)) sw[static_cast<size_t>(i)] = Sweep::forward;
  for (int i : L.indices(Proj::u)) sw[static_cast<size_t>(i)] = Sweep::backward;
  const auto s = orbit_lp(F, -c.N, c.N, sw, embed(L, x_c, Proj::c), c.rho, true, c);
  return project(L, s.at(0), Proj::su);
}

Vec center_stable_graph(const DynMap& F, const SpectralStructure& st, const Vec& x_cs, const LPConfig& cfg) {
  const Layout& L = F.layout();
  const LPConfig c = admissible(oracle_rho_interval(st), cfg, "center-stable manifold");
  std::vector<Sweep> sw(static_cast<size_t>(L.dim()), Sweep::forward);
  for (int i : L.indices(Proj::u)) sw[static_cast<size_t>(i)] = Sweep::backward;
  const auto s = orbit_lp(F, 0, c.N, sw, embed(L, x_cs, Proj::cs), c.rho, false, c);
  return project(L, s.at(0), Proj::u);
}

Vec center_unstable_graph(const DynMap& F, const SpectralStructure& st, const Vec& x_cu, const LPConfig& cfg) {
  const Layout& L = F.layout();
  const LPConfig c = admissible(stable_rho_interval(st), cfg, "center-unstable manifold");
  std::vector<Sweep> sw(static_cast<size_t>(L.dim()), Sweep::backward);
  for (int i : L.indices(Proj::s)) sw[static_cast<size_t>(i)] = Sweep::forward;
  const auto s = orbit_lp(F, -c.N, 0, sw, embed(L, x_cu, Proj::cu), c.rho, false, c);
  return project(L, s.at(0), Proj::s);
}

}  // namespace phlin
