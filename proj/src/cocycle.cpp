#include "phlin/cocycle.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace phlin {

namespace {

Mat thin_q(const Mat& M) {
  Eigen::HouseholderQR<Mat> qr(M);
  return qr.householderQ() * Mat::Identity(M.rows(), M.cols());
}

double smin(const Mat& M) {
  const auto sv = M.jacobiSvd().singularValues();
  return sv(sv.size() - 1);
}

double smax(const Mat& M) { return M.size() == 0 ? 0.0 : M.jacobiSvd().singularValues()(0); }

// Axes of unstable blocks [from, to) as columns in X_u coordinates.
Mat unstable_axes(const Layout& L, int from, int to) {
  const int nu = L.nu();
  int a = L.unstable_offset_in_u(from);
  int b = to >= static_cast<int>(L.unstable.size()) ? nu : L.unstable_offset_in_u(to);
  Mat Q = Mat::Zero(nu, b - a);
  for (int j = a; j < b; ++j) Q(j, j - a) = 1.0;
  return Q;
}

std::string fmtd(double v) { return fmt17(v); }

}  // namespace

Cocycle center_cocycle(const DynMap& F) {
  const Layout L = F.layout();
  Cocycle c;
  c.base_dim = L.nc();
  c.fiber_dim = L.dim();
  c.name = F.name() + ":center";
  const DynMap* f = &F;
  c.g = [f, L](const Vec& x) { return project(L, f->eval(embed(L, x, Proj::c)), Proj::c); };
  c.ginv = [f, L](const Vec& x) { return project(L, f->inverse(embed(L, x, Proj::c)), Proj::c); };
  c.A = [f, L](const Vec& x) { return f->jacobian(embed(L, x, Proj::c)); };
  return c;
}

Cocycle unstable_cocycle(const DynMap& F) {
  const Layout L = F.layout();
  Cocycle c;
  c.base_dim = L.ns() + L.nc();
  c.fiber_dim = L.nu();
  c.name = F.name() + ":unstable";
  const DynMap* f = &F;
  c.g = [f, L](const Vec& x) { return project(L, f->eval(embed(L, x, Proj::cs)), Proj::cs); };
  c.ginv = [f, L](const Vec& x) { return project(L, f->inverse(embed(L, x, Proj::cs)), Proj::cs); };
  c.A = [f, L](const Vec& x) { return f->unstable_block(embed(L, x, Proj::cs)); };
  return c;
}

Orbit make_orbit(const Cocycle& c, const Vec& base, int lo, int hi) {
  if (lo > 0 || hi < 0) throw ConfigError("orbit range must contain 0");
  Orbit o;
  o.lo = lo;
  o.hi = hi;
  o.pts.resize(static_cast<size_t>(hi - lo + 1));
  o.pts[static_cast<size_t>(-lo)] = base;
  for (int n = 1; n <= hi; ++n) o.pts[static_cast<size_t>(n - lo)] = c.g(o.at(n - 1));
  for (int n = -1; n >= lo; --n) o.pts[static_cast<size_t>(n - lo)] = c.ginv(o.at(n + 1));
  o.gen.reserve(o.pts.size());
  for (const auto& p : o.pts) {
    Mat A = c.A(p);
    if (!A.allFinite()) throw NumericError("non-finite generator along the orbit");
    o.gen.push_back(std::move(A));
  }
  return o;
}

Mat orbit_product(const Orbit& o, int m, int n) {
  const Eigen::Index d = o.gen.front().rows();
  Mat P = Mat::Identity(d, d);
  if (m >= n) {
    for (int k = n; k < m; ++k) P = o.A(k) * P;
  } else {
    for (int k = m; k < n; ++k) {
      Eigen::PartialPivLU<Mat> lu(o.A(k));
      if (!(std::abs(lu.determinant()) > 0)) throw NumericError("singular generator along the orbit");
      P = P * lu.inverse();
    }
  }
  return P;
}

Mat cocycle_product(const Cocycle& c, int m, int n, const Vec& base) {
  if (m == n) return Mat::Identity(c.fiber_dim, c.fiber_dim);
  const Orbit o = make_orbit(c, base, std::min({0, m, n}), std::max({0, m, n}));
  return orbit_product(o, m, n);
}

DichotomyEstimate estimate_dichotomy(const DynMap& F, const SpectralStructure& st, int samples,
                                     int horizon, double box, unsigned seed) {
  const Layout L = F.layout();
  const Cocycle cc = center_cocycle(F);
  DichotomyEstimate est;
  est.samples = samples;
  est.horizon = horizon;
  est.s_minus = est.c_minus = est.u_minus = std::numeric_limits<double>::infinity();
  est.K = 1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-box, box);
  struct Part {
    Proj p;
    int n;
  };
  const Part parts[3] = {{Proj::s, L.ns()}, {Proj::c, L.nc()}, {Proj::u, L.nu()}};
  for (int i = 0; i < samples; ++i) {
    Vec b(L.nc());
    for (int j = 0; j < L.nc(); ++j) b(j) = i == 0 ? 0.0 : U(rng);
    const Orbit o = make_orbit(cc, b, -horizon, horizon);
    for (const auto& part : parts) {
      if (part.n == 0) continue;
      Mat fw = Mat::Identity(part.n, part.n), bw = fw;
      for (int n = 1; n <= horizon; ++n) {
        fw = sub_block(L, o.A(n - 1), part.p, part.p) * fw;
        bw = bw * sub_block(L, o.A(-n), part.p, part.p).inverse();
        const double nf = smax(fw), nb = smax(bw);
        switch (part.p) {
          case Proj::s:
            est.K = std::max({est.K, nf / std::pow(st.ls_plus, n), nb * std::pow(st.ls_minus, n)});
            break;
          case Proj::u:
            est.K = std::max({est.K, nb * std::pow(st.lu_minus, n), nf / std::pow(st.lu_plus, n)});
            break;
          default:
            est.K = std::max({est.K, nf / std::pow(1 + st.varsigma, n), nb / std::pow(1 + st.varsigma, n)});
        }
      }
      const double hi = std::pow(smax(fw), 1.0 / horizon), lo = std::pow(smin(fw), 1.0 / horizon);
      double *mn = &est.s_minus, *mx = &est.s_plus;
      if (part.p == Proj::c) mn = &est.c_minus, mx = &est.c_plus;
      if (part.p == Proj::u) mn = &est.u_minus, mx = &est.u_plus;
      *mn = std::min(*mn, lo);
      *mx = std::max(*mx, hi);
    }
  }
  for (double* v : {&est.s_minus, &est.c_minus, &est.u_minus})
    if (std::isinf(*v)) *v = 0.0;
  if (L.ns() > 0 && !(est.s_plus < st.ls_plus && est.s_minus > st.ls_minus))
    est.violations.push_back("stable rates [" + fmtd(est.s_minus) + ", " + fmtd(est.s_plus) +
                             "] outside the declared envelope");
  if (L.nu() > 0 && !(est.u_minus > st.lu_minus && est.u_plus < st.lu_plus))
    est.violations.push_back("unstable rates [" + fmtd(est.u_minus) + ", " + fmtd(est.u_plus) +
                             "] outside the declared envelope");
  if (L.nc() > 0 && !(est.c_plus <= 1 + st.varsigma && est.c_minus >= 1 - st.varsigma))
    est.violations.push_back("center rates [" + fmtd(est.c_minus) + ", " + fmtd(est.c_plus) +
                             "] outside [1-varsigma, 1+varsigma]");
  if (est.K > st.K * (1 + 1e-9))
    est.violations.push_back("fitted K = " + fmtd(est.K) + " exceeds declared K = " + fmtd(st.K));
  return est;
}

namespace {

SplittingField canonical_field(const Layout& L, const Vec& base, const std::vector<Mat>& spaces) {
  SplittingField f;
  f.base = base;
  const int m = static_cast<int>(L.unstable.size());
  f.V.resize(L.nu(), L.nu());
  for (int j = 0; j < m; ++j) {
    const Mat& Q = spaces[static_cast<size_t>(j)];
    const Mat axes = unstable_axes(L, j, j + 1);
    Mat fr = orthonormalize(Q * (Q.transpose() * axes));
    for (Eigen::Index k = 0; k < fr.cols(); ++k) fr.col(k) = fix_sign(fr.col(k));
    f.V.middleCols(L.unstable_offset_in_u(j), fr.cols()) = fr;
    f.frames.push_back(std::move(fr));
  }
  const auto sv = f.V.jacobiSvd().singularValues();
  f.condition = sv(0) / sv(sv.size() - 1);
  return f;
}

}  // namespace

std::vector<SplittingField> splitting_along_orbit(const Cocycle& c, const Layout& L, const Vec& x_cs,
                                                  int n, int horizon) {
  const int m = static_cast<int>(L.unstable.size());
  const int nu = L.nu();
  std::vector<SplittingField> out;
  if (m <= 1) {
    Vec b = x_cs;
    for (int k = 0; k <= n; ++k) {
      SplittingField f;
      f.base = b;
      f.V = Mat::Identity(nu, nu);
      f.frames = {f.V};
      out.push_back(std::move(f));
      if (k < n) b = c.g(b);
    }
    return out;
  }
  const Orbit o = make_orbit(c, x_cs, -horizon, n + horizon);
  // fast[j][k], slow[j][k] for k = 0..n
  std::vector<std::vector<Mat>> fast(static_cast<size_t>(m)), slow(static_cast<size_t>(m));
  for (int j = 1; j < m; ++j) {
    Mat Q = unstable_axes(L, j, m);
    for (int k = -horizon; k <= n; ++k) {
      if (k >= 0) fast[static_cast<size_t>(j)].push_back(Q);
      if (k < n) Q = thin_q(o.A(k) * Q);
    }
  }
  for (int j = 0; j + 1 < m; ++j) {
    Mat Q = unstable_axes(L, 0, j + 1);
    std::vector<Mat> rev;
    for (int k = n + horizon; k >= 0; --k) {
      if (k <= n) rev.push_back(Q);
      if (k > 0) Q = thin_q(o.A(k - 1).partialPivLu().solve(Q));
    }
    slow[static_cast<size_t>(j)].assign(rev.rbegin(), rev.rend());
  }
  for (int k = 0; k <= n; ++k) {
    std::vector<Mat> spaces;
    for (int j = 0; j < m; ++j) {
      const int sz = L.unstable[static_cast<size_t>(j)];
      if (j == 0) {
        spaces.push_back(slow[0][static_cast<size_t>(k)]);
      } else if (j == m - 1) {
        spaces.push_back(fast[static_cast<size_t>(j)][static_cast<size_t>(k)]);
      } else {
        const Mat& QF = fast[static_cast<size_t>(j)][static_cast<size_t>(k)];
        const Mat& QS = slow[static_cast<size_t>(j)][static_cast<size_t>(k)];
        Mat M(nu, QF.cols() + QS.cols());
        M << QF, -QS;
        Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
        const Mat N = svd.matrixV().rightCols(sz);
        spaces.push_back(thin_q(QF * N.topRows(QF.cols())));
      }
    }
    out.push_back(canonical_field(L, o.at(k), spaces));
  }
  for (int k = 0; k < n; ++k)
    out[static_cast<size_t>(k)].invariance_residual =
        splitting_invariance_residual(c, out[static_cast<size_t>(k)], out[static_cast<size_t>(k + 1)]);
  return out;
}

double splitting_invariance_residual(const Cocycle& c, const SplittingField& here,
                                     const SplittingField& there) {
  const Mat A = c.A(here.base);
  double r = 0;
  for (size_t i = 0; i < here.frames.size(); ++i) {
    const Mat M = A * here.frames[i];
    const Mat& E = there.frames[i];
    const Mat R = M - E * (E.transpose() * M);
    r = std::max(r, R.norm() / std::max(1e-300, M.norm()));
  }
  return r;
}

SplittingField compute_invariant_splitting(const Cocycle& c, const Layout& L, const Vec& x_cs,
                                           int horizon) {
  auto v = splitting_along_orbit(c, L, x_cs, 1, horizon);
  return v.front();
}

Mat assemble_P1(const SplittingField& f) {
  if (f.condition > 1e8) throw NumericError("ill-conditioned splitting frame (cond " + fmtd(f.condition) + ")");
  return f.V.inverse();
}

TransferField::TransferField(Cocycle c, Layout L, double tol, int horizon, int max_terms)
    : c_(std::move(c)), L_(std::move(L)), tol_(tol), horizon_(horizon), max_terms_(max_terms) {}

Vec TransferField::center_of(const Vec& x_cs) const {
  Vec xc = x_cs;
  xc.head(L_.ns()).setZero();
  return xc;
}

void TransferField::calibrate(int samples, double box, unsigned seed) {
  TransferCalibration cal;
  const int m = static_cast<int>(L_.unstable.size());
  cal.rate_max.assign(static_cast<size_t>(m), 0.0);
  cal.rate_min.assign(static_cast<size_t>(m), std::numeric_limits<double>::infinity());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-box, box);
  const int ncs = L_.ns() + L_.nc();
  std::vector<Vec> pts;
  for (int i = 0; i < samples; ++i) {
    Vec x(ncs);
    for (int j = 0; j < ncs; ++j) x(j) = U(rng);
    pts.push_back(x);
  }
  for (const auto& x0 : pts) {
    for (const Vec& x : {x0, center_of(x0)}) {
      const auto f = splitting_along_orbit(c_, L_, x, 1, horizon_);
      const Mat D = assemble_P1(f[1]) * c_.A(x) * f[0].V;
      for (int j = 0; j < m; ++j) {
        const int o = L_.unstable_offset_in_u(j), sz = L_.unstable[static_cast<size_t>(j)];
        const Mat Dj = D.block(o, o, sz, sz);
        cal.rate_max[static_cast<size_t>(j)] = std::max(cal.rate_max[static_cast<size_t>(j)], smax(Dj));
        cal.rate_min[static_cast<size_t>(j)] = std::min(cal.rate_min[static_cast<size_t>(j)], smin(Dj));
      }
    }
    if (L_.ns() > 0) {
      std::vector<int> dirs;
      for (int j = 0; j < L_.ns(); ++j) dirs.push_back(j);
      const Mat J = fd_partial(c_.g, x0, dirs).topRows(L_.ns());
      cal.ls_plus_fit = std::max(cal.ls_plus_fit, smax(J));
    }
  }
  if (m > 1) {
    const SlopeFit fit = fit_splitting_exponent(c_, L_, pts, horizon_, seed);
    if (fit.available) {
      cal.beta_E = std::min(1.0, fit.slope);
      cal.beta_E_fitted = true;
    }
  }
  for (int j = 0; j < m; ++j)
    cal.theta.push_back(cal.rate_max[static_cast<size_t>(j)] / cal.rate_min[static_cast<size_t>(j)] *
                        std::pow(cal.ls_plus_fit, cal.beta_E));
  cal_ = std::move(cal);
}

std::vector<BSeries> TransferField::series(const Vec& x_cs, std::vector<Mat>* P1_y,
                                           std::vector<Mat>* P1_c) const {
  if (cal_.theta.empty()) throw ConfigError("transfer field used before calibration");
  const int m = static_cast<int>(L_.unstable.size());
  const Vec xc = center_of(x_cs);
  for (int j = 0; j < m; ++j)
    if (!(cal_.theta[static_cast<size_t>(j)] < 1))
      throw NumericError("transfer series rate theta = " + fmtd(cal_.theta[static_cast<size_t>(j)]) +
                         " is not below 1");
  int n = std::min(64, max_terms_);
  while (true) {
    const auto fy = splitting_along_orbit(c_, L_, x_cs, n + 1, horizon_);
    const auto fc = splitting_along_orbit(c_, L_, xc, n + 1, horizon_);
    std::vector<Mat> Py, Pc;
    for (int k = 0; k <= n + 1; ++k) {
      Py.push_back(assemble_P1(fy[static_cast<size_t>(k)]));
      Pc.push_back(assemble_P1(fc[static_cast<size_t>(k)]));
    }
    std::vector<BSeries> out;
    bool all_done = true;
    for (int j = 0; j < m; ++j) {
      const int o = L_.unstable_offset_in_u(j), sz = L_.unstable[static_cast<size_t>(j)];
      const double theta = cal_.theta[static_cast<size_t>(j)];
      BSeries b;
      b.theta = theta;
      b.B = Mat::Identity(sz, sz);
      Mat Lm = b.B, R = b.B;
      double C = 0;
      bool done = false;
      for (int k = 0; k <= n; ++k) {
        const Mat Dy = (Py[static_cast<size_t>(k + 1)] * c_.A(fy[static_cast<size_t>(k)].base) *
                        fy[static_cast<size_t>(k)].V).block(o, o, sz, sz);
        const Mat Dc = (Pc[static_cast<size_t>(k + 1)] * c_.A(fc[static_cast<size_t>(k)].base) *
                        fc[static_cast<size_t>(k)].V).block(o, o, sz, sz);
        const Mat Ln = Lm * Dc.inverse();
        const Mat G = Ln * (Dy - Dc) * R;
        b.B += G;
        R = Dy * R;
        Lm = Ln;
        const double g = G.norm();
        b.term_norms.push_back(g);
        C = std::max(C, g / std::pow(theta, k));
        b.N = k + 1;
        b.tail_bound = C * std::pow(theta, k + 1) / (1 - theta);
        if (b.tail_bound <= tol_ / 2 && g <= tol_ / 2) {
          done = true;
          break;
        }
      }
      // empirical ratio from the log-slope of the term norms
      std::vector<double> ks, gs;
      const double gmax = *std::max_element(b.term_norms.begin(), b.term_norms.end());
      for (size_t k = 1; k < b.term_norms.size(); ++k)
        if (b.term_norms[k] > 1e-13 * gmax && b.term_norms[k] > 1e-280) {
          ks.push_back(std::exp(static_cast<double>(k)));
          gs.push_back(b.term_norms[k]);
        }
      const SlopeFit fit = ks.size() >= 3 ? fit_loglog(ks, gs, 0.0) : SlopeFit{};
      b.cauchy_ratio = fit.available ? std::exp(fit.slope) : std::numeric_limits<double>::quiet_NaN();
      all_done = all_done && done;
      out.push_back(std::move(b));
    }
    if (all_done || n >= max_terms_) {
      if (!all_done) throw NumericError("transfer series not converged within " + std::to_string(n + 1) + " terms");
      if (P1_y) *P1_y = {Py[0]};
      if (P1_c) *P1_c = {Pc[0]};
      return out;
    }
    n = std::min(2 * n, max_terms_);
  }
}

BSeries TransferField::transfer_B(const Vec& x_cs, int block) const {
  auto s = series(x_cs, nullptr, nullptr);
  return s.at(static_cast<size_t>(block));
}

TransferMap TransferField::at(const Vec& x_cs) const {
  TransferMap t;
  t.base = x_cs;
  std::vector<Mat> Py, Pc;
  t.blocks = series(x_cs, &Py, &Pc);
  t.P1 = Py[0];
  t.P1c = Pc[0];
  const int nu = L_.nu();
  t.B = Mat::Zero(nu, nu);
  for (size_t j = 0; j < t.blocks.size(); ++j) {
    const int o = L_.unstable_offset_in_u(static_cast<int>(j));
    const Mat& B = t.blocks[j].B;
    t.B.block(o, o, B.rows(), B.cols()) = B;
    t.N = std::max(t.N, t.blocks[j].N);
    t.tail_bound = std::max(t.tail_bound, t.blocks[j].tail_bound);
  }
  t.Pu = t.P1c.inverse() * t.B * t.P1;
  return t;
}

Mat TransferField::Pu(const Vec& x_cs) const { return at(x_cs).Pu; }

double cohomology_residual(const TransferField& T, const Vec& x_cs) {
  const Cocycle& c = T.cocycle();
  Vec xc = x_cs;
  xc.head(T.layout().ns()).setZero();
  const Mat lhs = T.Pu(c.g(x_cs)) * c.A(x_cs);
  const Mat rhs = c.A(xc) * T.Pu(x_cs);
  return (lhs - rhs).norm();
}

double holder_exponent_bound(double tau1, double tau2, double rho, double alpha, double eps) {
  if (!(tau1 > 0 && tau2 > 0 && rho > 0)) throw ConfigError("tau1, tau2, rho must be positive");
  if (!(alpha > 0 && alpha <= 1)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(rho * tau1 < 1)) throw ConfigError("rho * tau1 = " + fmtd(rho * tau1) + " is not below 1");
  const double r2 = rho * tau2;
  if (std::abs(r2 - 1.0) <= 1e-14) {
    if (!(eps > 0 && eps < alpha)) throw ConfigError("eps must lie in (0, alpha)");
    return alpha - eps;
  }
  if (r2 < 1) return alpha;
  return (std::log(tau1) + std::log(rho)) / (std::log(tau1) - std::log(tau2)) * alpha;
}

SlopeFit fit_splitting_exponent(const Cocycle& c, const Layout& L, const std::vector<Vec>& centers,
                                int horizon, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N01;
  std::vector<double> t, r;
  for (const auto& x : centers) {
    Vec v(x.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = N01(rng);
    v /= v.norm();
    const SplittingField f0 = compute_invariant_splitting(c, L, x, horizon);
    for (double h : dyadic_scales(3, 10)) {
      const SplittingField f1 = compute_invariant_splitting(c, L, x + 0.05 * h * v, horizon);
      double d = 0;
      for (size_t i = 0; i < f0.frames.size(); ++i) d = std::max(d, subspace_distance(f0.frames[i], f1.frames[i]));
      t.push_back(0.05 * h);
      r.push_back(d);
    }
  }
  return fit_loglog(t, r, 1e-13);
}

}  // namespace phlin
