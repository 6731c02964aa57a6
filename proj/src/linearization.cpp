#include "phlin/linearization.hpp"

#include <cmath>
#include <limits>

namespace phlin {

namespace {

bool on_cs(const Layout& L, const Vec& x) {
  for (int i : L.indices(Proj::u))
    if (x(i) != 0.0) return false;
  return true;
}

Vec join(const Layout& L, const Vec& cs, const Vec& u) {
  Vec x = embed(L, cs, Proj::cs);
  assign(L, x, Proj::u, u);
  return x;
}

// exp of the log-slope of successive differences above the noise floor. NaN with fewer
// than three such differences, or when the differences drop from far above the floor
// to the floor in one step (the iteration ended exactly, the terms vanish).
double cauchy_ratio(const std::vector<double>& diffs, double floor) {
  std::vector<double> k, r;
  for (size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] > floor) {
      k.push_back(static_cast<double>(i));
      r.push_back(std::log(diffs[i]));
    }
  if (k.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  const size_t last = static_cast<size_t>(k.back());
  if (last + 1 < diffs.size() && diffs[last] > 1e3 * floor) return std::numeric_limits<double>::quiet_NaN();
  double mk = 0, mr = 0;
  for (size_t i = 0; i < k.size(); ++i) {
    mk += k[i];
    mr += r[i];
  }
  mk /= static_cast<double>(k.size());
  mr /= static_cast<double>(k.size());
  double num = 0, den = 0;
  for (size_t i = 0; i < k.size(); ++i) {
    num += (k[i] - mk) * (r[i] - mr);
    den += (k[i] - mk) * (k[i] - mk);
  }
  return std::exp(num / den);
}

constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

Vec NormalForm::eval(const Vec& y) const {
  const Layout& L = layout;
  const Vec yc = project(L, y, Proj::c);
  Vec out = Vec::Zero(L.dim());
  if (L.ns() > 0) assign(L, out, Proj::s, A_s(yc) * project(L, y, Proj::s));
  if (L.nc() > 0) assign(L, out, Proj::c, g_c(yc));
  if (L.nu() > 0) assign(L, out, Proj::u, A_u(yc) * project(L, y, Proj::u));
  return out;
}

BlockVector evaluate_normal_form(const NormalForm& nf, const Vec& y) { return BlockVector(nf.layout, nf.eval(y)); }

ConjugacyChain::ConjugacyChain(Pipeline P, LinearizationConfig cfg)
    : P_(std::move(P)),
      cfg_(cfg),
      L_(P_.F->layout()),
      chart_(*P_.F, P_.F->structure(), cfg.lp),
      cocycle_(unstable_cocycle(*P_.FT)),
      preserves_u_(P_.S->preserves_u()),
      identity_on_cs_(P_.S->identity_on_cs()) {
  transfer_ = std::make_unique<TransferField>(cocycle_, L_, cfg.transfer_tol, cfg.transfer_horizon);
  if (cfg.calibrate && L_.nu() > 0) transfer_->calibrate();
}

Vec ConjugacyChain::g(const Vec& y_cs) const { return cocycle_.g(y_cs); }
Vec ConjugacyChain::g_inv(const Vec& y_cs) const { return cocycle_.ginv(y_cs); }
Mat ConjugacyChain::A_u(const Vec& y_cs) const { return cocycle_.A(y_cs); }

Mat ConjugacyChain::A_s(const Vec& y_c) const {
  const Vec x = embed(L_, y_c, Proj::c);
  const auto si = L_.indices(Proj::s);
  const Mat J = FT().jacobian_columns(x, si);
  Mat out(static_cast<Eigen::Index>(si.size()), J.cols());
  for (size_t i = 0; i < si.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = J.row(si[i]);
  return out;
}

Vec ConjugacyChain::g_c(const Vec& y_c) const {
  return project(L_, FT().eval(embed(L_, y_c, Proj::c)), Proj::c);
}

Mat ConjugacyChain::Pu(const Vec& y_cs) const {
  if (L_.nu() == 0) return Mat(0, 0);
  std::vector<double> key(y_cs.data(), y_cs.data() + y_cs.size());
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = pu_cache_.find(key);
    if (it != pu_cache_.end()) return it->second;
  }
  Mat P = transfer_->Pu(y_cs);
  std::lock_guard<std::mutex> lock(mu_);
  if (pu_cache_.size() > 200000) pu_cache_.clear();
  pu_cache_.emplace(key, P);
  return P;
}

Vec ConjugacyChain::to_F(const Vec& y) const {
  if (identity_on_cs_ && on_cs(L_, y)) return y;
  return P_.S->inverse(y);
}

Vec ConjugacyChain::to_T(const Vec& x) const {
  if (identity_on_cs_ && on_cs(L_, x)) return x;
  return P_.S->forward(x);
}

Vec ConjugacyChain::leaf_in_F(const Vec& y_cs, const Vec& v) const {
  const Vec b = to_F(embed(L_, y_cs, Proj::cs));
  if (L_.nu() == 0) return b;
  if (preserves_u_) return chart_.leaf_point(b, v);
  Vec z = v;
  for (int it = 0; it < 100; ++it) {
    const Vec p = chart_.leaf_point(b, z);
    const Vec e = v - project(L_, P_.S->forward(p), Proj::u);
    if (e.lpNorm<Eigen::Infinity>() <= 4 * kEps * std::max(v.lpNorm<Eigen::Infinity>(), 1e-300)) return p;
    z += e;
  }
  throw NumericError("leaf point with prescribed u-coordinate did not converge");
}

namespace {

// F_hat coordinates of an F point: base of its F_T leaf on X_cs and its u-coordinate.
Vec hat_of_F_point(const Layout& L, const FoliationChart& chart, const Transform& S, bool preserves_u,
                   bool identity_on_cs, const Vec& x) {
  if (L.nu() == 0) return S.forward(x);
  auto toT = [&](const Vec& p) { return identity_on_cs && on_cs(L, p) ? p : S.forward(p); };
  Vec v = Vec::Zero(L.nu());
  Vec q = chart.leaf_point(x, v);
  if (!preserves_u) {
    for (int it = 0; it < 100; ++it) {
      const Vec e = project(L, toT(q), Proj::u);
      if (e.lpNorm<Eigen::Infinity>() <= 1e-15) break;
      v -= e;
      q = chart.leaf_point(x, v);
    }
  }
  const Vec base = toT(q);
  const Vec u = preserves_u ? project(L, x, Proj::u) : project(L, S.forward(x), Proj::u);
  return join(L, project(L, base, Proj::cs), u);
}

}  // namespace

Vec ConjugacyChain::H(const Vec& x) const {
  return to_T(leaf_in_F(project(L_, x, Proj::cs), project(L_, x, Proj::u)));
}

Vec ConjugacyChain::H_inv(const Vec& y) const {
  const Vec x = on_cs(L_, y) && identity_on_cs_ ? y : P_.S->inverse(y);
  return hat_of_F_point(L_, chart_, *P_.S, preserves_u_, identity_on_cs_, x);
}

Vec ConjugacyChain::F_hat(const Vec& x) const {
  const Vec p = leaf_in_F(project(L_, x, Proj::cs), project(L_, x, Proj::u));
  return hat_of_F_point(L_, chart_, *P_.S, preserves_u_, identity_on_cs_, F().eval(p));
}

Vec ConjugacyChain::Theta(const Vec& x) const {
  if (L_.nu() == 0) return x;
  const Vec cs = project(L_, x, Proj::cs);
  return join(L_, cs, Pu(cs) * project(L_, x, Proj::u));
}

Vec ConjugacyChain::Theta_inv(const Vec& x) const {
  if (L_.nu() == 0) return x;
  const Vec cs = project(L_, x, Proj::cs);
  return join(L_, cs, Pu(cs).partialPivLu().solve(project(L_, x, Proj::u)));
}

Vec ConjugacyChain::F_tilde(const Vec& x) const { return Theta(F_hat(Theta_inv(x))); }

Vec ConjugacyChain::fiber_step(const Vec& y_cs, const Vec& v) const {
  const Vec p = leaf_in_F(y_cs, Pu(y_cs).partialPivLu().solve(v));
  const Vec Fp = F().eval(p);
  const Vec u = preserves_u_ ? project(L_, Fp, Proj::u) : project(L_, P_.S->forward(Fp), Proj::u);
  return Pu(g(y_cs)) * u;
}

LimitValue ConjugacyChain::to_linear(const Vec& x) const {
  const Vec cs = project(L_, x, Proj::cs);
  const Vec xu = project(L_, x, Proj::u);
  if (L_.nu() == 0 || xu.isZero(0)) return {x, 0, 0, std::numeric_limits<double>::quiet_NaN(), true, {}};
  return to_linear_from(cs, leaf_in_F(cs, Pu(cs).partialPivLu().solve(xu)));
}

LimitValue ConjugacyChain::to_linear_from(const Vec& x_cs, const Vec& w0) const {
  // P_u(x_cs) lim A_u(g^{-1}x)...A_u(g^{-n}x) pi_u F^{-n}(w0)
  const Mat P0 = Pu(x_cs);
  Vec y = x_cs, w = w0;
  Mat prod = Mat::Identity(L_.nu(), L_.nu());
  Vec prev = P0 * (preserves_u_ ? project(L_, w, Proj::u) : project(L_, P_.S->forward(w), Proj::u));
  std::vector<double> diffs;
  LimitValue out;
  int quiet = 0;
  for (int k = 1; k <= cfg_.max_steps; ++k) {
    w = F().inverse(w);
    y = g_inv(y);
    prod = prod * A_u(y);
    const Vec u = preserves_u_ ? project(L_, w, Proj::u) : project(L_, P_.S->forward(w), Proj::u);
    const Vec est = P0 * (prod * u);
    const double d = (est - prev).norm();
    diffs.push_back(d);
    prev = est;
    out.steps = k;
    out.last_diff = d;
    quiet = d <= cfg_.tol * std::max(est.norm(), 1e-300) ? quiet + 1 : 0;
    if (k >= cfg_.first_steps && quiet >= 2) {
      out.converged = true;
      break;
    }
  }
  out.value = join(L_, x_cs, prev);
  out.cauchy_ratio = cauchy_ratio(diffs, 1e3 * kEps * std::max(prev.norm(), 1e-300));
  out.diffs = std::move(diffs);
  return out;
}

LimitValue ConjugacyChain::from_linear(const Vec& y) const { return from_linear_point(y, nullptr); }

LimitValue ConjugacyChain::from_linear_point(const Vec& y, Vec* f_point) const {
  // P_u(y_cs) lim pi_u F^n(leaf point over g^{-n} y_cs with fiber coordinate
  // A_u(g^{-n}y)^{-1}...A_u(g^{-1}y)^{-1} P_u(y_cs)^{-1} y_u)
  const Vec cs = project(L_, y, Proj::cs);
  const Vec yu = project(L_, y, Proj::u);
  if (L_.nu() == 0 || yu.isZero(0)) {
    if (f_point) *f_point = to_F(embed(L_, cs, Proj::cs));
    return {y, 0, 0, std::numeric_limits<double>::quiet_NaN(), true, {}};
  }
  const Mat P0 = Pu(cs);
  const Vec v0 = P0.partialPivLu().solve(yu);
  std::vector<Vec> base{cs};
  Mat prod = Mat::Identity(L_.nu(), L_.nu());
  std::vector<double> diffs;
  Vec prev;
  LimitValue out;
  for (int n = cfg_.first_steps; n <= cfg_.max_steps; n += cfg_.step) {
    while (static_cast<int>(base.size()) <= n) {
      base.push_back(g_inv(base.back()));
      prod = prod * A_u(base.back());
    }
    Vec q = leaf_in_F(base[static_cast<size_t>(n)], prod.partialPivLu().solve(v0));
    for (int k = 0; k < n; ++k) q = F().eval(q);
    const Vec u = preserves_u_ ? project(L_, q, Proj::u) : project(L_, P_.S->forward(q), Proj::u);
    const Vec est = P0 * u;
    out.steps = n;
    if (prev.size() > 0) {
      const double d = (est - prev).norm();
      diffs.push_back(d);
      out.last_diff = d;
      if (d <= cfg_.tol * std::max(est.norm(), 1e-300)) {
        prev = est;
        out.converged = true;
        break;
      }
    }
    prev = est;
  }
  out.value = join(L_, cs, prev);
  const double r = cauchy_ratio(diffs, 1e3 * kEps * std::max(prev.norm(), 1e-300));
  out.cauchy_ratio = std::isnan(r) ? r : std::pow(r, 1.0 / cfg_.step);
  if (f_point) *f_point = leaf_in_F(cs, P0.partialPivLu().solve(prev));
  return out;
}

LimitValue ConjugacyChain::psi_inv_limit(const Vec& x_cs) const { return psi_inv_from(x_cs); }

LimitValue ConjugacyChain::psi_inv_from(const Vec& x_cs) const {
  // lim A_s(c_0)^{-1}...A_s(c_{n-1})^{-1} pi_s g^n(x_cs), c_k = g_c^k(x_c)
  const int ns = L_.ns(), nc = L_.nc();
  const Vec xs = x_cs.head(ns);
  if (ns == 0 || xs.isZero(0)) return {x_cs, 0, 0, std::numeric_limits<double>::quiet_NaN(), true, {}};
  Vec z = x_cs;
  Vec c = x_cs.tail(nc);
  Mat prod = Mat::Identity(ns, ns);
  Vec prev = xs;
  std::vector<double> diffs;
  LimitValue out;
  int quiet = 0;
  for (int k = 1; k <= cfg_.max_steps; ++k) {
    prod = A_s(c) * prod;
    z = g(z);
    c = nc > 0 ? g_c(c) : c;
    const Vec est = prod.partialPivLu().solve(z.head(ns));
    const double d = (est - prev).norm();
    diffs.push_back(d);
    prev = est;
    out.steps = k;
    out.last_diff = d;
    quiet = d <= cfg_.tol * std::max(est.norm(), 1e-300) ? quiet + 1 : 0;
    if (k >= cfg_.first_steps && quiet >= 2) {
      out.converged = true;
      break;
    }
  }
  out.value = x_cs;
  out.value.head(ns) = prev;
  out.cauchy_ratio = cauchy_ratio(diffs, 1e3 * kEps * std::max(prev.norm(), 1e-300));
  return out;
}

LimitValue ConjugacyChain::psi_limit(const Vec& y_cs) const {
  // fiberwise inversion of psi^{-1}, whose derivative is close to the identity
  const int ns = L_.ns();
  const Vec ys = y_cs.head(ns);
  if (ns == 0 || ys.isZero(0)) return {y_cs, 0, 0, std::numeric_limits<double>::quiet_NaN(), true, {}};
  Vec x = y_cs;
  LimitValue out;
  std::vector<double> diffs;
  for (int it = 1; it <= 100; ++it) {
    const LimitValue r = psi_inv_from(x);
    const Vec e = r.value.head(ns) - ys;
    x.head(ns) -= e;
    const double d = e.norm();
    diffs.push_back(d);
    out.steps = it;
    out.last_diff = d;
    if (d <= 4 * cfg_.tol * std::max(ys.norm(), 1e-300)) {
      out.converged = true;
      break;
    }
  }
  out.value = x;
  out.cauchy_ratio = cauchy_ratio(diffs, 1e3 * kEps * std::max(ys.norm(), 1e-300));
  return out;
}

Vec ConjugacyChain::conj(const Vec& y) const {
  const Vec cs = psi(project(L_, y, Proj::cs));
  Vec q;
  from_linear_point(join(L_, cs, project(L_, y, Proj::u)), &q);
  return q;
}

Vec ConjugacyChain::conj_inv(const Vec& x) const {
  const Vec hat = hat_of_F_point(L_, chart_, *P_.S, preserves_u_, identity_on_cs_, x);
  const Vec cs = project(L_, hat, Proj::cs);
  Vec lin = hat;
  if (L_.nu() > 0 && !project(L_, hat, Proj::u).isZero(0)) lin = to_linear_from(cs, x).value;
  assign(L_, lin, Proj::cs, psi_inv(cs));
  return lin;
}

NormalForm ConjugacyChain::normal_form() const {
  NormalForm nf;
  nf.layout = L_;
  nf.A_s = [this](const Vec& y_c) { return A_s(y_c); };
  nf.g_c = [this](const Vec& y_c) { return g_c(y_c); };
  nf.A_u = [this](const Vec& y_c) { return A_u(embed(L_, y_c, Proj::c).head(L_.ns() + L_.nc())); };
  return nf;
}

// ---- weak-unstable straightening

WeakUnstableStraightening::WeakUnstableStraightening(const ConjugacyChain& chain, int boundary, LPConfig cfg)
    : chain_(&chain), boundary_(boundary), cfg_(cfg) {
  const Layout& L = chain.layout();
  const int m = static_cast<int>(L.unstable.size());
  if (m < 2) throw ConfigError("weak-unstable straightening: window empty / not applicable (one unstable block)");
  if (boundary < 1 || boundary >= m) throw ConfigError("weak-unstable straightening: block boundary out of range");
  const auto mod = chain.structure().unstable_moduli();
  double slow = 0, fast = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) {
    if (j < boundary) {
      slow = std::max(slow, mod[static_cast<size_t>(j)]);
      nslow_ += L.unstable[static_cast<size_t>(j)];
    } else {
      fast = std::min(fast, mod[static_cast<size_t>(j)]);
    }
  }
  const double vs = chain.structure().varsigma;
  window_ = {slow + vs, fast - vs};
  if (!(window_.first < window_.second)) throw ConfigError("weak-unstable straightening: window empty");
  if (cfg_.rho == 0) {
    rho_ = log_midpoint(window_);
  } else {
    if (!(cfg_.rho > window_.first && cfg_.rho < window_.second))
      throw ConfigError("weak-unstable straightening: rho outside the window");
    rho_ = cfg_.rho;
  }
}

WeightedSequence WeakUnstableStraightening::solve(const Vec& y_cs, const Vec& v_slow) const {
  const Layout& L = chain_->layout();
  const int nu = L.nu(), N = cfg_.N;
  std::vector<Vec> base{y_cs};
  std::vector<Mat> lin;
  for (int k = 0; k < N; ++k) {
    Vec c = base.back();
    c.head(L.ns()).setZero();
    lin.push_back(chain_->A_u(c));
    base.push_back(chain_->g(base.back()));
  }
  LPProblem p;
  p.lo = 0;
  p.hi = N;
  p.sweep.assign(static_cast<size_t>(nu), Sweep::backward);
  for (int i = 0; i < nslow_; ++i) p.sweep[static_cast<size_t>(i)] = Sweep::forward;
  p.boundary = Vec::Zero(nu);
  p.boundary.head(nslow_) = v_slow;
  p.M = lin;
  p.remainder = [&](int k, const Vec& q) -> Vec {
    if (q.isZero(0)) return Vec::Zero(nu);
    return chain_->fiber_step(base[static_cast<size_t>(k)], q) - lin[static_cast<size_t>(k)] * q;
  };
  p.rho = rho_;
  return solve_lp(p, cfg_.tol, cfg_.max_iter);
}

Vec WeakUnstableStraightening::leaf(const Vec& y_cs, const Vec& v_slow) const {
  const int nu = chain_->layout().nu();
  return solve(y_cs, v_slow).at(0).tail(nu - nslow_);
}

Vec WeakUnstableStraightening::forward(const Vec& x) const {
  const Layout& L = chain_->layout();
  const Vec cs = project(L, x, Proj::cs);
  Vec u = project(L, x, Proj::u);
  u.tail(L.nu() - nslow_) -= leaf(cs, u.head(nslow_));
  return join(L, cs, u);
}

Vec WeakUnstableStraightening::inverse(const Vec& y) const {
  const Layout& L = chain_->layout();
  const Vec cs = project(L, y, Proj::cs);
  Vec u = project(L, y, Proj::u);
  u.tail(L.nu() - nslow_) += leaf(cs, u.head(nslow_));
  return join(L, cs, u);
}

double WeakUnstableStraightening::growth(const Vec& y_cs, const Vec& v, int horizon) const {
  const double n0 = v.norm();
  if (n0 == 0) return 0;
  Vec b = y_cs, w = v;
  double worst = 1;
  for (int n = 1; n <= horizon; ++n) {
    w = chain_->fiber_step(b, w);
    b = chain_->g(b);
    worst = std::max(worst, w.norm() / (std::pow(rho_, n) * n0));
  }
  return worst;
}

}  // namespace phlin
