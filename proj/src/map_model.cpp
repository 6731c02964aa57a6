#include "phlin/map_model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace phlin {

Layout SpectralStructure::layout() const {
  Layout L;
  int stage = 0;  // 0 stable, 1 center, 2 unstable
  for (const auto& b : blocks) {
    if (b.size <= 0) throw ConfigError("block size must be positive");
    switch (b.cls) {
      case BlockClass::stable:
        if (stage > 0) throw ConfigError("stable blocks must precede center and unstable blocks");
        L.stable.push_back(b.size);
        break;
      case BlockClass::center:
        if (stage > 1) throw ConfigError("center block must precede unstable blocks");
        stage = 1;
        L.center += b.size;
        break;
      case BlockClass::unstable:
        stage = 2;
        L.unstable.push_back(b.size);
        break;
    }
  }
  return L;
}

std::vector<double> SpectralStructure::stable_moduli() const {
  std::vector<double> v;
  for (const auto& b : blocks)
    if (b.cls == BlockClass::stable) v.push_back(b.modulus);
  return v;
}

std::vector<double> SpectralStructure::unstable_moduli() const {
  std::vector<double> v;
  for (const auto& b : blocks)
    if (b.cls == BlockClass::unstable) v.push_back(b.modulus);
  return v;
}

void ValidationReport::fail(const std::string& what) {
  ok = false;
  violations.push_back(what);
}

namespace {
std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}
}  // namespace

ValidationReport validate_structure(const SpectralStructure& st, bool allow_stable_only) {
  ValidationReport rep;
  Layout L;
  try {
    L = st.layout();
  } catch (const ConfigError& e) {
    rep.fail(e.what());
    return rep;
  }
  const auto ls = st.stable_moduli();
  const auto lu = st.unstable_moduli();
  const bool stable_only = L.nc() == 0 && lu.empty();
  if (ls.empty()) rep.fail("no stable block (need k >= 1)");
  if (!(stable_only && allow_stable_only)) {
    if (L.nc() == 0) rep.fail("no center block");
    if (lu.empty()) rep.fail("no unstable block (need p > k)");
  }
  if (!(st.ls_minus > 0)) rep.fail("lambda_s^- = " + num(st.ls_minus) + " must be > 0");
  if (!ls.empty()) {
    if (!(st.ls_minus < ls.front()))
      rep.fail("lambda_s^- = " + num(st.ls_minus) + " !< lambda_1 = " + num(ls.front()));
    for (size_t i = 1; i < ls.size(); ++i)
      if (!(ls[i - 1] < ls[i]))
        rep.fail("stable moduli not increasing: " + num(ls[i - 1]) + " !< " + num(ls[i]));
    if (!(ls.back() < st.ls_plus))
      rep.fail("lambda_k = " + num(ls.back()) + " !< lambda_s^+ = " + num(st.ls_plus));
  }
  if (!(st.ls_plus < 1.0)) rep.fail("lambda_s^+ = " + num(st.ls_plus) + " !< 1");
  if (!lu.empty()) {
    if (!(1.0 < st.lu_minus)) rep.fail("lambda_u^- = " + num(st.lu_minus) + " !> 1");
    if (!(st.lu_minus < lu.front()))
      rep.fail("lambda_u^- = " + num(st.lu_minus) + " !< lambda_{k+1} = " + num(lu.front()));
    for (size_t i = 1; i < lu.size(); ++i)
      if (!(lu[i - 1] < lu[i]))
        rep.fail("unstable moduli not increasing: " + num(lu[i - 1]) + " !< " + num(lu[i]));
    if (!(lu.back() < st.lu_plus))
      rep.fail("lambda_p = " + num(lu.back()) + " !< lambda_u^+ = " + num(st.lu_plus));
    if (lu.front() < 1.0)
      rep.fail("unstable block with lambda_{k+1} = " + num(lu.front()) + " < 1");
  }
  for (const auto& b : st.blocks)
    if (b.cls == BlockClass::center && std::abs(b.modulus - 1.0) > 1e-14)
      rep.fail("center block modulus " + num(b.modulus) + " != 1");
  if (st.varsigma < 0) rep.fail("varsigma < 0");
  if (st.K < 1) rep.fail("K < 1");
  return rep;
}

Mat DynMap::jacobian(const Vec& x) const {
  return fd_jacobian([this](const Vec& z) { return eval(z); }, x);
}

Mat DynMap::jacobian_columns(const Vec& x, const std::vector<int>& dirs) const {
  const Mat J = jacobian(x);
  Mat out(J.rows(), static_cast<Eigen::Index>(dirs.size()));
  for (size_t j = 0; j < dirs.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = J.col(dirs[j]);
  return out;
}

Vec DynMap::inverse(const Vec& y) const { return newton_inverse(*this, y); }

Mat DynMap::unstable_block(const Vec& x) const {
  const Layout& L = layout();
  const auto u = L.indices(Proj::u);
  const Mat J = jacobian_columns(x, u);
  Mat out(static_cast<Eigen::Index>(u.size()), J.cols());
  for (size_t i = 0; i < u.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = J.row(u[i]);
  return out;
}

Vec newton_inverse(const DynMap& F, const Vec& y, double tol, int max_iter) {
  const Mat& A = F.linear_part();
  Vec x = A.partialPivLu().solve(y);
  Vec r = F.eval(x) - y;
  double rn = r.norm();
  const double scale = std::max(1.0, y.norm());
  for (int it = 0; it < max_iter; ++it) {
    if (rn == 0.0) break;
    const Vec dx = F.jacobian(x).partialPivLu().solve(r);
    double t = 1.0;
    Vec xn = x - dx;
    Vec rnew = F.eval(xn) - y;
    while (rnew.norm() > rn && t > 1e-6) {
      t *= 0.5;
      xn = x - t * dx;
      rnew = F.eval(xn) - y;
    }
    if (!(rnew.norm() < rn)) break;
    const bool tiny = dx.norm() * t <= 4e-16 * std::max(1.0, x.norm());
    x = xn;
    r = rnew;
    rn = r.norm();
    if (tiny) break;
  }
  if (!(rn <= tol * scale) || !x.allFinite())
    throw NumericError("F^{-1}: Newton did not converge (residual " + num(rn) + ")");
  return x;
}

namespace {

Vec poly_eval(const std::vector<PolyTerm>& terms, const Layout& L, double R, const Vec& x) {
  Vec out = Vec::Zero(L.dim());
  for (const auto& t : terms) {
    double m = t.value, r2 = 0;
    for (int j = 0; j < L.dim(); ++j) {
      const int e = t.exponents[j];
      if (e == 0) continue;
      m *= std::pow(x(j), e);
      r2 += x(j) * x(j);
    }
    out(t.target) += m * smooth_cutoff(std::sqrt(r2), R);
  }
  return out;
}

Mat poly_jac(const std::vector<PolyTerm>& terms, const Layout& L, double R, const Vec& x) {
  const int d = L.dim();
  Mat J = Mat::Zero(d, d);
  for (const auto& t : terms) {
    double r2 = 0, m = t.value;
    for (int j = 0; j < d; ++j)
      if (t.exponents[j] > 0) {
        r2 += x(j) * x(j);
        m *= std::pow(x(j), t.exponents[j]);
      }
    const double r = std::sqrt(r2);
    const double rho = smooth_cutoff(r, R);
    const double drho = smooth_cutoff_deriv(r, R);
    for (int j = 0; j < d; ++j) {
      const int e = t.exponents[j];
      if (e == 0) continue;
      double dm = t.value * e * std::pow(x(j), e - 1);
      for (int i = 0; i < d; ++i)
        if (i != j && t.exponents[i] > 0) dm *= std::pow(x(i), t.exponents[i]);
      double val = dm * rho;
      if (drho != 0.0 && r > 0) val += m * drho * x(j) / r;
      J(t.target, j) += val;
    }
  }
  return J;
}

}  // namespace

Vec MapModel::eval(const Vec& x) const {
  if (x.size() != layout_.dim()) throw ConfigError("dimension mismatch in evaluate_map");
  Vec y = A_ * x + f_(x);
  if (!y.allFinite()) throw NumericError("non-finite map value: invalid nonlinearity");
  return y;
}

Vec MapModel::inverse(const Vec& y) const {
  const Vec x0 = newton_inverse(*this, y);
  Vec x = x0;
  const Layout& L = layout_;
  if (L.nc() + L.nu() == 0) return x;
  const Mat Acu = sub_block(L, A_, Proj::cu, Proj::cu);
  const Vec ycu = project(L, y, Proj::cu);
  const Eigen::PartialPivLU<Mat> lu(Acu);
  for (int it = 0; it < 20; ++it) {
    const Vec next = lu.solve(ycu - project(L, nonlinearity(x), Proj::cu));
    const Vec old = project(L, x, Proj::cu);
    assign(L, x, Proj::cu, next);
    if ((next - old).lpNorm<Eigen::Infinity>() <= 1e-16 * next.lpNorm<Eigen::Infinity>()) break;
  }
  auto res = [&](const Vec& v) { return project(L, eval(v) - y, Proj::cu).lpNorm<Eigen::Infinity>(); };
  if (!x.allFinite() || res(x) > res(x0)) return x0;
  return x;
}

Mat MapModel::jacobian(const Vec& x) const {
  if (df_) return A_ + df_(x);
  return DynMap::jacobian(x);
}

Vec MapModel::nonlinearity(const Vec& x) const { return f_(x); }

Mat MapModel::nonlinearity_jacobian(const Vec& x) const {
  if (df_) return df_(x);
  return fd_jacobian(f_, x);
}

MapModel MapModel::polynomial(std::string name, SpectralStructure st, std::vector<PolyTerm> terms,
                              double alpha, double delta_f, double M, double radius,
                              NormalizationFlags flags) {
  MapModel m;
  m.name_ = std::move(name);
  m.structure_ = std::move(st);
  m.layout_ = m.structure_.layout();
  const int d = m.layout_.dim();
  for (auto& t : terms) {
    if (t.target < 0 || t.target >= d) throw ConfigError("term target out of range");
    if (static_cast<int>(t.exponents.size()) != d) throw ConfigError("term exponent count != dims");
    int deg = 0;
    for (int e : t.exponents) {
      if (e < 0) throw ConfigError("negative exponent");
      deg += e;
    }
    if (deg < 2) throw ConfigError("polynomial terms must have degree >= 2 so that Df(0) = 0");
  }
  m.terms_ = std::move(terms);
  m.polynomial_ = true;
  m.A_ = Mat::Zero(d, d);
  int off = 0;
  for (const auto& b : m.structure_.blocks) {
    for (int i = 0; i < b.size; ++i) m.A_(off + i, off + i) = b.modulus;
    off += b.size;
  }
  m.alpha_ = alpha;
  m.delta_f_ = delta_f;
  m.M_ = M;
  m.radius_ = radius;
  m.flags_ = flags;
  const auto T = m.terms_;
  const Layout L = m.layout_;
  m.f_ = [T, L, radius](const Vec& x) { return poly_eval(T, L, radius, x); };
  m.df_ = [T, L, radius](const Vec& x) { return poly_jac(T, L, radius, x); };
  return m;
}

MapModel MapModel::general(std::string name, SpectralStructure st, VecFn f, MatFn df, double alpha,
                           double delta_f, double M, double radius, NormalizationFlags flags) {
  MapModel m;
  m.name_ = std::move(name);
  m.structure_ = std::move(st);
  m.layout_ = m.structure_.layout();
  const int d = m.layout_.dim();
  m.A_ = Mat::Zero(d, d);
  int off = 0;
  for (const auto& b : m.structure_.blocks) {
    for (int i = 0; i < b.size; ++i) m.A_(off + i, off + i) = b.modulus;
    off += b.size;
  }
  m.f_ = std::move(f);
  m.df_ = std::move(df);
  m.alpha_ = alpha;
  m.delta_f_ = delta_f;
  m.M_ = M;
  m.radius_ = radius;
  m.flags_ = flags;
  return m;
}

MapModel MapModel::with_terms(std::string name, std::vector<PolyTerm> extra,
                              NormalizationFlags flags) const {
  if (!polynomial_) throw ConfigError("with_terms needs a polynomial model");
  auto t = terms_;
  t.insert(t.end(), extra.begin(), extra.end());
  return polynomial(std::move(name), structure_, std::move(t), alpha_, delta_f_, M_, radius_, flags);
}

PolyTerm term(int target, std::vector<int> exponents, const std::string& coefficient) {
  PolyTerm t;
  t.target = target;
  t.exponents = std::move(exponents);
  t.coefficient = coefficient;
  t.value = std::stod(coefficient);
  return t;
}

ValidationReport validate_spectral_gaps(const SpectralStructure& st, const MapModel& model,
                                        int samples, unsigned seed) {
  ValidationReport rep = validate_structure(st, true);
  const Layout& L = model.layout();
  if (!(L == st.layout())) {
    rep.fail("model layout does not match the structure");
    return rep;
  }
  // eigenvalue moduli of each block of A
  const Mat& A = model.linear_part();
  int off = 0;
  for (const auto& b : st.blocks) {
    const Mat Ab = A.block(off, off, b.size, b.size);
    const Eigen::VectorXcd ev = Ab.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const double mod = std::abs(ev(i));
      if (std::abs(mod - b.modulus) > 1e-12)
        rep.fail("eigenvalue modulus " + num(mod) + " of a block declared at " + num(b.modulus));
    }
    off += b.size;
  }
  std::mt19937_64 rng(seed);
  const double R = model.radius() > 0 ? model.radius() : 1.0;
  std::uniform_real_distribution<double> U(-R, R);
  const int d = L.dim();
  double dmax = 0, Mmax = 0;
  auto block_check = [&](const Mat& J) {
    int o = 0;
    for (const auto& b : st.blocks) {
      const Mat Jb = J.block(o, o, b.size, b.size);
      const auto sv = Jb.jacobiSvd().singularValues();
      const double smax = sv(0), smin = sv(sv.size() - 1);
      if (b.cls == BlockClass::stable) {
        if (!(smax < st.ls_plus)) rep.fail("stable block norm " + num(smax) + " >= lambda_s^+");
        if (!(smin > st.ls_minus)) rep.fail("stable block conorm " + num(smin) + " <= lambda_s^-");
      } else if (b.cls == BlockClass::unstable) {
        if (!(smin > st.lu_minus)) rep.fail("unstable block conorm " + num(smin) + " <= lambda_u^-");
        if (!(smax < st.lu_plus)) rep.fail("unstable block norm " + num(smax) + " >= lambda_u^+");
      } else {
        if (smax > 1.0 + st.varsigma || smin < 1.0 - st.varsigma)
          rep.fail("center block singular values [" + num(smin) + ", " + num(smax) +
                   "] outside [1-varsigma, 1+varsigma]");
      }
      o += b.size;
    }
  };
  for (int i = 0; i < samples; ++i) {
    Vec x(d), y(d);
    for (int j = 0; j < d; ++j) x(j) = U(rng);
    for (int j = 0; j < d; ++j) y(j) = U(rng);
    const Mat Dx = model.nonlinearity_jacobian(x);
    const Mat Dy = model.nonlinearity_jacobian(y);
    dmax = std::max(dmax, Dx.jacobiSvd().singularValues()(0));
    const double q = (Dx - Dy).jacobiSvd().singularValues()(0) / std::pow((x - y).norm(), model.alpha());
    Mmax = std::max(Mmax, q);
    if (rep.violations.size() < 20) block_check(A + Dx);
  }
  rep.sampled_delta_f = dmax;
  rep.sampled_holder_M = Mmax;
  if (dmax > model.delta_f() * (1 + 1e-12))
    rep.fail("sampled |Df| = " + num(dmax) + " exceeds declared delta_f = " + num(model.delta_f()));
  if (model.holder_M() > 0 && Mmax > model.holder_M() * (1 + 1e-12))
    rep.fail("sampled Hoelder quotient " + num(Mmax) + " exceeds declared M = " + num(model.holder_M()));
  // Df(0) = 0 by finite differences
  const Vec z = Vec::Zero(d);
  if (model.nonlinearity(z).norm() != 0.0) rep.fail("f(0) != 0");
  const Mat D0 = model.has_analytic_jacobian()
                     ? model.nonlinearity_jacobian(z)
                     : fd_jacobian([&](const Vec& v) { return model.nonlinearity(v); }, z);
  const double h = fd_step(z);
  if (D0.norm() > 10 * h * h) rep.fail("Df(0) != 0 (|Df(0)| = " + num(D0.norm()) + ")");
  rep.notes.push_back("delta_f sufficiency is sampled, not certified");
  return rep;
}

namespace {

std::vector<Vec> subspace_grid(const Layout& L, Proj p, double box, int n) {
  const auto idx = L.indices(p);
  std::vector<Vec> pts;
  const int m = static_cast<int>(idx.size());
  if (m == 0) return pts;
  std::vector<int> ctr(m, 0);
  while (true) {
    Vec x = Vec::Zero(L.dim());
    for (int j = 0; j < m; ++j) x(idx[j]) = n == 1 ? 0.0 : -box + 2 * box * ctr[j] / (n - 1);
    pts.push_back(x);
    int j = 0;
    while (j < m && ++ctr[j] == n) ctr[j++] = 0;
    if (j == m) break;
  }
  return pts;
}

}  // namespace

std::vector<FlagCheck> check_flags(const MapModel& model, double box, int n) {
  const Layout& L = model.layout();
  std::vector<FlagCheck> out;
  const auto& fl = model.flags();
  double r = 0;
  for (const auto& x : subspace_grid(L, Proj::c, box, n))
    r = std::max(r, project(L, model.eval(x), Proj::su).cwiseAbs().maxCoeff());
  out.push_back({"center_manifold", fl.center_manifold, r});
  r = 0;
  for (const auto& x : subspace_grid(L, Proj::c, box, n)) {
    const Mat J = model.jacobian(x);
    for (Proj a : {Proj::s, Proj::c, Proj::u})
      for (Proj b : {Proj::s, Proj::c, Proj::u})
        if (a != b) {
          const Mat blk = sub_block(L, J, a, b);
          if (blk.size()) r = std::max(r, blk.cwiseAbs().maxCoeff());
        }
  }
  out.push_back({"block_diag_center", fl.block_diag_center, r});
  r = 0;
  for (const auto& x : subspace_grid(L, Proj::cs, box, n))
    if (L.nu()) r = std::max(r, project(L, model.eval(x), Proj::u).cwiseAbs().maxCoeff());
  out.push_back({"cs_invariant", fl.cs_invariant, r});
  r = 0;
  for (const auto& x : subspace_grid(L, Proj::cu, box, n))
    if (L.ns()) r = std::max(r, project(L, model.eval(x), Proj::s).cwiseAbs().maxCoeff());
  out.push_back({"cu_invariant", fl.cu_invariant, r});
  r = 0;
  for (const auto& x : subspace_grid(L, Proj::cs, box, n)) {
    const Vec xc = embed(L, project(L, x, Proj::c), Proj::c);
    if (L.nc())
      r = std::max(r, (project(L, model.eval(x), Proj::c) - project(L, model.eval(xc), Proj::c))
                          .cwiseAbs()
                          .maxCoeff());
  }
  out.push_back({"stable_flat", fl.stable_flat, r});
  return out;
}

}  // namespace phlin
