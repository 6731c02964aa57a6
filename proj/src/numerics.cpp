#include "phlin/numerics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace phlin {

double fd_step(const Vec& x) {
  static const double e3 = std::cbrt(std::numeric_limits<double>::epsilon());
  return e3 * std::max(1.0, x.norm());
}

Mat fd_jacobian(const VecFn& f, const Vec& x) {
  std::vector<int> dirs(static_cast<size_t>(x.size()));
  for (int i = 0; i < x.size(); ++i) dirs[i] = i;
  return fd_partial(f, x, dirs);
}

Mat fd_partial(const VecFn& f, const Vec& x, const std::vector<int>& dirs) {
  const double h = fd_step(x);
  Mat J;
  for (size_t j = 0; j < dirs.size(); ++j) {
    Vec xp = x, xm = x;
    xp(dirs[j]) += h;
    xm(dirs[j]) -= h;
    Vec d = (f(xp) - f(xm)) / (2.0 * h);
    if (J.size() == 0) J.resize(d.size(), static_cast<Eigen::Index>(dirs.size()));
    J.col(static_cast<Eigen::Index>(j)) = d;
  }
  return J;
}

SlopeFit fit_loglog(const std::vector<double>& t, const std::vector<double>& r, double floor) {
  SlopeFit out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < t.size() && i < r.size(); ++i) {
    if (!(r[i] > floor) || !(t[i] > 0) || !std::isfinite(r[i])) continue;
    const double X = std::log(t[i]), Y = std::log(r[i]);
    sx += X; sy += Y; sxx += X * X; sxy += X * Y;
    ++n;
  }
  out.used = n;
  if (n < 2) return out;
  const double den = n * sxx - sx * sx;
  if (std::abs(den) < 1e-300) return out;
  out.slope = (n * sxy - sx * sy) / den;
  out.intercept = (sy - out.slope * sx) / n;
  out.available = true;
  return out;
}

double subspace_distance(const Mat& Q1, const Mat& Q2) {
  // max over unit v in E1 of dist(v, E2) is the norm of (I - Q2 Q2^T) Q1
  const Mat P2 = Q2 * Q2.transpose();
  const Mat P1 = Q1 * Q1.transpose();
  const Eigen::Index n = Q1.rows();
  const double a = ((Mat::Identity(n, n) - P2) * Q1).norm() > 0
                       ? ((Mat::Identity(n, n) - P2) * Q1).jacobiSvd().singularValues()(0)
                       : 0.0;
  const double b = ((Mat::Identity(n, n) - P1) * Q2).norm() > 0
                       ? ((Mat::Identity(n, n) - P1) * Q2).jacobiSvd().singularValues()(0)
                       : 0.0;
  return std::max(a, b);
}

Mat orthonormalize(const Mat& V) {
  Mat Q = V;
  for (Eigen::Index j = 0; j < Q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < j; ++i) Q.col(j) -= Q.col(i).dot(Q.col(j)) * Q.col(i);
    const double nrm = Q.col(j).norm();
    if (!(nrm > 0) || !std::isfinite(nrm)) throw NumericError("degenerate frame in orthonormalization");
    Q.col(j) /= nrm;
  }
  return Q;
}

Vec fix_sign(const Vec& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  return v(imax) < 0 ? Vec(-v) : v;
}

double smooth_cutoff(double r, double R) {
  if (!(R > 0) || !std::isfinite(R)) return 1.0;
  if (r <= 0.5 * R) return 1.0;
  if (r >= R) return 0.0;
  const double t = (r - 0.5 * R) / (0.5 * R);
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

double smooth_cutoff_deriv(double r, double R) {
  if (!(R > 0) || !std::isfinite(R)) return 0.0;
  if (r <= 0.5 * R || r >= R) return 0.0;
  const double t = (r - 0.5 * R) / (0.5 * R);
  const double om = 1.0 - t * t;
  const double rho = std::exp(1.0 - 1.0 / om);
  return rho * (-2.0 * t / (om * om)) / (0.5 * R);
}

std::string fmt17(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> dyadic_scales(int jmin, int jmax) {
  std::vector<double> s;
  for (int j = jmin; j <= jmax; ++j) s.push_back(std::ldexp(1.0, -j));
  return s;
}

}  // namespace phlin
