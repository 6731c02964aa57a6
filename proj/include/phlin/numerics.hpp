#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "phlin/blocks.hpp"

namespace phlin {

using VecFn = std::function<Vec(const Vec&)>;
using MatFn = std::function<Mat(const Vec&)>;

// h = eps^{1/3} max(1, |x|)
double fd_step(const Vec& x);
Mat fd_jacobian(const VecFn& f, const Vec& x);
// Central differences in the listed coordinate directions only.
Mat fd_partial(const VecFn& f, const Vec& x, const std::vector<int>& dirs);

struct SlopeFit {
  bool available = false;
  double slope = 0.0;
  double intercept = 0.0;
  int used = 0;
};
// Least squares of log(r) against log(t), dropping r <= floor.
SlopeFit fit_loglog(const std::vector<double>& t, const std::vector<double>& r, double floor);

// Columns of Q orthonormal; gap distance between their spans.
double subspace_distance(const Mat& Q1, const Mat& Q2);
Mat orthonormalize(const Mat& V);
// Flip sign so the largest-magnitude coordinate of v is positive.
Vec fix_sign(const Vec& v);

double smooth_cutoff(double r, double R);
double smooth_cutoff_deriv(double r, double R);

// Shortest round-trip decimal with 17 significant digits.
std::string fmt17(double v);

std::vector<double> dyadic_scales(int jmin, int jmax);

}  // namespace phlin
