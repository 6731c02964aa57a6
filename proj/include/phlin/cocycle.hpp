#pragma once

#include <string>
#include <vector>

#include "phlin/map_model.hpp"

namespace phlin {

// Linear cocycle over an invertible base map. Base points and fiber vectors are
// given in the base and fiber coordinates (not embedded in R^d).
struct Cocycle {
  int base_dim = 0;
  int fiber_dim = 0;
  VecFn g;
  VecFn ginv;
  MatFn A;
  std::string name;
};

// Base X_c, generator DF(x_c) on all of R^d. F must outlive the cocycle.
Cocycle center_cocycle(const DynMap& F);
// Base X_cs, generator d(pi_u F)/dx_u at (x_cs, 0). Needs X_cs invariant.
Cocycle unstable_cocycle(const DynMap& F);

// Orbit b_n = g^n(b) for lo <= n <= hi with generators A(b_n).
struct Orbit {
  int lo = 0, hi = 0;
  std::vector<Vec> pts;
  std::vector<Mat> gen;
  const Vec& at(int n) const { return pts[static_cast<size_t>(n - lo)]; }
  const Mat& A(int n) const { return gen[static_cast<size_t>(n - lo)]; }
};
Orbit make_orbit(const Cocycle& c, const Vec& base, int lo, int hi);

// Three-case product: A(g^{m-1}b)...A(g^n b) for m > n, id for m = n, inverse otherwise.
Mat orbit_product(const Orbit& o, int m, int n);
Mat cocycle_product(const Cocycle& c, int m, int n, const Vec& base);

struct DichotomyEstimate {
  // empirical rates: (s-, s+), (c-, c+), (u-, u+)
  double s_minus = 0, s_plus = 0, c_minus = 0, c_plus = 0, u_minus = 0, u_plus = 0;
  double K = 1;  // smallest constant making the declared envelopes hold
  int samples = 0, horizon = 0;
  std::vector<std::string> violations;
};
// Sampled base points of X_c in [-box, box]^{n_c}; the generator is read blockwise.
DichotomyEstimate estimate_dichotomy(const DynMap& F, const SpectralStructure& st, int samples,
                                     int horizon, double box = 0.2, unsigned seed = 11);

struct SplittingField {
  Vec base;
  std::vector<Mat> frames;  // orthonormal frame of E_i in X_u coordinates, one per unstable block
  Mat V;                    // columns: the frames side by side
  double invariance_residual = 0;
  double condition = 1;
};

// E_i = (forward-pushed fast filtration) meets (backward-pulled slow filtration).
SplittingField compute_invariant_splitting(const Cocycle& c, const Layout& L, const Vec& x_cs,
                                           int horizon = 40);
// Splitting at g^k(x_cs), k = 0..n, from one long orbit.
std::vector<SplittingField> splitting_along_orbit(const Cocycle& c, const Layout& L, const Vec& x_cs,
                                                  int n, int horizon = 40);
double splitting_invariance_residual(const Cocycle& c, const SplittingField& here,
                                     const SplittingField& there);

// P_1 = V^{-1}: sends E_i to X_i.
Mat assemble_P1(const SplittingField& f);

struct BSeries {
  Mat B;
  int N = 0;
  double tail_bound = 0;
  double theta = 0;
  double cauchy_ratio = 0;  // NaN when the terms vanish
  std::vector<double> term_norms;
};

struct TransferMap {
  Vec base;
  Mat P1, P1c, B, Pu;
  int N = 0;
  double tail_bound = 0;
  std::vector<BSeries> blocks;
};

struct TransferCalibration {
  std::vector<double> rate_max, rate_min;  // one-step rates of the reduced blocks
  double ls_plus_fit = 0;                  // one-step stable rate on X_cs
  double beta_E = 1;
  bool beta_E_fitted = false;
  std::vector<double> theta;
};

class TransferField {
 public:
  TransferField(Cocycle c, Layout L, double tol = 1e-13, int horizon = 40, int max_terms = 200);

  // Fits rates and beta_E on sampled base points of X_cs in [-box, box].
  void calibrate(int samples = 12, double box = 0.2, unsigned seed = 5);
  void set_calibration(TransferCalibration cal) { cal_ = std::move(cal); }
  const TransferCalibration& calibration() const { return cal_; }

  // B_i at x_cs through the telescoping series.
  BSeries transfer_B(const Vec& x_cs, int block) const;
  TransferMap at(const Vec& x_cs) const;
  Mat Pu(const Vec& x_cs) const;
  const Cocycle& cocycle() const { return c_; }
  const Layout& layout() const { return L_; }
  bool trivial_splitting() const { return L_.unstable.size() == 1; }

 private:
  std::vector<BSeries> series(const Vec& x_cs, std::vector<Mat>* P1_y, std::vector<Mat>* P1_c) const;
  Vec center_of(const Vec& x_cs) const;

  Cocycle c_;
  Layout L_;
  double tol_;
  int horizon_;
  int max_terms_;
  TransferCalibration cal_;
};

double cohomology_residual(const TransferField& T, const Vec& x_cs);

// beta-bar of the Hoelder lemma; throws ConfigError when rho*tau1 >= 1.
double holder_exponent_bound(double tau1, double tau2, double rho, double alpha, double eps = 0.01);

// Log-log slope of dist(E_i(x), E_i(x~)) against |x - x~| on dyadic pairs.
SlopeFit fit_splitting_exponent(const Cocycle& c, const Layout& L, const std::vector<Vec>& centers,
                                int horizon = 40, unsigned seed = 3);

}  // namespace phlin
