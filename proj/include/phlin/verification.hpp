#pragma once

#include <functional>
#include <string>
#include <vector>

#include "phlin/linearization.hpp"

namespace phlin {

// One row-oriented table: header plus rows of already formatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string csv() const;
};

struct CheckRecord {
  std::string name;
  std::string criterion;  // acceptance criterion id, empty when none
  std::string grid;
  double measured = 0;
  double threshold = 0;
  bool pass = false;
  bool gating = true;
  double runtime = 0;
  std::string note;
  Table table;
};

struct VerificationReport {
  std::vector<CheckRecord> records;
  std::vector<std::pair<std::string, std::string>> environment;
  bool all_pass() const;  // gating records only
  std::string json() const;
};

std::vector<Vec> inner_grid(const Layout& L, double box, int n);
std::vector<Vec> random_directions(int dim, int count, unsigned seed);

struct ResidualStats {
  double max = 0;
  double mean = 0;
  int count = 0;
  std::vector<double> values;
};

// |Hinv(F(H(y))) - nf(y)| over the grid
ResidualStats conjugacy_residual_grid(const DynMap& F, const VecFn& H, const VecFn& Hinv, const VecFn& nf,
                                      const std::vector<Vec>& grid, int threads = 1);

struct DiffFit {
  SlopeFit pooled;
  std::vector<SlopeFit> per_direction;
  Table table;  // center_point, scale, direction_id, remainder
  double min_direction_slope() const;
};

// |T(x~ + t v) - x~ - Delta t v| against t; remainders at or below floor are dropped.
DiffFit differentiability_fit(const VecFn& T, const Vec& x_tilde, const Mat& Delta, const std::vector<double>& scales,
                              const std::vector<Vec>& directions, double floor = 1e-15, int center_id = 0);

struct SampleCheck {
  double max = 0;
  int count = 0;
  int agree = 0;
  Table table;
};

// |pi_cs F(z) - h_u(F(x), pi_u F(z))| over leaf points z = leaf_point(x, z_u)
SampleCheck foliation_invariance_check(const DynMap& F, const FoliationChart& chart, const std::vector<Vec>& xs,
                                       const std::vector<Vec>& zus);
// mirrored on X_cs: |pi_c F(z) - h_s(F(x_cs), pi_s F(z))| for z on the stable leaf of x_cs
SampleCheck stable_invariance_check(const DynMap& F, const SpectralStructure& st, const std::vector<Vec>& xcs,
                                    const std::vector<Vec>& zss, const LPConfig& cfg = {});

// max_{n >= n_min} |q_n - (F^n(x + q_0) - F^n(x))| for an unstable solution
double lp_orbit_consistency_check(const DynMap& F, const WeightedSequence& q, const Vec& x, int n_min = -10);

// h_u(x, pi_u x) = pi_cs x and h_s(x_cs, x_s) = x_c
SampleCheck chart_identity_check(const DynMap& F, const SpectralStructure& st, const std::vector<Vec>& xs,
                                 const LPConfig& cfg = {});

// LP leaf points against the backward-orbit oracle
SampleCheck oracle_agreement(const DynMap& F, const SpectralStructure& st, const std::vector<Vec>& xs,
                             const std::vector<Vec>& zus, int horizon = 20, double bound_factor = 10,
                             const LPConfig& cfg = {});

// max relative error of the analytic jacobian against central differences
double jacobian_fd_check(const MapModel& model, int samples = 100, unsigned seed = 17);

struct CounterexampleDemo {
  double mu = 0.5;
  double df0_fd = 0;
  std::vector<double> scales;
  std::vector<double> cex_remainder, smooth_remainder;
  std::vector<double> cex_local_slope, smooth_local_slope;  // slopes over sliding windows
  SlopeFit cex_fit, smooth_fit;                               // over all scales
  double cex_min_slope = 0, smooth_min_slope = 0;
  std::vector<int> holder_j;
  std::vector<double> holder_quotient;  // |DF(2^-j) - DF(2^-j-1)| / 2^{-(j+1) alpha}
  double alpha = 0.1;
  Table table;
};
// Truncated stable-side linearization limit mu^{-n} F^n on CEX1 and SMOOTH1.
CounterexampleDemo counterexample_demo(double mu = 0.5, int jmin = 3, int jmax = 60, int steps = 120,
                                       double alpha = 0.1);

// Acceptance suites. Each returns one record carrying its table.
struct SuiteConfig {
  double box = 0.2;
  int grid = 0;  // points per axis; 0 picks ceil(1000^{1/d})
  unsigned seed = 1;
  int threads = 0;  // 0: hardware concurrency
  int horizon = 20;
};
int default_grid_n(int dim);
// Runs fn(0..n-1) on a pool of threads; fn must only write its own slot.
void parallel_for(size_t n, const std::function<void(size_t)>& fn, int threads = 0);

CheckRecord check_jacobian(const MapModel& F, const SuiteConfig& sc);
CheckRecord check_lp_orbit(const MapModel& F, const SuiteConfig& sc, LPConfig cfg = {});
CheckRecord check_chart_identity(const MapModel& F, const SuiteConfig& sc, const LPConfig& cfg = {});
CheckRecord check_foliation(const MapModel& F, const SuiteConfig& sc, const LPConfig& cfg = {});
CheckRecord check_cohomology(const ConjugacyChain& chain, const SuiteConfig& sc);
CheckRecord check_reduction(const ConjugacyChain& chain, const SuiteConfig& sc);
CheckRecord check_fiber_linearization(const ConjugacyChain& chain, const SuiteConfig& sc);
CheckRecord check_conjugacy(const ConjugacyChain& chain, const SuiteConfig& sc);
CheckRecord check_center_fixed(const ConjugacyChain& chain, const SuiteConfig& sc);
// exponent fits at 5 center points, Delta(0) = id and the grid modulus of Delta
CheckRecord check_differentiability(const ConjugacyChain& chain, const SuiteConfig& sc);
CheckRecord check_holder_calculator();
CheckRecord check_sharpness(const CounterexampleDemo& demo);

}  // namespace phlin
