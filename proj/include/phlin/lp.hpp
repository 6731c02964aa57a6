#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "phlin/map_model.hpp"

namespace phlin {

struct LPConfig {
  double rho = 0;  // weight; 0 selects the log-midpoint of the admissible interval
  int N = 30;      // truncation
  double tol = 1e-14;
  int max_iter = 300;
};

// Half of the upper bound (log(1+varsigma) - log lu-) / log ls-.
double foliation_beta(const SpectralStructure& st);
// (1+varsigma, lu- (ls-)^beta)
std::pair<double, double> unstable_rho_interval(const SpectralStructure& st);
// (ls+, 1-varsigma)
std::pair<double, double> stable_rho_interval(const SpectralStructure& st);
// (1+varsigma, lu-), used by the leaf oracle and the center-stable graph
std::pair<double, double> oracle_rho_interval(const SpectralStructure& st);
double log_midpoint(std::pair<double, double> iv);
// Fills rho with the midpoint when unset; ConfigError when outside the interval.
LPConfig admissible_unstable(const SpectralStructure& st, LPConfig cfg);
LPConfig admissible_stable(const SpectralStructure& st, LPConfig cfg);

// Truncated sequence q_lo..q_hi in the weighted sup-norm.
struct WeightedSequence {
  int lo = 0, hi = 0;
  std::vector<Vec> q;
  double weight = 1;
  int iterations = 0;
  double last_diff = 0;
  double lipschitz_estimate = 0;
  double tail_bound = 0;

  const Vec& at(int n) const { return q[static_cast<size_t>(n - lo)]; }
  Vec& at(int n) { return q[static_cast<size_t>(n - lo)]; }
  // sup rho^{-n} |q_n|
  double weighted_norm() const;
};

enum class Sweep { forward, backward, anchored };

// x_{k+1} = M_k x_k + r_k(x_k) on [lo, hi]. Coordinates swept forward start from
// boundary at lo, backward ones from boundary at hi, anchored ones from boundary at 0.
// Coupling of M_k across sweep groups is moved into the forcing.
struct LPProblem {
  int lo = 0, hi = 0;
  std::vector<Sweep> sweep;
  Vec boundary;
  std::vector<Mat> M;  // k = lo..hi-1
  std::function<Vec(int, const Vec&)> remainder;
  double rho = 1;
  bool two_sided_weight = false;  // weight rho^{-|k|}
};

// Picard iteration from the zero sequence.
WeightedSequence solve_lp(const LPProblem& p, double tol, int max_iter);

// Orbits needed by the unstable LP at x, reusable across z_u.
struct UnstableContext {
  Vec x;
  std::vector<Vec> xk;   // F^k(x), k = -N..0
  std::vector<Mat> Mk;   // DF(g^k(x_c))
  std::vector<Mat> Dfk;  // DF - A at the center orbit
  int N = 0;
};
UnstableContext prepare_unstable(const DynMap& F, const Vec& x, int N);

WeightedSequence solve_unstable_lp(const DynMap& F, const Vec& x, const Vec& z_u, const LPConfig& cfg);
WeightedSequence solve_unstable_lp(const DynMap& F, const UnstableContext& ctx, const Vec& z_u,
                                   const LPConfig& cfg);

// Evaluable unstable foliation of F.
class FoliationChart {
 public:
  FoliationChart(const DynMap& F, const SpectralStructure& st, LPConfig cfg = {});
  Vec h_u(const Vec& x, const Vec& z_u) const;
  // z_u + h_u(x, z_u) as a point of R^d
  Vec leaf_point(const Vec& x, const Vec& z_u) const;
  WeightedSequence solve(const Vec& x, const Vec& z_u) const;
  const LPConfig& config() const { return cfg_; }
  const DynMap& map() const { return *F_; }

 private:
  const DynMap* F_;
  LPConfig cfg_;
};

// Stable LP of F restricted to X_cs; x_cs in cs coordinates.
struct StableSolution {
  WeightedSequence p;
  Vec h_s;  // x_c + pi_c p_0
};
StableSolution solve_stable_lp_on_Xcs(const DynMap& F, const Vec& x_cs, const Vec& z_s, const LPConfig& cfg);

// Constant-coefficient stable LP in the full space.
WeightedSequence solve_classical_lp(const DynMap& F, const Vec& x, const Vec& z_s, const LPConfig& cfg);

// d p_n / d z_s at (x_c, 0), n = 0..N, as d x n_s matrices.
std::vector<Mat> solve_derivative_lp(const DynMap& F, const Vec& x_c, const LPConfig& cfg);
// d q_n / d z_u at (x_c, 0), n = -N..0 (index n + N).
std::vector<Mat> solve_unstable_derivative_lp(const DynMap& F, const Vec& x_c, const LPConfig& cfg);

struct OracleVerdict {
  bool member = false;
  double deviation = 0;
  double bound = 0;
};
// Backward orbits for unstable leaves, forward orbits when stable is set.
OracleVerdict leaf_membership_oracle(const DynMap& F, const Vec& x, const Vec& z, double rho, int horizon,
                                     double bound_factor = 10, bool stable = false);

// Invariant-manifold graphs by orbit LPs with constant coefficients (x_c, x_cs, x_cu in
// their own coordinates). Each returns the graph value.
Vec center_graph(const DynMap& F, const SpectralStructure& st, const Vec& x_c, const LPConfig& cfg = {});
Vec center_stable_graph(const DynMap& F, const SpectralStructure& st, const Vec& x_cs, const LPConfig& cfg = {});
Vec center_unstable_graph(const DynMap& F, const SpectralStructure& st, const Vec& x_cu, const LPConfig& cfg = {});

}  // namespace phlin
