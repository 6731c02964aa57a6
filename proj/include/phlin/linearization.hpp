#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "phlin/cocycle.hpp"
#include "phlin/lp.hpp"
#include "phlin/normalization.hpp"

namespace phlin {

struct LinearizationConfig {
  LPConfig lp;                // unstable foliation of F
  double tol = 1e-13;         // Cauchy tolerance of the limits
  int first_steps = 8;
  int step = 8;
  int max_steps = 120;
  double transfer_tol = 1e-13;
  int transfer_horizon = 40;
  bool calibrate = true;
};

// Result of a truncated limit.
struct LimitValue {
  Vec value;
  int steps = 0;
  double last_diff = 0;
  double cauchy_ratio = 0;  // NaN when fewer than two nonzero differences
  bool converged = false;
  std::vector<double> diffs;  // successive differences of the iterates
};

// Takens normal form (A_s(y_c) y_s, g_c(y_c), A_u(y_c) y_u).
struct NormalForm {
  Layout layout;
  MatFn A_s, A_u;
  VecFn g_c;
  Vec eval(const Vec& y) const;
};
BlockVector evaluate_normal_form(const NormalForm& nf, const Vec& y);

// The conjugacy chain on top of a normalization pipeline. F_T = S F S^{-1} is the
// normalized map; points are in F_T coordinates unless marked as F points.
//   H(x)       point of the F_T unstable leaf through x_cs with u-coordinate x_u
//   Theta(x)   (x_cs, P_u(x_cs) x_u)
//   Phi        per-fiber linearization of F~ = Theta H^{-1} F_T H Theta^{-1}
//   psi        linearization of the stable part of g = F_T on X_cs
//   conj       = S^{-1} H Theta^{-1} Phi (psi, id), satisfying F conj = conj NF
class ConjugacyChain {
 public:
  ConjugacyChain(Pipeline P, LinearizationConfig cfg = {});

  const Pipeline& pipeline() const { return P_; }
  const DynMap& F() const { return *P_.F; }
  const DynMap& FT() const { return *P_.FT; }
  const Layout& layout() const { return L_; }
  const SpectralStructure& structure() const { return P_.F->structure(); }
  const FoliationChart& chart() const { return chart_; }
  const TransferField& transfer() const { return *transfer_; }
  const LinearizationConfig& config() const { return cfg_; }

  // g on X_cs, cs coordinates
  Vec g(const Vec& y_cs) const;
  Vec g_inv(const Vec& y_cs) const;
  Mat A_u(const Vec& y_cs) const;
  Mat A_s(const Vec& y_c) const;
  Vec g_c(const Vec& y_c) const;
  Mat Pu(const Vec& y_cs) const;

  // F point on the leaf of S^{-1}(y_cs) whose image under S has u-coordinate v.
  Vec leaf_in_F(const Vec& y_cs, const Vec& v) const;
  // S^{-1}(y) for y in X_cs
  Vec to_F(const Vec& y) const;
  Vec to_T(const Vec& x) const;

  Vec H(const Vec& x) const;
  Vec H_inv(const Vec& y) const;
  Vec F_hat(const Vec& x) const;
  Vec Theta(const Vec& x) const;
  Vec Theta_inv(const Vec& x) const;
  Vec F_tilde(const Vec& x) const;
  // pi_u F~ over the fiber of y_cs
  Vec fiber_step(const Vec& y_cs, const Vec& v) const;

  // Phi^{-1}(x) (nonlinear to linear) by the backward limit
  LimitValue to_linear(const Vec& x) const;
  // Phi(y) (linear to nonlinear) by the mirrored forward limit
  LimitValue from_linear(const Vec& y) const;
  Vec Phi(const Vec& y) const { return from_linear(y).value; }
  Vec Phi_inv(const Vec& x) const { return to_linear(x).value; }

  LimitValue psi_inv_limit(const Vec& x_cs) const;
  LimitValue psi_limit(const Vec& y_cs) const;
  Vec psi(const Vec& y_cs) const { return psi_limit(y_cs).value; }
  Vec psi_inv(const Vec& x_cs) const { return psi_inv_limit(x_cs).value; }

  Vec conj(const Vec& y) const;
  Vec conj_inv(const Vec& x) const;
  // D conj at the center point with center coordinate x_c
  Mat Delta(const Vec& x_c) const { return P_.S->jet(embed(L_, x_c, Proj::c)); }
  NormalForm normal_form() const;

 private:
  LimitValue to_linear_from(const Vec& x_cs, const Vec& w0) const;
  LimitValue from_linear_point(const Vec& y, Vec* f_point) const;
  LimitValue psi_inv_from(const Vec& x_cs) const;

  Pipeline P_;
  LinearizationConfig cfg_;
  Layout L_;
  FoliationChart chart_;
  Cocycle cocycle_;
  std::unique_ptr<TransferField> transfer_;
  bool preserves_u_, identity_on_cs_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<double>, Mat> pu_cache_;
};

// Flattens the weak-unstable leaves inside the fibers of F~: the slow blocks are the
// unstable blocks up to `boundary`, the fast ones the rest.
class WeakUnstableStraightening {
 public:
  WeakUnstableStraightening(const ConjugacyChain& chain, int boundary, LPConfig cfg = {});
  // (lambda_l + varsigma, lambda_{l+1} - varsigma)
  std::pair<double, double> window() const { return window_; }
  double rho() const { return rho_; }
  // fast coordinates of the leaf through (y_cs, v_slow, .)
  Vec leaf(const Vec& y_cs, const Vec& v_slow) const;
  WeightedSequence solve(const Vec& y_cs, const Vec& v_slow) const;
  // (y_cs, v_slow, v_fast - leaf)
  Vec forward(const Vec& x) const;
  Vec inverse(const Vec& y) const;
  // max_n rho^{-n} |F~^n fiber| / |v| for n <= horizon
  double growth(const Vec& y_cs, const Vec& v, int horizon) const;
  int n_slow() const { return nslow_; }

 private:
  const ConjugacyChain* chain_;
  int boundary_;
  LPConfig cfg_;
  int nslow_ = 0;
  std::pair<double, double> window_;
  double rho_ = 1;
};

}  // namespace phlin
