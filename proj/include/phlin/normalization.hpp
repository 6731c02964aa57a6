#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "phlin/lp.hpp"
#include "phlin/map_model.hpp"

namespace phlin {

// Invertible coordinate change fixing X_c pointwise with identity derivative at 0.
class Transform {
 public:
  virtual ~Transform() = default;
  virtual std::string name() const = 0;
  virtual Vec forward(const Vec& x) const = 0;
  virtual Vec inverse(const Vec& y) const = 0;
  virtual Mat jacobian(const Vec& x) const;
  virtual Mat inverse_jacobian(const Vec& y) const;
  // pi_u forward(x) = x_u
  virtual bool preserves_u() const { return false; }
  // D(inverse)(y) e_u = e_u for y in X_cs
  virtual bool trivial_inverse_u_columns() const { return false; }
  virtual bool is_identity() const { return false; }
  // forward and inverse are the identity on X_cs
  virtual bool identity_on_cs() const { return false; }
};

class IdentityTransform : public Transform {
 public:
  std::string name() const override { return "id"; }
  Vec forward(const Vec& x) const override { return x; }
  Vec inverse(const Vec& y) const override { return y; }
  Mat jacobian(const Vec& x) const override { return Mat::Identity(x.size(), x.size()); }
  Mat inverse_jacobian(const Vec& y) const override { return Mat::Identity(y.size(), y.size()); }
  bool preserves_u() const override { return true; }
  bool trivial_inverse_u_columns() const override { return true; }
  bool is_identity() const override { return true; }
  bool identity_on_cs() const override { return true; }
};

// S F S^{-1}
class ConjugatedMap : public DynMap {
 public:
  ConjugatedMap(std::shared_ptr<const DynMap> F, std::shared_ptr<const Transform> S);
  const Layout& layout() const override { return F_->layout(); }
  Vec eval(const Vec& y) const override;
  Vec inverse(const Vec& y) const override;
  Mat jacobian(const Vec& y) const override;
  Mat jacobian_columns(const Vec& y, const std::vector<int>& dirs) const override;
  Mat unstable_block(const Vec& y) const override;
  const Mat& linear_part() const override { return F_->linear_part(); }
  std::string name() const override { return S_->name() + "(" + F_->name() + ")"; }

 private:
  Vec to_inner(const Vec& y) const;
  Vec to_outer(const Vec& x) const;
  std::shared_ptr<const DynMap> F_;
  std::shared_ptr<const Transform> S_;
  std::vector<int> u_;
};

// (x_c, x_su - w_c(x_c))
class CenterStage : public Transform {
 public:
  CenterStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg);
  std::string name() const override { return "center"; }
  Vec forward(const Vec& x) const override;
  Vec inverse(const Vec& y) const override;
  bool trivial_inverse_u_columns() const override { return true; }
  Vec graph(const Vec& x_c) const;

 private:
  std::shared_ptr<const DynMap> F_;
  SpectralStructure st_;
  LPConfig cfg_;
};

struct TangentFrames {
  Mat Es;  // d x n_s, s-rows identity
  Mat Eu;  // d x n_u, u-rows identity
  Mat M;   // columns E_s, e_c, E_u in coordinate order
  Mat P;   // M^{-1}: sends E_s, X_c, E_u to X_s, X_c, X_u
};
TangentFrames tangent_frames_on_center(const DynMap& F, const SpectralStructure& st, const Vec& x_c,
                                       const LPConfig& cfg = {});

// x_c + P(x_c)(x - x_c)
class UpsilonStage : public Transform {
 public:
  UpsilonStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg);
  std::string name() const override { return "upsilon"; }
  Vec forward(const Vec& x) const override;
  Vec inverse(const Vec& y) const override;
  Mat P(const Vec& x_c) const;

 private:
  const TangentFrames& frames(const Vec& x_c) const;
  std::shared_ptr<const DynMap> F_;
  SpectralStructure st_;
  LPConfig cfg_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<double>, TangentFrames> cache_;
};

// (x_s - w_cu(x_cu), x_c, x_u - w_cs(x_cs))
class GStage : public Transform {
 public:
  GStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg, bool with_cs, bool with_cu);
  std::string name() const override { return "G"; }
  Vec forward(const Vec& x) const override;
  Vec inverse(const Vec& y) const override;
  bool preserves_u() const override { return !with_cs_; }
  bool trivial_inverse_u_columns() const override { return true; }
  // w_cu vanishes on X_c
  bool identity_on_cs() const override { return !with_cs_; }
  Vec w_cs(const Vec& x_cs) const;
  Vec w_cu(const Vec& x_cu) const;

 private:
  std::shared_ptr<const DynMap> F_;
  SpectralStructure st_;
  LPConfig cfg_;
  bool with_cs_, with_cu_;
};

// forward = phi^{-1}: (y_s, h_s(y_cs, 0)); inverse = phi: (x_s, h_s((0, x_c), x_s)).
class PhiStage : public Transform {
 public:
  PhiStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg);
  std::string name() const override { return "phi"; }
  Vec forward(const Vec& x) const override;
  Vec inverse(const Vec& y) const override;
  bool preserves_u() const override { return true; }
  bool trivial_inverse_u_columns() const override { return true; }

 private:
  std::shared_ptr<const DynMap> F_;
  SpectralStructure st_;
  LPConfig cfg_;
};

// S = S_m o ... o S_1, stages listed in application order.
class TransformationStack : public Transform {
 public:
  explicit TransformationStack(const Layout& L) : u_indices_(L.indices(Proj::u)) {}
  void push(std::shared_ptr<const Transform> t) { stages_.push_back(std::move(t)); }
  std::string name() const override;
  Vec forward(const Vec& x) const override;
  Vec inverse(const Vec& y) const override;
  bool preserves_u() const override;
  bool trivial_inverse_u_columns() const override;
  bool is_identity() const override;
  bool identity_on_cs() const override;
  // D S^{-1}(y) restricted to the X_u columns
  Mat inverse_u_columns(const Vec& y) const;
  // Delta(x_c) = D S^{-1}(x_c), product of the stage-inverse jacobians
  Mat jet(const Vec& x_c) const;
  const std::vector<std::shared_ptr<const Transform>>& stages() const { return stages_; }

 private:
  std::vector<std::shared_ptr<const Transform>> stages_;
  std::vector<int> u_indices_;
};

struct StageRecord {
  std::string name;
  bool ran = false;
  std::string reason;
  double residual = 0;
};

struct PipelineConfig {
  LPConfig lp;
  bool force_all = false;
  double check_box = 0.2;
  int check_n = 5;
  double verify_tol = 1e-10;
};

struct Pipeline {
  std::shared_ptr<const MapModel> F;
  std::shared_ptr<TransformationStack> S;
  std::shared_ptr<const DynMap> FT;  // S F S^{-1}
  std::vector<StageRecord> manifest;
  std::string manifest_json() const;
};

// Stage order: center, upsilon, G, phi. A stage is skipped when the model's flag
// declares its identity and no earlier stage broke it.
Pipeline run_pipeline(std::shared_ptr<const MapModel> F, const PipelineConfig& cfg = {});

// Identity residuals on center/cs/cu grids.
double center_invariance_residual(const DynMap& F, double box, int n);
double block_diag_residual(const DynMap& F, double box, int n);
double cs_invariance_residual(const DynMap& F, double box, int n);
double cu_invariance_residual(const DynMap& F, double box, int n);
double stable_flatness_residual(const DynMap& F, const SpectralStructure& st, double box, int n, const LPConfig& cfg);

std::vector<Vec> subspace_lattice(const Layout& L, Proj p, double box, int n);

}  // namespace phlin
