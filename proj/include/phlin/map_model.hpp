#pragma once

#include <memory>
#include <string>
#include <vector>

#include "phlin/blocks.hpp"
#include "phlin/numerics.hpp"

namespace phlin {

enum class BlockClass { stable, center, unstable };

struct SpectralBlock {
  int size = 1;
  double modulus = 1.0;
  BlockClass cls = BlockClass::center;
};

struct SpectralStructure {
  std::vector<SpectralBlock> blocks;
  double ls_minus = 0, ls_plus = 0, lu_minus = 0, lu_plus = 0;
  double varsigma = 0;
  double K = 1;

  Layout layout() const;
  std::vector<double> stable_moduli() const;
  std::vector<double> unstable_moduli() const;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::vector<std::string> notes;
  double sampled_delta_f = 0;
  double sampled_holder_M = 0;
  void fail(const std::string& what);
};

// Strict chain 0 < ls- < l_1 < ... < l_k < ls+ < 1 < lu- < ... < lu+.
// A purely stable structure (no center, no unstable block) is accepted when allow_stable_only.
ValidationReport validate_structure(const SpectralStructure& st, bool allow_stable_only = false);

// Identities a model declares as already holding.
struct NormalizationFlags {
  bool center_manifold = false;   // X_c invariant
  bool block_diag_center = false; // DF(x_c) block diagonal
  bool cs_invariant = false;      // M_cs = X_cs
  bool cu_invariant = false;      // M_cu = X_cu
  bool stable_flat = false;       // stable foliation of F|X_cs straight
};

// An invertible map of R^d with the (s, c, u) block layout.
class DynMap {
 public:
  virtual ~DynMap() = default;
  virtual const Layout& layout() const = 0;
  virtual Vec eval(const Vec& x) const = 0;
  virtual Mat jacobian(const Vec& x) const;
  // Columns of the jacobian for the listed coordinates.
  virtual Mat jacobian_columns(const Vec& x, const std::vector<int>& dirs) const;
  virtual Vec inverse(const Vec& y) const;
  // Linear part at the fixed point (block diagonal).
  virtual const Mat& linear_part() const = 0;
  virtual std::string name() const { return "map"; }
  // d(pi_u F)/dx_u at a point of X_cs.
  virtual Mat unstable_block(const Vec& x) const;
  // F(x) - A x; overridden where f is available without cancellation.
  virtual Vec nonlinear_part(const Vec& x) const { return eval(x) - linear_part() * x; }
};

// Damped Newton for F^{-1}(y) from the predictor A^{-1} y.
Vec newton_inverse(const DynMap& F, const Vec& y, double tol = 1e-12, int max_iter = 60);

struct PolyTerm {
  int target = 0;
  std::vector<int> exponents;
  std::string coefficient;  // exact decimal text
  double value = 0;
};

class MapModel : public DynMap {
 public:
  MapModel() = default;

  const Layout& layout() const override { return layout_; }
  Vec eval(const Vec& x) const override;
  Mat jacobian(const Vec& x) const override;
  // Newton, then a fixed-point polish of the c and u parts so they keep relative
  // accuracy when |x_s| is large.
  Vec inverse(const Vec& y) const override;
  const Mat& linear_part() const override { return A_; }
  std::string name() const override { return name_; }

  Vec nonlinearity(const Vec& x) const;
  Vec nonlinear_part(const Vec& x) const override { return nonlinearity(x); }
  Mat nonlinearity_jacobian(const Vec& x) const;
  bool has_analytic_jacobian() const { return static_cast<bool>(df_); }

  const SpectralStructure& structure() const { return structure_; }
  const NormalizationFlags& flags() const { return flags_; }
  double alpha() const { return alpha_; }
  double delta_f() const { return delta_f_; }
  double holder_M() const { return M_; }
  double radius() const { return radius_; }
  const std::vector<PolyTerm>& terms() const { return terms_; }
  bool is_polynomial() const { return polynomial_; }

  static MapModel polynomial(std::string name, SpectralStructure st, std::vector<PolyTerm> terms,
                             double alpha, double delta_f, double M, double radius,
                             NormalizationFlags flags);
  static MapModel general(std::string name, SpectralStructure st, VecFn f, MatFn df, double alpha,
                          double delta_f, double M, double radius, NormalizationFlags flags);

  MapModel with_terms(std::string name, std::vector<PolyTerm> extra, NormalizationFlags flags) const;

 private:
  std::string name_;
  SpectralStructure structure_;
  Layout layout_;
  Mat A_;
  VecFn f_;
  MatFn df_;
  std::vector<PolyTerm> terms_;
  bool polynomial_ = false;
  double alpha_ = 1, delta_f_ = 0, M_ = 0, radius_ = 0;
  NormalizationFlags flags_;
};

PolyTerm term(int target, std::vector<int> exponents, const std::string& coefficient);

// Sampled checks of the spectral gaps and the Holder bound of Df.
ValidationReport validate_spectral_gaps(const SpectralStructure& st, const MapModel& model,
                                        int samples = 200, unsigned seed = 7);

// Checkable identity behind each normalization flag, on a sampled grid.
struct FlagCheck {
  std::string flag;
  bool declared = false;
  double residual = 0;
};
std::vector<FlagCheck> check_flags(const MapModel& model, double box = 0.3, int n = 7);

// Built-in test maps.
MapModel make_lin3();
MapModel make_poly3(double eps = 0.05);
MapModel make_poly3b(double eps = 0.05);
MapModel make_twou4(double eps = 0.05);
MapModel make_cex1(double mu = 0.5);
MapModel make_smooth_contrast();
std::vector<MapModel> builtin_test_maps();
MapModel catalog_lookup(const std::string& name);

// JSON map specification.
MapModel load_map_spec(const std::string& path);
MapModel parse_map_spec(const std::string& json_text);
std::string map_spec_json(const MapModel& model);

}  // namespace phlin
