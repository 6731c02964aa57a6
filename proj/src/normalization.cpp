#include "phlin/normalization.hpp"

#include <cmath>
#include "json.hpp"
#include <functional>

namespace phlin {

namespace {

// Graph LPs choose their own weight.
LPConfig graph_config(LPConfig cfg) {
  cfg.rho = 0;
  return cfg;
}

constexpr int kFixedPointIter = 200;
constexpr double kFixedPointTol = 1e-15;

bool converged(const Vec& a, const Vec& b) {
  return (a - b).lpNorm<Eigen::Infinity>() <= kFixedPointTol * std::max(1.0, a.lpNorm<Eigen::Infinity>());
}

}  // namespace

Mat Transform::jacobian(const Vec& x) const {
  return fd_jacobian([this](const Vec& v) { return forward(v); }, x);
}

Mat Transform::inverse_jacobian(const Vec& y) const {
  return fd_jacobian([this](const Vec& v) { return inverse(v); }, y);
}

ConjugatedMap::ConjugatedMap(std::shared_ptr<const DynMap> F, std::shared_ptr<const Transform> S)
    : F_(std::move(F)), S_(std::move(S)), u_(F_->layout().indices(Proj::u)) {}

namespace {
bool on_cs(const Vec& x, const std::vector<int>& u) {
  for (int i : u)
    if (x(i) != 0.0) return false;
  return true;
}
}  // namespace

Vec ConjugatedMap::to_inner(const Vec& y) const {
  return S_->identity_on_cs() && on_cs(y, u_) ? y : S_->inverse(y);
}

Vec ConjugatedMap::to_outer(const Vec& x) const {
  return S_->identity_on_cs() && on_cs(x, u_) ? x : S_->forward(x);
}

Vec ConjugatedMap::eval(const Vec& y) const { return to_outer(F_->eval(to_inner(y))); }

Vec ConjugatedMap::inverse(const Vec& y) const { return to_outer(F_->inverse(to_inner(y))); }

Mat ConjugatedMap::jacobian(const Vec& y) const {
  return fd_jacobian([this](const Vec& v) { return eval(v); }, y);
}

Mat ConjugatedMap::unstable_block(const Vec& y) const {
  // pi_u DS = (0 0 I) and DS^{-1} e_u = e_u on X_cs
  if (S_->preserves_u() && S_->trivial_inverse_u_columns()) return F_->unstable_block(to_inner(y));
  return DynMap::unstable_block(y);
}

Mat ConjugatedMap::jacobian_columns(const Vec& y, const std::vector<int>& dirs) const {
  return fd_partial([this](const Vec& v) { return eval(v); }, y, dirs);
}

// ---- center

CenterStage::CenterStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg)
    : F_(std::move(F)), st_(std::move(st)), cfg_(graph_config(cfg)) {}

Vec CenterStage::graph(const Vec& x_c) const { return center_graph(*F_, st_, x_c, cfg_); }

Vec CenterStage::forward(const Vec& x) const {
  const Layout& L = F_->layout();
  Vec y = x;
  assign(L, y, Proj::su, project(L, x, Proj::su) - graph(project(L, x, Proj::c)));
  return y;
}

Vec CenterStage::inverse(const Vec& y) const {
  const Layout& L = F_->layout();
  Vec x = y;
  assign(L, x, Proj::su, project(L, y, Proj::su) + graph(project(L, y, Proj::c)));
  return x;
}

// ---- upsilon

TangentFrames tangent_frames_on_center(const DynMap& F, const SpectralStructure& st, const Vec& x_c,
                                       const LPConfig& cfg) {
  const Layout& L = F.layout();
  LPConfig cs = cfg, cu = cfg;
  cs.rho = cu.rho = 0;
  cs = admissible_stable(st, cs);
  cu = admissible_unstable(st, cu);
  TangentFrames t;
  t.Es = solve_derivative_lp(F, x_c, cs).front();
  t.Eu = solve_unstable_derivative_lp(F, x_c, cu).back();
  Mat M = Mat::Identity(L.dim(), L.dim());
  const auto si = L.indices(Proj::s), ui = L.indices(Proj::u);
  for (size_t j = 0; j < si.size(); ++j) M.col(si[j]) = t.Es.col(static_cast<Eigen::Index>(j));
  for (size_t j = 0; j < ui.size(); ++j) M.col(ui[j]) = t.Eu.col(static_cast<Eigen::Index>(j));
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) throw NumericError("tangent frames on the center manifold are degenerate");
  t.M = M;
  t.P = lu.inverse();
  return t;
}

UpsilonStage::UpsilonStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg)
    : F_(std::move(F)), st_(std::move(st)), cfg_(cfg) {}

const TangentFrames& UpsilonStage::frames(const Vec& x_c) const {
  std::vector<double> key(x_c.data(), x_c.data() + x_c.size());
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, tangent_frames_on_center(*F_, st_, x_c, cfg_)).first;
  return it->second;
}

Mat UpsilonStage::P(const Vec& x_c) const { return frames(x_c).P; }

Vec UpsilonStage::forward(const Vec& x) const {
  const Layout& L = F_->layout();
  const Vec c = embed(L, project(L, x, Proj::c), Proj::c);
  return c + P(project(L, x, Proj::c)) * (x - c);
}

Vec UpsilonStage::inverse(const Vec& y) const {
  // x = x_c + M(x_c)(y - x_c) with M = P^{-1}; the c-row gives x_c = y_c + [M y0]_c.
  const Layout& L = F_->layout();
  Vec y0 = y;
  assign(L, y0, Proj::c, Vec::Zero(L.nc()));
  Vec xc = project(L, y, Proj::c);
  for (int it = 0; it < kFixedPointIter; ++it) {
    const Vec My0 = frames(xc).M * y0;
    const Vec next = project(L, y, Proj::c) + project(L, My0, Proj::c);
    if (converged(next, xc)) {
      Vec x = My0;
      assign(L, x, Proj::c, next);
      return x;
    }
    xc = next;
  }
  throw NumericError("upsilon inverse did not converge");
}

// ---- G

GStage::GStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg, bool with_cs, bool with_cu)
    : F_(std::move(F)), st_(std::move(st)), cfg_(graph_config(cfg)), with_cs_(with_cs), with_cu_(with_cu) {}

Vec GStage::w_cs(const Vec& x_cs) const {
  if (!with_cs_) return Vec::Zero(F_->layout().nu());
  return center_stable_graph(*F_, st_, x_cs, cfg_);
}

Vec GStage::w_cu(const Vec& x_cu) const {
  if (!with_cu_) return Vec::Zero(F_->layout().ns());
  return center_unstable_graph(*F_, st_, x_cu, cfg_);
}

Vec GStage::forward(const Vec& x) const {
  const Layout& L = F_->layout();
  Vec y = x;
  assign(L, y, Proj::s, project(L, x, Proj::s) - w_cu(project(L, x, Proj::cu)));
  assign(L, y, Proj::u, project(L, x, Proj::u) - w_cs(project(L, x, Proj::cs)));
  return y;
}

Vec GStage::inverse(const Vec& y) const {
  const Layout& L = F_->layout();
  Vec x = y;
  if (!with_cs_) {
    assign(L, x, Proj::s, project(L, y, Proj::s) + w_cu(project(L, y, Proj::cu)));
    return x;
  }
  if (!with_cu_) {
    assign(L, x, Proj::u, project(L, y, Proj::u) + w_cs(project(L, y, Proj::cs)));
    return x;
  }
  for (int it = 0; it < kFixedPointIter; ++it) {
    Vec next = y;
    assign(L, next, Proj::s, project(L, y, Proj::s) + w_cu(project(L, x, Proj::cu)));
    assign(L, next, Proj::u, project(L, y, Proj::u) + w_cs(project(L, next, Proj::cs)));
    if (converged(next, x)) return next;
    x = next;
  }
  throw NumericError("G inverse did not converge");
}

// ---- phi

PhiStage::PhiStage(std::shared_ptr<const DynMap> F, SpectralStructure st, LPConfig cfg)
    : F_(std::move(F)), st_(std::move(st)), cfg_(cfg) {
  cfg_.rho = 0;
  cfg_ = admissible_stable(st_, cfg_);
}

Vec PhiStage::forward(const Vec& x) const {
  const Layout& L = F_->layout();
  const Vec xcs = project(L, x, Proj::cs);
  const auto sol = solve_stable_lp_on_Xcs(*F_, xcs, Vec::Zero(L.ns()), cfg_);
  Vec y = x;
  assign(L, y, Proj::c, sol.h_s);
  return y;
}

Vec PhiStage::inverse(const Vec& y) const {
  const Layout& L = F_->layout();
  Vec base = Vec::Zero(L.ns() + L.nc());
  base.tail(L.nc()) = project(L, y, Proj::c);
  const auto sol = solve_stable_lp_on_Xcs(*F_, base, project(L, y, Proj::s), cfg_);
  Vec x = y;
  assign(L, x, Proj::c, sol.h_s);
  return x;
}

// ---- stack

std::string TransformationStack::name() const {
  if (stages_.empty()) return "id";
  std::string out;
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
    if (!out.empty()) out += "*";
    out += (*it)->name();
  }
  return out;
}

Vec TransformationStack::forward(const Vec& x) const {
  Vec y = x;
  for (const auto& s : stages_) y = s->forward(y);
  return y;
}

Vec TransformationStack::inverse(const Vec& y) const {
  Vec x = y;
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) x = (*it)->inverse(x);
  return x;
}

bool TransformationStack::preserves_u() const {
  for (const auto& s : stages_)
    if (!s->preserves_u()) return false;
  return true;
}

bool TransformationStack::trivial_inverse_u_columns() const {
  for (const auto& s : stages_)
    if (!s->trivial_inverse_u_columns()) return false;
  return true;
}

bool TransformationStack::identity_on_cs() const {
  for (const auto& s : stages_)
    if (!s->identity_on_cs()) return false;
  return true;
}

bool TransformationStack::is_identity() const {
  for (const auto& s : stages_)
    if (!s->is_identity()) return false;
  return true;
}

Mat TransformationStack::inverse_u_columns(const Vec& y) const {
  const int d = static_cast<int>(y.size());
  const int nu = static_cast<int>(u_indices_.size());
  if (trivial_inverse_u_columns()) {
    Mat E = Mat::Zero(d, nu);
    for (int j = 0; j < nu; ++j) E(u_indices_[static_cast<size_t>(j)], j) = 1.0;
    return E;
  }
  return fd_partial([this](const Vec& v) { return inverse(v); }, y, u_indices_);
}

Mat TransformationStack::jet(const Vec& x_c) const {
  const int d = static_cast<int>(x_c.size());
  Mat D = Mat::Identity(d, d);
  for (const auto& s : stages_) D = D * s->inverse_jacobian(x_c);
  return D;
}

// ---- residual checks

std::vector<Vec> subspace_lattice(const Layout& L, Proj p, double box, int n) {
  const auto idx = L.indices(p);
  const int k = static_cast<int>(idx.size());
  std::vector<Vec> pts;
  if (k == 0) return {Vec::Zero(L.dim())};
  std::vector<int> c(static_cast<size_t>(k), 0);
  while (true) {
    Vec x = Vec::Zero(L.dim());
    for (int j = 0; j < k; ++j)
      x(idx[static_cast<size_t>(j)]) = n == 1 ? 0.0 : -box + 2 * box * c[static_cast<size_t>(j)] / (n - 1);
    pts.push_back(x);
    int j = 0;
    while (j < k && ++c[static_cast<size_t>(j)] == n) c[static_cast<size_t>(j++)] = 0;
    if (j == k) break;
  }
  return pts;
}

double center_invariance_residual(const DynMap& F, double box, int n) {
  const Layout& L = F.layout();
  double r = 0;
  for (const auto& x : subspace_lattice(L, Proj::c, box, n))
    r = std::max(r, project(L, F.eval(x), Proj::su).lpNorm<Eigen::Infinity>());
  return r;
}

double block_diag_residual(const DynMap& F, double box, int n) {
  const Layout& L = F.layout();
  double r = 0;
  for (const auto& x : subspace_lattice(L, Proj::c, box, n)) {
    const Mat J = F.jacobian(x);
    for (Proj a : {Proj::s, Proj::c, Proj::u})
      for (Proj b : {Proj::s, Proj::c, Proj::u}) {
        if (a == b) continue;
        const Mat blk = sub_block(L, J, a, b);
        if (blk.size() > 0) r = std::max(r, blk.lpNorm<Eigen::Infinity>());
      }
  }
  return r;
}

double cs_invariance_residual(const DynMap& F, double box, int n) {
  const Layout& L = F.layout();
  double r = 0;
  for (const auto& x : subspace_lattice(L, Proj::cs, box, n))
    if (L.nu() > 0) r = std::max(r, project(L, F.eval(x), Proj::u).lpNorm<Eigen::Infinity>());
  return r;
}

double cu_invariance_residual(const DynMap& F, double box, int n) {
  const Layout& L = F.layout();
  double r = 0;
  for (const auto& x : subspace_lattice(L, Proj::cu, box, n))
    if (L.ns() > 0) r = std::max(r, project(L, F.inverse(x), Proj::s).lpNorm<Eigen::Infinity>());
  return r;
}

double stable_flatness_residual(const DynMap& F, const SpectralStructure& st, double box, int n,
                                const LPConfig& cfg) {
  const Layout& L = F.layout();
  if (L.ns() == 0 || L.nc() == 0) return 0;
  LPConfig c = cfg;
  c.rho = 0;
  c = admissible_stable(st, c);
  double r = 0;
  for (const auto& x : subspace_lattice(L, Proj::cs, box, n)) {
    const Vec xcs = project(L, x, Proj::cs);
    const auto sol = solve_stable_lp_on_Xcs(F, xcs, Vec::Zero(L.ns()), c);
    r = std::max(r, (sol.h_s - project(L, x, Proj::c)).lpNorm<Eigen::Infinity>());
  }
  return r;
}

// ---- pipeline

std::string Pipeline::manifest_json() const {
  nlohmann::ordered_json j;
  j["map"] = F->name();
  j["transform"] = S->name();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : manifest) {
    nlohmann::ordered_json e;
    e["stage"] = r.name;
    e["ran"] = r.ran;
    e["reason"] = r.reason;
    e["residual"] = fmt17(r.residual);
    arr.push_back(e);
  }
  j["stages"] = arr;
  return j.dump(2);
}

Pipeline run_pipeline(std::shared_ptr<const MapModel> F, const PipelineConfig& cfg) {
  Pipeline out;
  out.F = F;
  out.S = std::make_shared<TransformationStack>(F->layout());
  const SpectralStructure& st = F->structure();
  const NormalizationFlags& fl = F->flags();
  const Layout& L = F->layout();
  std::shared_ptr<const DynMap> cur = F;
  bool any = false;
  const double box = cfg.check_box;
  const int n = cfg.check_n;

  auto apply = [&](std::shared_ptr<const Transform> t) {
    out.S->push(t);
    cur = std::make_shared<ConjugatedMap>(cur, t);
    any = true;
  };
  // A declared identity is trusted on F itself; after an earlier stage it is rechecked.
  auto skip = [&](bool declared, const std::string& flag, const std::function<double()>& residual,
                  std::string& reason) {
    if (!declared || cfg.force_all) return false;
    if (!any) {
      reason = "flag " + flag;
      return true;
    }
    if (residual() <= cfg.verify_tol) {
      reason = "flag " + flag + ", rechecked";
      return true;
    }
    return false;
  };

  {
    StageRecord r{"center", false, "", 0};
    if (L.nc() == 0) {
      r.reason = "no center block";
    } else if (!skip(fl.center_manifold, "center_manifold", [&] { return center_invariance_residual(*cur, box, n); },
                     r.reason)) {
      apply(std::make_shared<CenterStage>(cur, st, cfg.lp));
      r.ran = true;
      r.reason = "computed";
    }
    if (L.nc() > 0) r.residual = center_invariance_residual(*cur, box, n);
    out.manifest.push_back(r);
  }
  {
    StageRecord r{"upsilon", false, "", 0};
    if (L.nc() == 0) {
      r.reason = "no center block";
    } else if (!skip(fl.block_diag_center, "block_diag_center", [&] { return block_diag_residual(*cur, box, n); },
                     r.reason)) {
      apply(std::make_shared<UpsilonStage>(cur, st, cfg.lp));
      r.ran = true;
      r.reason = "computed";
    }
    if (L.nc() > 0) r.residual = block_diag_residual(*cur, box, n);
    out.manifest.push_back(r);
  }
  {
    StageRecord r{"G", false, "", 0};
    std::string rc, ru;
    const bool cs = L.nu() > 0 &&
                    !skip(fl.cs_invariant, "cs_invariant", [&] { return cs_invariance_residual(*cur, box, n); }, rc);
    const bool cu = L.ns() > 0 &&
                    !skip(fl.cu_invariant, "cu_invariant", [&] { return cu_invariance_residual(*cur, box, n); }, ru);
    if (!cs && !cu) {
      r.reason = "flags cs_invariant, cu_invariant";
    } else {
      apply(std::make_shared<GStage>(cur, st, cfg.lp, cs, cu));
      r.ran = true;
      r.reason = std::string("computed") + (cs ? " cs" : "") + (cu ? " cu" : "");
    }
    r.residual = std::max(cs_invariance_residual(*cur, box, n), cu_invariance_residual(*cur, box, n));
    out.manifest.push_back(r);
  }
  {
    StageRecord r{"phi", false, "", 0};
    const int m = std::min(n, 3);
    if (L.ns() == 0 || L.nc() == 0) {
      r.reason = "no stable or center block";
    } else if (!skip(fl.stable_flat, "stable_flat",
                     [&] { return stable_flatness_residual(*cur, st, box, m, cfg.lp); }, r.reason)) {
      apply(std::make_shared<PhiStage>(cur, st, cfg.lp));
      r.ran = true;
      r.reason = "computed";
    }
    if (r.ran) r.residual = stable_flatness_residual(*cur, st, box, m, cfg.lp);
    out.manifest.push_back(r);
  }
  out.FT = cur;
  return out;
}

}  // namespace phlin
