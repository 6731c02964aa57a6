#include <charconv>
#include <cmath>

#include "phlin/map_model.hpp"

namespace phlin {

namespace {

std::string dec(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

SpectralStructure three_block() {
  SpectralStructure st;
  st.blocks = {{1, 0.5, BlockClass::stable}, {1, 1.0, BlockClass::center}, {1, 2.0, BlockClass::unstable}};
  st.ls_minus = 0.4;
  st.ls_plus = 0.6;
  st.lu_minus = 1.5;
  st.lu_plus = 3.0;
  st.varsigma = 0.1;
  st.K = 1.0;
  return st;
}

NormalizationFlags all_flags() { return {true, true, true, true, true}; }

}  // namespace

MapModel make_lin3() {
  return MapModel::polynomial("LIN3", three_block(), {}, 1.0, 0.0, 0.0, 1.0, all_flags());
}

MapModel make_poly3(double eps) {
  const std::string e = dec(eps);
  std::vector<PolyTerm> t = {
      term(0, {1, 1, 0}, e),  // eps x_c x_s
      term(0, {0, 0, 2}, e),  // eps x_u^2
      term(1, {1, 0, 1}, e),  // eps x_s x_u
      term(2, {0, 1, 1}, e),  // eps x_c x_u
  };
  NormalizationFlags fl{true, true, true, false, true};
  return MapModel::polynomial("POLY3", three_block(), std::move(t), 1.0, 0.25, 1.0, 1.0, fl);
}

MapModel make_poly3b(double eps) {
  // the cutoff on eps x_c^2 moves the center rate by up to 3.1 eps, so varsigma is widened
  SpectralStructure st = three_block();
  st.varsigma = 0.2;
  auto base = make_poly3(eps);
  std::vector<PolyTerm> t = base.terms();
  t.push_back(term(1, {0, 2, 0}, dec(eps)));
  NormalizationFlags fl{true, true, true, false, true};
  return MapModel::polynomial("POLY3b", st, std::move(t), 1.0, 0.25, 1.0, 1.0, fl);
}

MapModel make_twou4(double eps) {
  SpectralStructure st;
  st.blocks = {{1, 0.5, BlockClass::stable},
               {1, 1.0, BlockClass::center},
               {1, 2.0, BlockClass::unstable},
               {1, 4.0, BlockClass::unstable}};
  st.ls_minus = 0.4;
  st.ls_plus = 0.6;
  st.lu_minus = 1.5;
  st.lu_plus = 5.0;
  st.varsigma = 0.1;
  st.K = 1.0;
  const std::string e = dec(eps);
  std::vector<PolyTerm> t;
  if (eps != 0.0) {
    t = {
        term(0, {1, 1, 0, 0}, e),  // eps x_c x_s
        term(1, {1, 0, 1, 0}, e),  // eps x_s x_u1
        term(2, {0, 1, 0, 1}, e),  // eps x_c x_u2, the center coupling
        term(2, {1, 0, 1, 0}, e),  // eps x_s x_u1
        term(2, {1, 0, 0, 1}, e),  // eps x_s x_u2
        term(3, {1, 0, 0, 1}, e),  // eps x_s x_u2
    };
  }
  return MapModel::polynomial("TWOU4", st, std::move(t), 1.0, 0.25, 0.6, 1.0, all_flags());
}

MapModel make_cex1(double mu) {
  if (!(mu > 0 && mu < 1)) throw ConfigError("CEX1 needs mu in (0,1)");
  SpectralStructure st;
  st.blocks = {{1, mu, BlockClass::stable}};
  st.ls_minus = 0.5 * mu;
  st.ls_plus = 0.5 * (1.0 + mu);
  st.varsigma = 0.0;
  st.K = 1.0;
  // F(x) = mu int_0^x (1 - 1/log t) dt = mu (x - li(x)), li(x) = Ei(log x), odd extension
  VecFn f = [mu](const Vec& x) {
    Vec y(1);
    const double a = std::abs(x(0));
    if (a == 0.0) {
      y(0) = 0.0;
    } else {
      if (!(a < 1.0)) throw NumericError("CEX1 is defined for |x| < 1");
      y(0) = -mu * std::expint(std::log(a)) * (x(0) > 0 ? 1.0 : -1.0);
    }
    return y;
  };
  MatFn df = [mu](const Vec& x) {
    Mat J(1, 1);
    const double a = std::abs(x(0));
    J(0, 0) = a == 0.0 ? 0.0 : -mu / std::log(a);
    return J;
  };
  // validity radius 0.1 keeps |Df| <= mu / log 10
  return MapModel::general("CEX1", st, f, df, 1.0, 0.25, 0.0, 0.1, all_flags());
}

MapModel make_smooth_contrast() {
  SpectralStructure st;
  st.blocks = {{1, 0.5, BlockClass::stable}};
  st.ls_minus = 0.25;
  st.ls_plus = 0.75;
  st.K = 1.0;
  return MapModel::polynomial("SMOOTH1", st, {term(0, {2}, "0.05")}, 1.0, 0.11, 0.11, 0.0, all_flags());
}

std::vector<MapModel> builtin_test_maps() {
  return {make_lin3(), make_poly3(), make_poly3b(), make_twou4(), make_cex1()};
}

MapModel catalog_lookup(const std::string& name) {
  if (name == "LIN3") return make_lin3();
  if (name == "POLY3") return make_poly3();
  if (name == "POLY3b") return make_poly3b();
  if (name == "TWOU4") return make_twou4();
  if (name == "CEX1") return make_cex1();
  if (name == "SMOOTH1") return make_smooth_contrast();
  throw ConfigError("unknown catalog map '" + name + "'");
}

}  // namespace phlin
