#include <fstream>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "phlin/map_model.hpp"

namespace phlin {

using nlohmann::json;

namespace {

BlockClass parse_class(const std::string& s) {
  if (s == "stable" || s == "s") return BlockClass::stable;
  if (s == "center" || s == "c") return BlockClass::center;
  if (s == "unstable" || s == "u") return BlockClass::unstable;
  throw ConfigError("unknown block class '" + s + "'");
}

std::string class_name(BlockClass c) {
  switch (c) {
    case BlockClass::stable: return "stable";
    case BlockClass::center: return "center";
    case BlockClass::unstable: return "unstable";
  }
  return "?";
}

template <class T>
T get_or(const json& j, const char* key, T dflt) {
  return j.contains(key) ? j.at(key).get<T>() : dflt;
}

}  // namespace

MapModel parse_map_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("map spec is not valid JSON: ") + e.what());
  }
  try {
    SpectralStructure st;
    for (const auto& b : j.at("blocks"))
      st.blocks.push_back({b.at("size").get<int>(), b.at("modulus").get<double>(),
                           parse_class(b.at("class").get<std::string>())});
    const Layout L = st.layout();
    const int dims = j.at("dims").get<int>();
    if (dims != L.dim()) throw ConfigError("dims does not match the sum of block sizes");
    const auto ls = st.stable_moduli();
    const auto lu = st.unstable_moduli();
    double ls_lo = ls.empty() ? 0.5 : ls.front(), ls_hi = ls.empty() ? 0.5 : ls.back();
    double lu_lo = lu.empty() ? 2.0 : lu.front(), lu_hi = lu.empty() ? 2.0 : lu.back();
    const json env = j.value("envelopes", json::object());
    st.ls_minus = get_or(env, "ls_minus", 0.8 * ls_lo);
    st.ls_plus = get_or(env, "ls_plus", 0.5 * (ls_hi + 1.0));
    st.lu_minus = get_or(env, "lu_minus", 0.5 * (1.0 + lu_lo));
    st.lu_plus = get_or(env, "lu_plus", 1.25 * lu_hi);
    st.varsigma = get_or(env, "varsigma", 0.1);
    st.K = get_or(env, "K", 1.0);

    static const std::regex decimal(R"(^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$)");
    std::vector<PolyTerm> terms;
    for (const auto& t : j.value("terms", json::array())) {
      if (!t.at("coefficient").is_string())
        throw ConfigError("term coefficient must be an exact decimal string");
      const std::string c = t.at("coefficient").get<std::string>();
      if (!std::regex_match(c, decimal)) throw ConfigError("bad decimal coefficient '" + c + "'");
      terms.push_back(term(t.at("target").get<int>(), t.at("exponents").get<std::vector<int>>(), c));
    }
    NormalizationFlags fl;
    const json f = j.value("flags", json::object());
    fl.center_manifold = get_or(f, "center_manifold", false);
    fl.block_diag_center = get_or(f, "block_diag_center", false);
    fl.cs_invariant = get_or(f, "cs_invariant", false);
    fl.cu_invariant = get_or(f, "cu_invariant", false);
    fl.stable_flat = get_or(f, "stable_flat", false);
    return MapModel::polynomial(j.value("name", std::string("SPEC")), st, std::move(terms),
                                get_or(j, "alpha", 1.0), get_or(j, "delta_f", 0.25),
                                get_or(j, "M", 1.0), get_or(j, "radius", 1.0), fl);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("map spec: ") + e.what());
  }
}

MapModel load_map_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open map spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_map_spec(ss.str());
}

std::string map_spec_json(const MapModel& m) {
  if (!m.is_polynomial()) throw ConfigError("only polynomial models serialize to a map spec");
  json j;
  j["name"] = m.name();
  j["dims"] = m.layout().dim();
  json blocks = json::array();
  for (const auto& b : m.structure().blocks)
    blocks.push_back({{"size", b.size}, {"modulus", b.modulus}, {"class", class_name(b.cls)}});
  j["blocks"] = blocks;
  const auto& st = m.structure();
  j["envelopes"] = {{"ls_minus", st.ls_minus}, {"ls_plus", st.ls_plus}, {"lu_minus", st.lu_minus},
                    {"lu_plus", st.lu_plus},   {"varsigma", st.varsigma}, {"K", st.K}};
  json terms = json::array();
  for (const auto& t : m.terms())
    terms.push_back({{"target", t.target}, {"exponents", t.exponents}, {"coefficient", t.coefficient}});
  j["terms"] = terms;
  j["alpha"] = m.alpha();
  j["delta_f"] = m.delta_f();
  j["M"] = m.holder_M();
  j["radius"] = m.radius();
  const auto& f = m.flags();
  j["flags"] = {{"center_manifold", f.center_manifold}, {"block_diag_center", f.block_diag_center},
                {"cs_invariant", f.cs_invariant},       {"cu_invariant", f.cu_invariant},
                {"stable_flat", f.stable_flat}};
  return j.dump(2);
}

}  // namespace phlin
