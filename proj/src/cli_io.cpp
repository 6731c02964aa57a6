#include "phlin/cli_io.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace phlin {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void write_text(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void validate(const RunConfig& c) {
  if (c.spec.empty() && c.map.empty()) throw ConfigError("no map given");
  if (c.grid < 0) throw ConfigError("--grid must be positive");
  if (c.tol < 0) throw ConfigError("--tol must be positive");
  if (c.horizon <= 0) throw ConfigError("--horizon must be positive");
  if (c.rho < 0) throw ConfigError("--rho must be positive");
  if (c.out.empty()) throw ConfigError("--out must name a directory");
}

MapModel load_model(const RunConfig& c) {
  if (!c.spec.empty()) return load_map_spec(c.spec);
  return catalog_lookup(c.map);
}

namespace {

std::string dir_of(const RunConfig& c) { return (fs::path(c.out) / c.command).string(); }
std::string file_in(const RunConfig& c, const std::string& name) { return (fs::path(dir_of(c)) / name).string(); }

std::string vec_cells(const Vec& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += "," + fmt17(v(i));
  return s;
}

ojson mat_json(const Mat& M) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    ojson r = ojson::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(fmt17(M(i, j)));
    rows.push_back(r);
  }
  return rows;
}

ojson config_json(const RunConfig& c) {
  ojson j;
  j["map"] = c.spec.empty() ? c.map : "";
  j["spec"] = c.spec;
  j["grid"] = c.grid;
  j["tol"] = fmt17(c.tol);
  j["horizon"] = c.horizon;
  j["rho"] = fmt17(c.rho);
  j["seed"] = c.seed;
  j["force_all"] = c.force_all;
  return j;
}

ojson structure_json(const MapModel& F) {
  ojson j;
  j["name"] = F.name();
  j["layout"] = {{"s", F.layout().ns()}, {"c", F.layout().nc()}, {"u", F.layout().nu()}};
  ojson blocks = ojson::array();
  for (const auto& b : F.structure().blocks)
    blocks.push_back({{"size", b.size},
                      {"modulus", fmt17(b.modulus)},
                      {"class", b.cls == BlockClass::stable ? "stable" : b.cls == BlockClass::center ? "center" : "unstable"}});
  j["blocks"] = blocks;
  return j;
}

LPConfig lp_config(const RunConfig& c) {
  LPConfig lp;
  lp.rho = c.rho;
  if (c.tol > 0) lp.tol = c.tol;
  return lp;
}

SuiteConfig suite_config(const RunConfig& c) {
  SuiteConfig sc;
  sc.grid = c.grid;
  sc.seed = c.seed;
  sc.threads = c.threads;
  sc.horizon = c.horizon;
  return sc;
}

void require_unstable(const MapModel& F, const std::string& what) {
  if (F.layout().nu() == 0)
    throw ConfigError(what + " needs an unstable block; " + F.name() + " has none (use verify for the demo)");
}

std::shared_ptr<const MapModel> shared_model(const RunConfig& c) { return std::make_shared<MapModel>(load_model(c)); }

Pipeline pipeline_for(const std::shared_ptr<const MapModel>& F, const RunConfig& c) {
  PipelineConfig pc;
  pc.force_all = c.force_all;
  try {
    return run_pipeline(F, pc);
  } catch (const NumericError& e) {
    throw NumericError(std::string("normalization stage failed: ") + e.what());
  }
}

LinearizationConfig linearization_config(const RunConfig& c) {
  LinearizationConfig lc;
  lc.lp.rho = c.rho;
  if (c.tol > 0) lc.tol = c.tol;
  return lc;
}

void write_record(const RunConfig& c, const CheckRecord& r) { write_text(file_in(c, r.name + ".csv"), r.table.csv()); }

}  // namespace

int cmd_foliation(const RunConfig& c) {
  const MapModel F = load_model(c);
  require_unstable(F, "foliation");
  const Layout& L = F.layout();
  const FoliationChart chart(F, F.structure(), lp_config(c));
  const int n = c.grid > 0 ? c.grid : 5;
  const auto xs = inner_grid(L, 0.2, n);
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<Vec> zus;
  for (const Vec& x : xs) {
    Vec zu = project(L, x, Proj::u);
    for (Eigen::Index i = 0; i < zu.size(); ++i) zu(i) += u(rng);
    zus.push_back(zu);
  }
  std::vector<Vec> leaf(xs.size());
  std::vector<SampleCheck> orc(xs.size());
  std::vector<double> flat(xs.size());
  parallel_for(
      xs.size(),
      [&](size_t i) {
        leaf[i] = chart.leaf_point(xs[i], zus[i]);
        flat[i] = (project(L, leaf[i], Proj::cs) - project(L, xs[i], Proj::cs)).norm();
        orc[i] = oracle_agreement(F, F.structure(), {xs[i]}, {zus[i]}, c.horizon, 10, chart.config());
      },
      c.threads);

  std::string head = "sample";
  for (int i = 0; i < L.dim(); ++i) head += ",x" + std::to_string(i);
  for (int i = 0; i < L.nu(); ++i) head += ",z_u" + std::to_string(i);
  for (int i = 0; i < L.dim(); ++i) head += ",leaf" + std::to_string(i);
  std::string samples = head + "\n", oracle = "sample,deviation,bound,member\n";
  int agree = 0;
  double flatness = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    samples += std::to_string(i) + vec_cells(xs[i]) + vec_cells(zus[i]) + vec_cells(leaf[i]) + "\n";
    const auto& row = orc[i].table.rows.front();
    oracle += std::to_string(i) + "," + row[1] + "," + row[2] + "," + row[3] + "\n";
    agree += orc[i].agree;
    flatness = std::max(flatness, flat[i]);
  }
  const bool pass = agree == static_cast<int>(xs.size());
  write_text(file_in(c, "leaf_samples.csv"), samples);
  write_text(file_in(c, "oracle.csv"), oracle);
  ojson m;
  m["command"] = "foliation";
  m["config"] = config_json(c);
  m["model"] = structure_json(F);
  m["rho"] = fmt17(chart.config().rho);
  m["truncation"] = chart.config().N;
  m["samples"] = xs.size();
  m["oracle_agreement"] = agree;
  m["chart_flatness"] = fmt17(flatness);
  m["pass"] = pass;
  m["files"] = {"leaf_samples.csv", "oracle.csv"};
  write_text(file_in(c, "manifest.json"), m.dump(2) + "\n");
  std::cout << "foliation " << F.name() << ": oracle agreement " << agree << "/" << xs.size() << ", chart flatness "
            << fmt17(flatness) << "\n";
  return pass ? kExitPass : kExitNumeric;
}

int cmd_linearize(const RunConfig& c) {
  const auto F = shared_model(c);
  require_unstable(*F, "linearize");
  const Layout& L = F->layout();
  const Pipeline P = pipeline_for(F, c);
  const ConjugacyChain chain(P, linearization_config(c));
  const SuiteConfig sc = suite_config(c);

  const CheckRecord conj = check_conjugacy(chain, sc);
  const CheckRecord coh = check_cohomology(chain, sc);
  write_text(file_in(c, "residuals.csv"), conj.table.csv());
  write_text(file_in(c, "cohomology.csv"), coh.table.csv());

  std::string stages = "stage,ran,reason,residual\n";
  for (const auto& s : P.manifest) stages += s.name + "," + (s.ran ? "1" : "0") + "," + s.reason + "," + fmt17(s.residual) + "\n";
  write_text(file_in(c, "stages.csv"), stages);

  // normal form coefficients along the center
  const NormalForm nf = chain.normal_form();
  std::string nfcsv = "c";
  for (int i = 0; i < L.ns() * L.ns(); ++i) nfcsv += ",A_s" + std::to_string(i);
  for (int i = 0; i < L.nu() * L.nu(); ++i) nfcsv += ",A_u" + std::to_string(i);
  for (int i = 0; i < L.nc(); ++i) nfcsv += ",g_c" + std::to_string(i);
  nfcsv += "\n";
  if (L.nc() == 1) {
    for (int k = 0; k <= 10; ++k) {
      Vec yc(1);
      yc(0) = -0.2 + 0.04 * k;
      const Mat As = nf.A_s(yc), Au = nf.A_u(yc);
      nfcsv += fmt17(yc(0)) + vec_cells(Eigen::Map<const Vec>(As.data(), As.size())) +
               vec_cells(Eigen::Map<const Vec>(Au.data(), Au.size())) + vec_cells(nf.g_c(yc)) + "\n";
    }
  }
  write_text(file_in(c, "normal_form.csv"), nfcsv);

  const bool pass = conj.pass && coh.measured <= 1e-6;
  ojson m;
  m["command"] = "linearize";
  m["config"] = config_json(c);
  m["model"] = structure_json(*F);
  if (F->is_polynomial()) m["map_spec"] = ojson::parse(map_spec_json(*F));
  m["transformation_stack"] = ojson::parse(P.manifest_json());
  const Vec zc = Vec::Zero(L.nc());
  m["normal_form"] = {{"A_s(0)", mat_json(nf.A_s(zc))},
                      {"A_u(0)", mat_json(nf.A_u(zc))},
                      {"g_c", "pi_c F_T on X_c, tabulated in normal_form.csv"}};
  m["chain"] = ojson::array({
      {{"map", "S^-1"}, {"stages", P.S->name()}},
      {{"map", "H"}, {"role", "unstable foliation of F_T"}, {"rho", fmt17(chain.chart().config().rho)}},
      {{"map", "Theta"},
       {"role", "cocycle reduction x_u -> P_u(x_cs) x_u"},
       {"trivial_splitting", chain.transfer().trivial_splitting()},
       {"cohomology_residual", fmt17(coh.measured)}},
      {{"map", "Phi"}, {"role", "fiber linearization, backward and forward limits"}},
      {{"map", "psi"}, {"role", "linearization of the stable part on X_cs"}},
  });
  m["residual"] = {{"grid", conj.grid},
                   {"max", fmt17(conj.measured)},
                   {"threshold", fmt17(conj.threshold)},
                   {"note", conj.note}};
  m["cohomology"] = {{"max", fmt17(coh.measured)}, {"threshold", "1e-06"}, {"note", coh.note}};
  m["pass"] = pass;
  m["files"] = {"residuals.csv", "cohomology.csv", "stages.csv", "normal_form.csv"};
  write_text(file_in(c, "manifest.json"), m.dump(2) + "\n");
  std::cout << "linearize " << F->name() << ": stack " << P.S->name() << ", conjugacy residual " << fmt17(conj.measured)
            << ", cohomology residual " << fmt17(coh.measured) << "\n";
  return pass ? kExitPass : kExitNumeric;
}

int cmd_verify(const RunConfig& cin) {
  RunConfig c = cin;
  if (!c.from.empty()) {
    const std::string path = (fs::path(c.from) / "manifest.json").string();
    if (!fs::exists(path)) throw ConfigError("no linearize manifest at '" + path + "'");
    const ojson m = ojson::parse(read_text(path));
    if (!m.contains("command") || m["command"] != "linearize") throw ConfigError("'" + path + "' is not a linearize manifest");
    c.map = m["config"]["map"].get<std::string>();
    c.spec = m["config"]["spec"].get<std::string>();
  }
  const auto F = shared_model(c);
  const Layout& L = F->layout();
  const SuiteConfig sc = suite_config(c);
  VerificationReport rep;
  rep.environment = {{"map", F->name()},
                     {"seed", std::to_string(c.seed)},
                     {"grid", c.grid > 0 ? std::to_string(c.grid) : "default"},
                     {"horizon", std::to_string(c.horizon)},
                     {"lp_truncation", std::to_string(LPConfig{}.N)},
                     {"lp_tol", fmt17(c.tol > 0 ? c.tol : LPConfig{}.tol)},
                     {"limit_tol", fmt17(c.tol > 0 ? c.tol : LinearizationConfig{}.tol)},
                     {"box", fmt17(sc.box)}};
  if (F->has_analytic_jacobian()) rep.records.push_back(check_jacobian(*F, sc));
  if (L.nu() > 0) {
    rep.records.push_back(check_lp_orbit(*F, sc, lp_config(c)));
    rep.records.push_back(check_chart_identity(*F, sc, lp_config(c)));
    rep.records.push_back(check_foliation(*F, sc, lp_config(c)));
    const ConjugacyChain chain(pipeline_for(F, c), linearization_config(c));
    if (F->is_polynomial() && F->terms().empty()) {
      CheckRecord r = check_conjugacy(chain, sc);
      double dev = 0;
      for (const Vec& y : inner_grid(L, sc.box, 5)) dev = std::max(dev, (chain.conj(y) - y).norm());
      r.name = "linear_identity_" + F->name();
      r.criterion = "1";
      r.threshold = 1e-12;
      r.measured = std::max(r.measured, dev);
      r.pass = r.measured <= 1e-12;
      r.note = "max |H(y) - y| " + fmt17(dev) + "; " + r.note;
      rep.records.push_back(r);
    }
    rep.records.push_back(check_cohomology(chain, sc));
    rep.records.push_back(check_reduction(chain, sc));
    rep.records.push_back(check_fiber_linearization(chain, sc));
    rep.records.push_back(check_conjugacy(chain, sc));
    rep.records.push_back(check_center_fixed(chain, sc));
    rep.records.push_back(check_differentiability(chain, sc));
  }
  rep.records.push_back(check_holder_calculator());
  if (F->name() == "CEX1")
    rep.records.push_back(check_sharpness(counterexample_demo(F->linear_part()(0, 0), 4, 60, 120)));
  for (const auto& r : rep.records) write_record(c, r);
  write_text(file_in(c, "verification.json"), rep.json());
  for (const auto& r : rep.records)
    std::cout << (r.pass ? "PASS" : "FAIL") << (r.gating ? "" : " (report-only)") << " " << r.name << " measured "
              << fmt17(r.measured) << " threshold " << fmt17(r.threshold) << "\n";
  return rep.all_pass() ? kExitPass : kExitNumeric;
}

int cmd_report(const RunConfig& c) {
  const fs::path base(c.out);
  const fs::path vdir = base / "verify";
  if (!fs::exists(vdir / "verification.json")) throw ConfigError("no verify outputs under '" + vdir.string() + "'");
  const ojson rep = ojson::parse(read_text((vdir / "verification.json").string()));
  std::vector<std::string> written;

  // exponent fits: the differentiability tables already have the tidy layout
  std::string fits = "center_point,scale,direction_id,remainder\n";
  std::string residuals = "check,point,value\n";
  for (const auto& r : rep["records"]) {
    const std::string name = r["name"].get<std::string>();
    const fs::path p = vdir / (name + ".csv");
    if (!fs::exists(p)) continue;
    std::istringstream in(read_text(p.string()));
    std::string line;
    std::getline(in, line);
    const bool is_fit = line == "center_point,scale,direction_id,remainder";
    const bool is_check = line == "point,measured,threshold,pass";
    while (std::getline(in, line)) {
      if (is_fit) fits += line + "\n";
      if (is_check) residuals += name + "," + line.substr(0, line.find(',', line.find(',') + 1)) + "\n";
    }
  }
  const std::string odir = (base / "report").string();
  write_text((fs::path(odir) / "exponent_fits.csv").string(), fits);
  write_text((fs::path(odir) / "residuals.csv").string(), residuals);
  written.push_back("exponent_fits.csv");
  written.push_back("residuals.csv");

  // leaf cross-sections from a stored foliation run, one coordinate per row
  const fs::path leaf = base / "foliation" / "leaf_samples.csv";
  if (fs::exists(leaf)) {
    std::istringstream in(read_text(leaf.string()));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> names;
    {
      std::istringstream h(line);
      std::string cell;
      while (std::getline(h, cell, ',')) names.push_back(cell);
    }
    std::string out = "sample,coordinate,value\n";
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string cell, sample;
      std::getline(row, sample, ',');
      for (size_t k = 1; std::getline(row, cell, ','); ++k) out += sample + "," + names.at(k) + "," + cell + "\n";
    }
    write_text((fs::path(odir) / "leaf_cross_sections.csv").string(), out);
    written.push_back("leaf_cross_sections.csv");
  }
  ojson m;
  m["command"] = "report";
  m["source"] = vdir.string();
  m["files"] = written;
  write_text((fs::path(odir) / "manifest.json").string(), m.dump(2) + "\n");
  std::cout << "report: " << written.size() << " files in " << odir << "\n";
  return kExitPass;
}

int run_command(const RunConfig& c) {
  validate(c);
  if (c.command == "foliation") return cmd_foliation(c);
  if (c.command == "linearize") return cmd_linearize(c);
  if (c.command == "verify") return cmd_verify(c);
  if (c.command == "report") return cmd_report(c);
  throw ConfigError("unknown command '" + c.command + "'");
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Linearization of partially hyperbolic fixed points"};
  app.set_config("--config", "", "TOML or INI file; explicit flags win");
  app.require_subcommand(1);
  RunConfig cfg;
  auto add_flags = [&](CLI::App* s) {
    s->add_option("--map", cfg.map, "catalog map (LIN3, POLY3, POLY3b, TWOU4, CEX1)");
    s->add_option("--spec", cfg.spec, "JSON map spec file");
    s->add_option("--grid", cfg.grid, "points per axis");
    s->add_option("--tol", cfg.tol, "solver tolerance");
    s->add_option("--horizon", cfg.horizon, "oracle horizon");
    s->add_option("--rho", cfg.rho, "LP weight of the unstable foliation");
    s->add_option("--out", cfg.out, "output directory");
    s->add_option("--seed", cfg.seed, "seed of the sampled checks");
    s->add_option("--threads", cfg.threads, "worker threads, 0 for all cores");
    s->add_flag("--force-all", cfg.force_all, "run every normalization stage");
  };
  for (const char* name : {"foliation", "linearize", "verify", "report"}) {
    auto* s = app.add_subcommand(name);
    add_flags(s);
    if (std::string(name) == "verify") s->add_option("--from", cfg.from, "directory of a linearize run");
    s->callback([&cfg, name] { cfg.command = name; });
  }
  app.get_subcommand("foliation")->description("unstable foliation chart samples and oracle agreement");
  app.get_subcommand("linearize")->description("normalization stack, normal form and conjugacy residuals");
  app.get_subcommand("verify")->description("verification suites and JSON report");
  app.get_subcommand("report")->description("plot-ready CSV bundles from verify outputs");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitConfig;
  }
  try {
    return run_command(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace phlin
