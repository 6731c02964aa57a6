#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "phlin/cli_io.hpp"

using namespace phlin;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Line {
  int id;
  std::string what;
  double measured, threshold;
  bool pass;
  bool gating = true;
  double seconds = 0;
  std::string note;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::shared_ptr<const MapModel> model(const std::string& name) { return std::make_shared<MapModel>(catalog_lookup(name)); }

ConjugacyChain chain(const std::string& name) { return ConjugacyChain(run_pipeline(model(name))); }

// worst record of a group: pass only when all pass, measured is the max
Line merge(int id, const std::string& what, const std::vector<CheckRecord>& rs) {
  Line l{id, what, 0, rs.front().threshold, true};
  std::string note;
  for (const auto& r : rs) {
    l.measured = std::max(l.measured, r.measured);
    l.pass = l.pass && r.pass;
    l.seconds += r.runtime;
    note += (note.empty() ? "" : "; ") + r.name + " " + fmt17(r.measured) + (r.pass ? "" : " FAIL");
  }
  l.note = note;
  return l;
}

std::map<std::string, std::string> csv_bodies(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv")
      out[fs::relative(e.path(), root).string()] = read_text(e.path().string());
  return out;
}

}  // namespace

int main() {
  std::vector<Line> lines;
  const SuiteConfig sc;  // 10^3 grids in 3-D

  {  // 1
    const auto t0 = Clock::now();
    const ConjugacyChain ch = chain("LIN3");
    const CheckRecord r = check_conjugacy(ch, sc);
    double dev = 0;
    for (const Vec& y : inner_grid(ch.layout(), sc.box, 10)) dev = std::max(dev, (ch.conj(y) - y).norm());
    const double t = since(t0);
    const double m = std::max(r.measured, dev);
    lines.push_back({1, "linear identity LIN3 (" + r.grid + ")", m, 1e-12, m <= 1e-12 && t < 5, true, t,
                     "max |H(y) - y| " + fmt17(dev) + ", runtime limit 5 s"});
  }
  {  // 2
    const auto t0 = Clock::now();
    const CheckRecord r = check_lp_orbit(catalog_lookup("POLY3"), sc);
    const double t = since(t0);
    lines.push_back({2, "LP/orbit equivalence POLY3", r.measured, 1e-8, r.pass && t < 30, true, t, "runtime limit 30 s"});
  }
  {  // 3
    std::vector<CheckRecord> rs;
    for (const char* m : {"POLY3", "POLY3b", "TWOU4"}) rs.push_back(check_chart_identity(catalog_lookup(m), sc));
    lines.push_back(merge(3, "chart identities", rs));
  }
  {  // 4
    std::vector<CheckRecord> rs;
    for (const char* m : {"POLY3", "POLY3b"}) rs.push_back(check_foliation(catalog_lookup(m), sc));
    Line l = merge(4, "foliation invariance and oracle agreement (fraction)", rs);
    l.measured = 1;
    for (const auto& r : rs) l.measured = std::min(l.measured, r.measured);
    lines.push_back(l);
  }
  const ConjugacyChain poly3 = chain("POLY3");
  const ConjugacyChain poly3b = chain("POLY3b");
  const ConjugacyChain twou4 = chain("TWOU4");
  lines.push_back(merge(5, "cocycle cohomology POLY3, TWOU4", {check_cohomology(poly3, sc), check_cohomology(twou4, sc)}));
  lines.push_back(merge(6, "reduction TWOU4", {check_reduction(twou4, sc)}));
  lines.push_back(merge(7, "fiber linearization POLY3", {check_fiber_linearization(poly3, sc)}));
  {  // 8
    std::vector<CheckRecord> rs;
    bool fast = true;
    for (const ConjugacyChain* ch : {&poly3, &poly3b, &twou4}) {
      const CheckRecord c = check_conjugacy(*ch, sc);
      const CheckRecord f = check_center_fixed(*ch, sc);
      fast = fast && c.runtime + f.runtime < 300;
      rs.push_back(c);
      rs.push_back(f);
    }
    Line l = merge(8, "full conjugacy POLY3, POLY3b, TWOU4", rs);
    l.threshold = 1e-6;
    l.pass = l.pass && fast;
    l.note += "; runtime limit 5 min per map";
    lines.push_back(l);
  }
  {  // 9
    const CheckRecord r = check_differentiability(poly3, sc);
    lines.push_back({9, "differentiability on the center POLY3 (min slope)", r.measured, 1.05, r.pass, true, r.runtime,
                     r.note});
  }
  lines.push_back(merge(10, "Holder calculator", {check_holder_calculator()}));
  {  // 11
    const CheckRecord r = check_sharpness(counterexample_demo(0.5, 4, 60, 120));
    lines.push_back({11, "sharpness demo CEX1 vs smooth contrast (min slope)", r.measured, 1.05, r.pass, false,
                     r.runtime, r.note});
  }
  {  // 12
    const auto t0 = Clock::now();
    const fs::path base = fs::temp_directory_path() / "phlin_acceptance";
    fs::remove_all(base);
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* tag : {"a", "b"}) {
      RunConfig c;
      c.out = (base / tag).string();
      c.map = "POLY3";
      c.grid = 4;
      c.seed = 7;
      for (const char* cmd : {"foliation", "linearize", "verify", "report"}) {
        c.command = cmd;
        run_command(c);
      }
      c.map = "TWOU4";
      c.grid = 3;
      c.command = "linearize";
      c.out = (base / tag / "twou4").string();
      run_command(c);
      runs.push_back(csv_bodies(base / tag));
    }
    int differ = 0;
    for (const auto& [k, v] : runs[0]) differ += !runs[1].count(k) || runs[1].at(k) != v;
    const bool same = differ == 0 && runs[0].size() == runs[1].size() && !runs[0].empty();
    lines.push_back({12, "determinism of CSV outputs", static_cast<double>(differ), 0, same, true, since(t0),
                     std::to_string(runs[0].size()) + " CSV files compared byte for byte"});
    fs::remove_all(base);
  }

  bool ok = true;
  for (const auto& l : lines) {
    std::cout << (l.pass ? "PASS" : "FAIL") << " " << l.id << " " << l.what << ": measured " << fmt17(l.measured)
              << " threshold " << fmt17(l.threshold) << (l.gating ? "" : " [report-only]") << " (" << l.seconds
              << " s)";
    if (!l.note.empty()) std::cout << " | " << l.note;
    std::cout << "\n";
    if (l.gating) ok = ok && l.pass;
  }
  return ok ? 0 : 1;
}
