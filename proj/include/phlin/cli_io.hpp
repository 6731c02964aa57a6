#pragma once

#include <string>
#include <vector>

#include "phlin/verification.hpp"

namespace phlin {

enum ExitCode { kExitPass = 0, kExitConfig = 1, kExitNumeric = 2 };

struct RunConfig {
  std::string command;
  std::string map = "POLY3";  // catalog name
  std::string spec;           // JSON map spec; wins over map
  std::string from;           // verify: directory of a prior linearize run
  int grid = 0;               // points per axis, 0 picks the command default
  double tol = 0;             // 0 keeps the solver defaults
  int horizon = 20;
  double rho = 0;  // 0 selects the admissible midpoint
  std::string out = "phlin_out";
  unsigned seed = 1;
  int threads = 0;
  bool force_all = false;
};

// Throws ConfigError on inconsistent settings.
void validate(const RunConfig& cfg);
MapModel load_model(const RunConfig& cfg);

// Each writes into <out>/<command>/ and returns the exit code; ConfigError and
// NumericError propagate.
int cmd_foliation(const RunConfig& cfg);
int cmd_linearize(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg);
int run_command(const RunConfig& cfg);

// Parses argv (CLI11), runs, and maps exceptions to exit codes.
int cli_main(int argc, const char* const* argv);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace phlin
