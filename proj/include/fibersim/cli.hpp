#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fibersim/components.hpp"
#include "fibersim/executor.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

enum ExitCode { kExitOk = 0, kExitDiagnostics = 1, kExitUsage = 2 };

struct RunConfig {
  std::string spec_path;
  // tensor name -> file path, or "gen:shape=...,density=...,seed=..."
  std::map<std::string, std::string> tensors;
  std::string energy_path;  // empty: built-in table
  std::string out_dir;      // empty: write nothing
  bool trace = false;
  bool dump_ir = false;
  bool strict = false;
};

struct RunResult {
  ProblemSpec spec;
  TensorMap inputs;
  ExecResult exec;
  ModelReport report;
  nlohmann::json json;  // the report document
  std::string table;    // the text rendering
  std::string ir;       // every compiled loop nest
};

// Default generator seed, or FIBERSIM_SEED when set.
std::uint64_t DefaultSeed();

// Builds the input tensor for `source` in the declared rank order of `name`.
// Generated tensors take their shape from the spec's einsum.shape when the
// generator string gives none.
Tensor LoadInput(const ProblemSpec& spec, const std::string& name, const std::string& source);

// parse, validate, compile, execute, model; writes artifacts when out_dir is
// set. Throws Error on failure; validation failures throw Error("spec").
RunResult CmdRun(const RunConfig& config);

// Entry point of the command-line tool; returns the process exit code.
int Main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fibersim
