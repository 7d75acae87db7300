#include "fibersim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "fibersim/compiler.hpp"
#include "fibersim/error.hpp"
#include "fibersim/report.hpp"
#include "fibersim/tensor_io.hpp"

namespace fibersim {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t DefaultSeed() {
  if (const char* env = std::getenv("FIBERSIM_SEED")) {
    try {
      std::size_t used = 0;
      std::uint64_t seed = std::stoull(env, &used);
      if (used == std::string(env).size()) return seed;
    } catch (const std::exception&) {
    }
    throw Error("io", std::string("FIBERSIM_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

Tensor LoadInput(const ProblemSpec& spec, const std::string& name, const std::string& source) {
  const TensorDecl* decl = spec.tensor(name);
  if (!decl) throw Error("io", "--tensor names undeclared tensor " + name);
  if (source.rfind("gen:", 0) == 0) {
    GenSpec base;
    // Tensors without an explicit seed get distinct streams.
    base.seed = DefaultSeed();
    for (std::size_t i = 0; i < spec.declaration.size(); ++i)
      if (spec.declaration[i].name == name) base.seed += i;
    GenSpec g = ParseGenSpec(source.substr(4), base);
    if (g.shape.empty()) {
      for (const auto& r : decl->ranks) {
        auto it = spec.shape.find(r);
        if (it == spec.shape.end())
          throw Error("tensor_io", "generator for " + name + " has no shape and einsum.shape lacks " + r);
        g.shape.push_back(it->second);
      }
    }
    if (g.shape.size() != decl->ranks.size())
      throw Error("tensor_io", "generator shape for " + name + " has " + std::to_string(g.shape.size()) +
                                   " ranks, declaration has " + std::to_string(decl->ranks.size()));
    return Generate(g, name, decl->ranks);
  }
  if (decl->ranks.size() != 2)
    throw Error("tensor_io", "Matrix Market input " + source + " needs a 2-rank tensor, " + name + " has " +
                                 std::to_string(decl->ranks.size()));
  return LoadMatrixMarket(source, name, decl->ranks);
}

namespace {

std::string Hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw Error("io", "cannot write " + path.string());
}

}  // namespace

RunResult CmdRun(const RunConfig& config) {
  RunResult r;
  r.spec = LoadSpec(config.spec_path);
  ValidationReport v = Validate(r.spec);
  if (!v.ok()) {
    std::string msg = "invalid spec:";
    for (const auto& s : v.violations) msg += "\n  " + s;
    throw Error("spec", msg);
  }

  json run;
  run["spec"] = config.spec_path;
  run["energy"] = config.energy_path.empty() ? "default" : config.energy_path;
  run["inputs"] = json::object();
  for (const auto& [name, source] : config.tensors) {
    Tensor t = LoadInput(r.spec, name, source);
    run["inputs"][name] = {{"source", source}, {"shape", t.shape()}, {"nnz", t.nnz()}, {"checksum", Hex(Checksum(t))}};
    r.inputs[name] = std::move(t);
  }
  // Every tensor read before it is written must be bound.
  std::set<std::string> written;
  for (const auto& e : r.spec.einsums) {
    for (const auto& in : e.inputs())
      if (!written.count(in) && !r.inputs.count(in)) throw Error("io", "no --tensor given for input " + in);
    written.insert(e.output);
  }

  std::vector<LoopNest> nests = CompileCascade(r.spec);
  for (const auto& n : nests) r.ir += n.str();
  r.exec = ExecuteCascade(r.spec, r.inputs);
  EnergyTable energy = config.energy_path.empty() ? EnergyTable::Default() : EnergyTable::Load(config.energy_path);
  r.report = EvaluateModel(r.spec, r.exec, ScheduleFusion(r.spec), energy);
  r.json = ReportJson(r.report, run);
  r.table = ReportTable(r.report);

  if (!config.out_dir.empty()) {
    fs::path dir(config.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("io", "cannot create " + dir.string() + ": " + ec.message());
    WriteFile(dir / "report.json", r.json.dump(2) + "\n");
    WriteFile(dir / "report.txt", r.table);
    if (config.dump_ir) WriteFile(dir / "ir.txt", r.ir);
    if (config.trace)
      for (const auto& t : r.exec.traces) WriteFile(dir / ("trace_" + t.output + ".csv"), TraceCsv(t));
  }
  return r;
}

int Main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fibersim: sparse tensor accelerator specification compiler and simulator"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a spec and list every violation");
  validate->add_option("spec", validate_path, "Spec YAML")->required();

  RunConfig config;
  std::vector<std::string> tensor_args;
  auto* run = app.add_subcommand("run", "Execute a cascade and model its cost");
  run->add_option("spec", config.spec_path, "Spec YAML")->required();
  run->add_option("--tensor", tensor_args, "NAME=PATH or NAME=gen:shape=AxB,density=D,seed=S")->take_all();
  run->add_option("--energy", config.energy_path, "Energy table (key = pJ)");
  run->add_option("--out", config.out_dir, "Directory for report.json, report.txt, traces and IR");
  run->add_flag("--trace", config.trace, "Write trace_<einsum>.csv");
  run->add_flag("--dump-ir", config.dump_ir, "Write ir.txt (or print it without --out)");
  run->add_flag("--strict", config.strict, "Exit 1 when the report carries diagnostics");

  std::string diff_a, diff_b;
  auto* diff = app.add_subcommand("diff", "Compare two report JSONs");
  diff->add_option("a", diff_a, "First report")->required();
  diff->add_option("b", diff_b, "Second report")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (e.get_name() == "CallForAllHelp" ? app.help("", CLI::AppFormatMode::All) : app.help());
      return kExitOk;
    }
    err << "usage: " << e.what() << '\n';
    return kExitUsage;
  }

  auto fail = [&](const Error& e) {
    err << e.module() << ": " << e.what() << '\n';
    return e.module() == "io" || e.module() == "tensor_io" || e.module() == "report" ? kExitUsage : kExitDiagnostics;
  };

  try {
    if (*validate) {
      ProblemSpec spec = LoadSpec(validate_path);
      ValidationReport v = Validate(spec);
      for (const auto& s : v.violations) err << s << '\n';
      return v.ok() ? kExitOk : kExitDiagnostics;
    }
    if (*run) {
      for (const auto& arg : tensor_args) {
        auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0) {
          err << "usage: --tensor expects NAME=SOURCE, got '" << arg << "'\n";
          return kExitUsage;
        }
        config.tensors[arg.substr(0, eq)] = arg.substr(eq + 1);
      }
      RunResult r = CmdRun(config);
      out << r.table;
      if (config.dump_ir && config.out_dir.empty()) out << '\n' << r.ir;
      return config.strict && !r.report.diagnostics.empty() ? kExitDiagnostics : kExitOk;
    }
    auto load = [](const std::string& path) {
      std::ifstream f(path);
      if (!f) throw Error("io", "cannot open " + path);
      try {
        return json::parse(f);
      } catch (const json::exception& e) {
        throw Error("io", path + ": " + e.what());
      }
    };
    json a = load(diff_a), b = load(diff_b);
    auto rows = DiffReports(a, b);
    out << DiffTable(rows);
    return kExitOk;
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace fibersim
