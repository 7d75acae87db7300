#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "fibersim/error.hpp"
#include "fibersim/iteration_space.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

namespace {

[[noreturn]] void Fail(const YAML::Node& at, const std::string& msg) {
  const auto& m = at.Mark();
  if (m.is_null()) throw SpecError(msg);
  throw SpecError(msg, m.line + 1, m.column + 1);
}

std::string Scalar(const YAML::Node& n, const std::string& what) {
  if (!n.IsScalar()) Fail(n, what + " must be a scalar");
  return n.Scalar();
}

std::int64_t Integer(const YAML::Node& n, const std::string& what) {
  std::string s = Scalar(n, what);
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(n, what + " must be an integer, got '" + s + "'");
}

double Number(const YAML::Node& n, const std::string& what) {
  std::string s = Scalar(n, what);
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(n, what + " must be a number, got '" + s + "'");
}

std::vector<std::string> Names(const YAML::Node& n, const std::string& what) {
  if (n.IsNull()) return {};
  if (!n.IsSequence()) Fail(n, what + " must be a list");
  std::vector<std::string> out;
  for (const auto& item : n) out.push_back(Scalar(item, what + " entry"));
  return out;
}

void RequireMap(const YAML::Node& n, const std::string& what) {
  if (!n.IsMap()) Fail(n, what + " must be a mapping");
}

void CheckKeys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& what) {
  for (const auto& kv : n) {
    std::string k = kv.first.Scalar();
    if (!allowed.count(k)) Fail(kv.first, "unknown key '" + k + "' in " + what);
  }
}

// ---------------------------------------------------------------- einsum

void ParseEinsumSection(const YAML::Node& n, ProblemSpec& spec) {
  RequireMap(n, "einsum");
  CheckKeys(n, {"declaration", "expressions", "shape"}, "einsum");
  const YAML::Node decl = n["declaration"];
  if (!decl || !decl.IsMap()) Fail(n, "einsum.declaration is required");
  for (const auto& kv : decl) {
    TensorDecl t{kv.first.Scalar(), Names(kv.second, "declaration of " + kv.first.Scalar())};
    if (spec.tensor(t.name)) Fail(kv.first, "tensor " + t.name + " declared twice");
    spec.declaration.push_back(std::move(t));
  }
  const YAML::Node exprs = n["expressions"];
  if (!exprs || !exprs.IsSequence()) Fail(n, "einsum.expressions is required");
  for (const auto& item : exprs) {
    std::string text = Scalar(item, "expression");
    EinsumDecl e;
    try {
      e = ParseEinsum(text);
    } catch (const SpecError& err) {
      Fail(item, err.what());
    }
    e.line = item.Mark().line + 1;
    spec.einsums.push_back(std::move(e));
  }
  if (const YAML::Node shape = n["shape"]) {
    RequireMap(shape, "einsum.shape");
    for (const auto& kv : shape) spec.shape[kv.first.Scalar()] = Integer(kv.second, "shape " + kv.first.Scalar());
  }
}

// Fills subscript-free accesses from the declaration and checks that every
// referenced tensor is declared with a matching number of ranks.
void ResolveAccesses(Expr& e, const ProblemSpec& spec, int line) {
  if (e.kind != Expr::Kind::kAccess) {
    for (auto& a : e.args) ResolveAccesses(a, spec, line);
    return;
  }
  const TensorDecl* t = spec.tensor(e.tensor);
  if (!t) throw SpecError("reference to undeclared tensor " + e.tensor, line);
  if (e.indices.empty())
    for (const auto& r : t->ranks) e.indices.push_back(IndexExpr{{VarOf(r)}});
  if (e.indices.size() != t->ranks.size())
    throw SpecError("tensor " + e.tensor + " has " + std::to_string(t->ranks.size()) + " ranks but is indexed with " +
                        std::to_string(e.indices.size()),
                    line);
}

void ResolveEinsums(ProblemSpec& spec) {
  for (auto& e : spec.einsums) {
    const TensorDecl* out = spec.tensor(e.output);
    if (!out) throw SpecError("reference to undeclared tensor " + e.output, e.line);
    if (e.output_vars.empty())
      for (const auto& r : out->ranks) e.output_vars.push_back(VarOf(r));
    if (e.output_vars.size() != out->ranks.size())
      throw SpecError("output " + e.output + " has " + std::to_string(out->ranks.size()) + " ranks but is indexed with " +
                          std::to_string(e.output_vars.size()),
                      e.line);
    ResolveAccesses(e.expr, spec, e.line);
  }
}

// ---------------------------------------------------------------- mapping

PartitionDirective ParseDirective(const YAML::Node& n) {
  static const std::regex re(R"(^\s*(\w+)\s*\(\s*([^)]*?)\s*\)\s*$)");
  std::string text = Scalar(n, "partitioning directive");
  std::smatch m;
  if (!std::regex_match(text, m, re)) Fail(n, "malformed partitioning directive '" + text + "'");
  PartitionDirective d;
  std::string name = m[1], arg = m[2];
  auto set_size = [&](const std::string& s) {
    if (s.empty()) Fail(n, "directive '" + text + "' needs a size");
    if (std::isdigit(static_cast<unsigned char>(s[0]))) {
      d.size = std::stoll(s);
      if (d.size < 1) Fail(n, "partition size must be positive in '" + text + "'");
    } else {
      d.symbol = s;
    }
  };
  if (name == "flatten") {
    d.kind = PartitionKind::kFlatten;
    if (!arg.empty()) Fail(n, "flatten() takes no arguments");
  } else if (name == "uniform_shape") {
    d.kind = PartitionKind::kUniformShape;
    set_size(arg);
  } else if (name == "uniform_occupancy") {
    d.kind = PartitionKind::kUniformOccupancy;
    auto dot = arg.find('.');
    if (dot == std::string::npos) Fail(n, "uniform_occupancy needs Leader.size, got '" + arg + "'");
    d.leader = arg.substr(0, dot);
    set_size(arg.substr(dot + 1));
  } else {
    Fail(n, "unknown directive '" + name + "'");
  }
  return d;
}

std::vector<std::string> ParseRankKey(const YAML::Node& key) {
  std::string s = key.Scalar();
  if (s.empty() || s.front() != '(') return {s};
  if (s.back() != ')') Fail(key, "malformed rank tuple '" + s + "'");
  std::vector<std::string> out;
  std::stringstream ss(s.substr(1, s.size() - 2));
  std::string part;
  while (std::getline(ss, part, ',')) {
    auto b = part.find_first_not_of(" \t"), e = part.find_last_not_of(" \t");
    if (b == std::string::npos) Fail(key, "empty rank in tuple '" + s + "'");
    out.push_back(part.substr(b, e - b + 1));
  }
  return out;
}

// Returns the Einsums whose spacetime omits `time`.
std::set<std::string> ParseMapping(const YAML::Node& n, ProblemSpec& spec) {
  std::set<std::string> time_omitted;
  RequireMap(n, "mapping");
  CheckKeys(n, {"rank-order", "partitioning", "loop-order", "spacetime"}, "mapping");
  auto need_tensor = [&](const YAML::Node& key) {
    if (!spec.tensor(key.Scalar())) Fail(key, "reference to undeclared tensor " + key.Scalar());
  };
  auto need_einsum = [&](const YAML::Node& key) {
    if (!spec.einsum(key.Scalar())) Fail(key, "no Einsum writes " + key.Scalar());
  };
  if (const YAML::Node ro = n["rank-order"]) {
    RequireMap(ro, "mapping.rank-order");
    for (const auto& kv : ro) {
      need_tensor(kv.first);
      spec.mapping.rank_order[kv.first.Scalar()] = Names(kv.second, "rank-order");
    }
  }
  if (const YAML::Node part = n["partitioning"]) {
    RequireMap(part, "mapping.partitioning");
    for (const auto& kv : part) {
      need_einsum(kv.first);
      auto& entries = spec.mapping.partitioning[kv.first.Scalar()];
      if (kv.second.IsNull()) continue;
      RequireMap(kv.second, "partitioning of " + kv.first.Scalar());
      for (const auto& rk : kv.second) {
        PartitionEntry entry;
        entry.ranks = ParseRankKey(rk.first);
        if (!rk.second.IsSequence()) Fail(rk.second, "partitioning directives must be a list");
        for (const auto& d : rk.second) entry.directives.push_back(ParseDirective(d));
        entries.push_back(std::move(entry));
      }
    }
  }
  if (const YAML::Node lo = n["loop-order"]) {
    RequireMap(lo, "mapping.loop-order");
    for (const auto& kv : lo) {
      need_einsum(kv.first);
      spec.mapping.loop_order[kv.first.Scalar()] = Names(kv.second, "loop-order");
    }
  }
  if (const YAML::Node st = n["spacetime"]) {
    RequireMap(st, "mapping.spacetime");
    for (const auto& kv : st) {
      need_einsum(kv.first);
      RequireMap(kv.second, "spacetime of " + kv.first.Scalar());
      CheckKeys(kv.second, {"space", "time"}, "spacetime");
      SpacetimeDecl s;
      s.space = Names(kv.second["space"], "space");
      if (kv.second["time"])
        s.time = Names(kv.second["time"], "time");
      else
        time_omitted.insert(kv.first.Scalar());
      spec.mapping.spacetime[kv.first.Scalar()] = std::move(s);
    }
  }
  return time_omitted;
}

void FillMappingDefaults(ProblemSpec& spec, const std::set<std::string>& time_omitted) {
  for (const auto& t : spec.declaration)
    if (!spec.mapping.rank_order.count(t.name)) spec.mapping.rank_order[t.name] = t.ranks;
  for (const auto& e : spec.einsums) {
    if (!spec.mapping.loop_order.count(e.output))
      spec.mapping.loop_order[e.output] = DefaultLoopOrder(spec, e);
    const auto& loop = spec.mapping.loop_order[e.output];
    auto it = spec.mapping.spacetime.find(e.output);
    if (it == spec.mapping.spacetime.end()) {
      spec.mapping.spacetime[e.output] = SpacetimeDecl{{}, loop};
    } else if (time_omitted.count(e.output)) {
      for (const auto& r : loop)
        if (std::find(it->second.space.begin(), it->second.space.end(), r) == it->second.space.end())
          it->second.time.push_back(r);
    }
  }
}

// ---------------------------------------------------------------- format

Layout ParseLayout(const YAML::Node& n) {
  std::string s = Scalar(n, "layout");
  if (s == "soa" || s == "contiguous") return Layout::kSoA;
  if (s == "aos" || s == "interleaved") return Layout::kAoS;
  Fail(n, "unknown layout '" + s + "'");
}

FormatType ParseFormatType(const YAML::Node& n) {
  std::string s = Scalar(n, "format");
  if (s == "U") return FormatType::kU;
  if (s == "C") return FormatType::kC;
  if (s == "B") return FormatType::kB;
  Fail(n, "unknown format type '" + s + "'");
}

void ParseFormat(const YAML::Node& n, ProblemSpec& spec) {
  RequireMap(n, "format");
  for (const auto& tkv : n) {
    if (!spec.tensor(tkv.first.Scalar())) Fail(tkv.first, "reference to undeclared tensor " + tkv.first.Scalar());
    RequireMap(tkv.second, "format of " + tkv.first.Scalar());
    auto& configs = spec.format[tkv.first.Scalar()];
    for (const auto& ckv : tkv.second) {
      FormatConfig cfg;
      cfg.name = ckv.first.Scalar();
      RequireMap(ckv.second, "format config " + cfg.name);
      std::vector<std::string> listed;
      for (const auto& rkv : ckv.second) {
        std::string key = rkv.first.Scalar();
        if (key == "rank-order") {
          cfg.rank_order = Names(rkv.second, "rank-order");
          continue;
        }
        RequireMap(rkv.second, "format of rank " + key);
        CheckKeys(rkv.second, {"format", "layout", "cbits", "pbits", "fhbits"}, "rank format");
        RankFormat rf;
        if (rkv.second["format"]) rf.type = ParseFormatType(rkv.second["format"]);
        if (rkv.second["layout"]) rf.layout = ParseLayout(rkv.second["layout"]);
        if (rkv.second["cbits"]) rf.cbits = Integer(rkv.second["cbits"], "cbits");
        if (rkv.second["pbits"]) rf.pbits = Integer(rkv.second["pbits"], "pbits");
        if (rkv.second["fhbits"]) rf.fhbits = Integer(rkv.second["fhbits"], "fhbits");
        cfg.ranks[key] = rf;
        listed.push_back(key);
      }
      if (cfg.rank_order.empty()) cfg.rank_order = listed;
      configs.push_back(std::move(cfg));
    }
  }
}

// ---------------------------------------------------------------- architecture

Component ParseComponent(const YAML::Node& n) {
  RequireMap(n, "component");
  CheckKeys(n, {"name", "class", "attributes"}, "component");
  Component c;
  if (!n["name"]) Fail(n, "component needs a name");
  c.name = Scalar(n["name"], "component name");
  if (!n["class"]) Fail(n, "component " + c.name + " needs a class");
  try {
    c.cls = ParseComponentClass(Scalar(n["class"], "class"));
  } catch (const SpecError& e) {
    Fail(n["class"], e.what());
  }
  if (const YAML::Node attrs = n["attributes"]) {
    RequireMap(attrs, "attributes");
    for (const auto& kv : attrs) c.attributes[kv.first.Scalar()] = Scalar(kv.second, "attribute");
  }
  return c;
}

ArchLevel ParseLevel(const YAML::Node& n, bool top) {
  RequireMap(n, "architecture level");
  if (top)
    CheckKeys(n, {"name", "num", "local", "subtree", "clock"}, "topology");
  else
    CheckKeys(n, {"name", "num", "local", "subtree"}, "architecture level");
  ArchLevel level;
  if (n["name"]) level.name = Scalar(n["name"], "level name");
  if (n["num"]) level.num = Integer(n["num"], "num");
  if (const YAML::Node local = n["local"]) {
    if (!local.IsSequence()) Fail(local, "local must be a list");
    for (const auto& c : local) level.local.push_back(ParseComponent(c));
  }
  if (const YAML::Node sub = n["subtree"]) {
    if (!sub.IsSequence()) Fail(sub, "subtree must be a list");
    for (const auto& s : sub) level.subtree.push_back(ParseLevel(s, false));
  }
  return level;
}

void ParseArchitecture(const YAML::Node& n, ProblemSpec& spec) {
  RequireMap(n, "architecture");
  for (const auto& kv : n) {
    Topology t;
    t.name = kv.first.Scalar();
    t.root = ParseLevel(kv.second, true);
    if (kv.second["clock"]) t.clock = Number(kv.second["clock"], "clock");
    spec.architecture.topologies.push_back(std::move(t));
  }
}

// ---------------------------------------------------------------- binding

void ParseBinding(const YAML::Node& n, ProblemSpec& spec) {
  RequireMap(n, "binding");
  for (const auto& ekv : n) {
    if (!spec.einsum(ekv.first.Scalar())) Fail(ekv.first, "no Einsum writes " + ekv.first.Scalar());
    RequireMap(ekv.second, "binding of " + ekv.first.Scalar());
    CheckKeys(ekv.second, {"topology", "components"}, "binding");
    EinsumBinding b;
    if (!ekv.second["topology"]) Fail(ekv.second, "binding of " + ekv.first.Scalar() + " needs a topology");
    b.topology = Scalar(ekv.second["topology"], "topology");
    if (const YAML::Node comps = ekv.second["components"]) {
      RequireMap(comps, "components");
      for (const auto& ckv : comps) {
        ComponentBinding cb;
        cb.component = ckv.first.Scalar();
        if (!ckv.second.IsSequence()) Fail(ckv.second, "binding entries must be a list");
        for (const auto& item : ckv.second) {
          RequireMap(item, "binding entry");
          if (item["op"]) {
            CheckKeys(item, {"op", "tensor", "rank"}, "operation binding");
            OpBinding op;
            op.op = Scalar(item["op"], "op");
            if (op.op != "mul" && op.op != "add" && op.op != "intersect" && op.op != "swizzle")
              Fail(item["op"], "unknown operation '" + op.op + "'");
            if (item["tensor"]) op.tensor = Scalar(item["tensor"], "tensor");
            if (item["rank"]) op.rank = Scalar(item["rank"], "rank");
            cb.ops.push_back(std::move(op));
            continue;
          }
          CheckKeys(item, {"tensor", "config", "rank", "type", "evict-on"}, "storage binding");
          StorageBinding sb;
          if (!item["tensor"]) Fail(item, "storage binding needs a tensor");
          sb.tensor = Scalar(item["tensor"], "tensor");
          if (!spec.tensor(sb.tensor)) Fail(item["tensor"], "reference to undeclared tensor " + sb.tensor);
          if (item["config"]) sb.config = Scalar(item["config"], "config");
          if (item["rank"]) sb.rank = Scalar(item["rank"], "rank");
          if (item["type"]) {
            try {
              sb.type = ParseDatumType(Scalar(item["type"], "type"));
            } catch (const SpecError& e) {
              Fail(item["type"], e.what());
            }
          }
          if (item["evict-on"]) sb.evict_on = Scalar(item["evict-on"], "evict-on");
          cb.storage.push_back(std::move(sb));
        }
        b.components.push_back(std::move(cb));
      }
    }
    spec.binding[ekv.first.Scalar()] = std::move(b);
  }
}

void ParseOperators(const YAML::Node& n, ProblemSpec& spec) {
  RequireMap(n, "operators");
  CheckKeys(n, {"add", "mul"}, "operators");
  try {
    if (n["add"]) spec.semiring.add = ParseScalarOp(Scalar(n["add"], "add"));
    if (n["mul"]) spec.semiring.mul = ParseScalarOp(Scalar(n["mul"], "mul"));
  } catch (const SpecError& e) {
    Fail(n, e.what());
  }
}

}  // namespace

ProblemSpec ParseSpec(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw SpecError("syntax error: " + e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  if (!root.IsMap()) throw SpecError("spec must be a mapping with an einsum section");
  CheckKeys(root, {"einsum", "mapping", "format", "architecture", "binding", "operators"}, "spec");
  ProblemSpec spec;
  if (!root["einsum"]) throw SpecError("missing einsum section");
  ParseEinsumSection(root["einsum"], spec);
  ResolveEinsums(spec);
  if (root["operators"]) ParseOperators(root["operators"], spec);
  std::set<std::string> time_omitted;
  if (root["mapping"] && !root["mapping"].IsNull()) time_omitted = ParseMapping(root["mapping"], spec);
  if (root["format"] && !root["format"].IsNull()) ParseFormat(root["format"], spec);
  if (root["architecture"] && !root["architecture"].IsNull()) ParseArchitecture(root["architecture"], spec);
  if (root["binding"] && !root["binding"].IsNull()) ParseBinding(root["binding"], spec);
  FillMappingDefaults(spec, time_omitted);
  return spec;
}

ProblemSpec LoadSpec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseSpec(ss.str());
}

// ---------------------------------------------------------------- printing

namespace {

void FlowList(YAML::Emitter& out, const std::vector<std::string>& items) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const auto& s : items) out << s;
  out << YAML::EndSeq;
}

std::string Exact(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

void EmitLevel(YAML::Emitter& out, const ArchLevel& level, const Topology* top) {
  out << YAML::BeginMap;
  if (top) out << YAML::Key << "clock" << YAML::Value << Exact(top->clock);
  out << YAML::Key << "name" << YAML::Value << level.name;
  out << YAML::Key << "num" << YAML::Value << level.num;
  if (!level.local.empty()) {
    out << YAML::Key << "local" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : level.local) {
      out << YAML::BeginMap;
      out << YAML::Key << "name" << YAML::Value << c.name;
      out << YAML::Key << "class" << YAML::Value << ToString(c.cls);
      if (!c.attributes.empty()) {
        out << YAML::Key << "attributes" << YAML::Value << YAML::Flow << YAML::BeginMap;
        for (const auto& [k, v] : c.attributes) out << YAML::Key << k << YAML::Value << v;
        out << YAML::EndMap;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  if (!level.subtree.empty()) {
    out << YAML::Key << "subtree" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : level.subtree) EmitLevel(out, s, nullptr);
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
}

}  // namespace

std::string PrintSpec(const ProblemSpec& spec) {
  YAML::Emitter out;
  out << YAML::BeginMap;

  out << YAML::Key << "einsum" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "declaration" << YAML::Value << YAML::BeginMap;
  for (const auto& t : spec.declaration) {
    out << YAML::Key << t.name << YAML::Value;
    FlowList(out, t.ranks);
  }
  out << YAML::EndMap;
  out << YAML::Key << "expressions" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : spec.einsums) out << e.str();
  out << YAML::EndSeq;
  if (!spec.shape.empty()) {
    out << YAML::Key << "shape" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : spec.shape) out << YAML::Key << k << YAML::Value << v;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "operators" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "add" << YAML::Value << ToString(spec.semiring.add);
  out << YAML::Key << "mul" << YAML::Value << ToString(spec.semiring.mul);
  out << YAML::EndMap;

  const auto& m = spec.mapping;
  out << YAML::Key << "mapping" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rank-order" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : m.rank_order) {
    out << YAML::Key << k << YAML::Value;
    FlowList(out, v);
  }
  out << YAML::EndMap;
  if (!m.partitioning.empty()) {
    out << YAML::Key << "partitioning" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, entries] : m.partitioning) {
      out << YAML::Key << k << YAML::Value << YAML::BeginMap;
      for (const auto& e : entries) {
        out << YAML::Key << e.key() << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const auto& d : e.directives) out << d.str();
        out << YAML::EndSeq;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }
  out << YAML::Key << "loop-order" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : m.loop_order) {
    out << YAML::Key << k << YAML::Value;
    FlowList(out, v);
  }
  out << YAML::EndMap;
  out << YAML::Key << "spacetime" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, st] : m.spacetime) {
    out << YAML::Key << k << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "space" << YAML::Value;
    FlowList(out, st.space);
    out << YAML::Key << "time" << YAML::Value;
    FlowList(out, st.time);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::EndMap;

  if (!spec.format.empty()) {
    out << YAML::Key << "format" << YAML::Value << YAML::BeginMap;
    for (const auto& [tensor, configs] : spec.format) {
      out << YAML::Key << tensor << YAML::Value << YAML::BeginMap;
      for (const auto& cfg : configs) {
        out << YAML::Key << cfg.name << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "rank-order" << YAML::Value;
        FlowList(out, cfg.rank_order);
        for (const auto& [rank, rf] : cfg.ranks) {
          out << YAML::Key << rank << YAML::Value << YAML::Flow << YAML::BeginMap;
          out << YAML::Key << "format" << YAML::Value
              << (rf.type == FormatType::kU ? "U" : rf.type == FormatType::kC ? "C" : "B");
          out << YAML::Key << "layout" << YAML::Value << (rf.layout == Layout::kSoA ? "soa" : "aos");
          out << YAML::Key << "cbits" << YAML::Value << rf.cbits;
          out << YAML::Key << "pbits" << YAML::Value << rf.pbits;
          out << YAML::Key << "fhbits" << YAML::Value << rf.fhbits;
          out << YAML::EndMap;
        }
        out << YAML::EndMap;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }

  if (!spec.architecture.topologies.empty()) {
    out << YAML::Key << "architecture" << YAML::Value << YAML::BeginMap;
    for (const auto& t : spec.architecture.topologies) {
      out << YAML::Key << t.name << YAML::Value;
      EmitLevel(out, t.root, &t);
    }
    out << YAML::EndMap;
  }

  if (!spec.binding.empty()) {
    out << YAML::Key << "binding" << YAML::Value << YAML::BeginMap;
    for (const auto& [einsum, b] : spec.binding) {
      out << YAML::Key << einsum << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "topology" << YAML::Value << b.topology;
      out << YAML::Key << "components" << YAML::Value << YAML::BeginMap;
      for (const auto& cb : b.components) {
        out << YAML::Key << cb.component << YAML::Value << YAML::BeginSeq;
        for (const auto& s : cb.storage) {
          out << YAML::Flow << YAML::BeginMap;
          out << YAML::Key << "tensor" << YAML::Value << s.tensor;
          if (!s.config.empty()) out << YAML::Key << "config" << YAML::Value << s.config;
          if (!s.rank.empty()) out << YAML::Key << "rank" << YAML::Value << s.rank;
          out << YAML::Key << "type" << YAML::Value << ToString(s.type);
          if (!s.evict_on.empty()) out << YAML::Key << "evict-on" << YAML::Value << s.evict_on;
          out << YAML::EndMap;
        }
        for (const auto& op : cb.ops) {
          out << YAML::Flow << YAML::BeginMap;
          out << YAML::Key << "op" << YAML::Value << op.op;
          if (!op.tensor.empty()) out << YAML::Key << "tensor" << YAML::Value << op.tensor;
          if (!op.rank.empty()) out << YAML::Key << "rank" << YAML::Value << op.rank;
          out << YAML::EndMap;
        }
        out << YAML::EndSeq;
      }
      out << YAML::EndMap;
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace fibersim
