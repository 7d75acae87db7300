#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "fibersim/compiler.hpp"
#include "fibersim/error.hpp"
#include "fibersim/iteration_space.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

namespace {

template <typename C, typename T>
bool Contains(const C& c, const T& v) {
  return std::find(c.begin(), c.end(), v) != c.end();
}

class Validator {
 public:
  explicit Validator(const ProblemSpec& spec) : spec_(spec) {}

  ValidationReport Run() {
    CheckEinsums();
    CheckRankOrders();
    for (const auto& e : spec_.einsums) CheckMapping(e);
    CheckFormats();
    CheckArchitecture();
    CheckBindings();
    if (report_.violations.empty()) CheckLowering();
    return std::move(report_);
  }

 private:
  void Add(std::string v) { report_.violations.push_back(std::move(v)); }

  void CheckTake(const Expr& x, const EinsumDecl& e) {
    if (x.kind == Expr::Kind::kTake && (x.take_arg < 0 || x.take_arg >= static_cast<int>(x.args.size())))
      Add("Einsum " + e.output + ": take operand index " + std::to_string(x.take_arg) + " does not name an operand");
    for (const auto& a : x.args) CheckTake(a, e);
  }

  void CheckEinsums() {
    std::map<std::string, int> writers;
    for (const auto& e : spec_.einsums) {
      if (++writers[e.output] == 2) Add("tensor " + e.output + " is written by more than one Einsum");
      std::set<std::string> seen;
      for (const auto& v : e.output_vars)
        if (!seen.insert(v).second) Add("Einsum " + e.output + ": output variable " + v + " repeated");
      EinsumDecl probe = e;
      probe.output_vars.clear();
      const auto expr_vars = probe.variables();
      for (const auto& v : e.output_vars)
        if (!Contains(expr_vars, v))
          Add("Einsum " + e.output + ": output variable " + v + " does not appear in the expression");
      CheckTake(e.expr, e);
      if (e.expr.kind == Expr::Kind::kTake && e.expr.take_arg >= 0 &&
          e.expr.take_arg < static_cast<int>(e.expr.args.size())) {
        std::vector<std::string> copied;
        CollectVars(e.expr.args[static_cast<std::size_t>(e.expr.take_arg)], copied);
        for (const auto& v : copied)
          if (!Contains(e.output_vars, v))
            Add("Einsum " + e.output + ": take reduces over variable " + v + " of the copied operand");
      }
    }
  }

  static void CollectVars(const Expr& e, std::vector<std::string>& out) {
    for (const auto& ix : e.indices)
      for (const auto& v : ix.vars)
        if (!Contains(out, v)) out.push_back(v);
    for (const auto& a : e.args) CollectVars(a, out);
  }

  void CheckRankOrders() {
    for (const auto& [name, order] : spec_.mapping.rank_order) {
      const TensorDecl* t = spec_.tensor(name);
      if (!t) {
        Add("rank-order names undeclared tensor " + name);
        continue;
      }
      auto a = order, b = t->ranks;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) Add("rank-order of " + name + " is not a permutation of its declared ranks");
    }
  }

  void CheckMapping(const EinsumDecl& e) {
    IterationSpace space;
    try {
      space = PlanIterationSpace(spec_, e);
    } catch (const SpecError& err) {
      Add(err.what());
      return;
    }
    const auto inputs = e.inputs();
    for (const auto& step : space.steps)
      if (step.kind == PartitionKind::kUniformOccupancy && !Contains(inputs, step.leader))
        Add("partitioning of " + e.output + ": leader " + step.leader + " is not an input of the Einsum");

    auto lit = spec_.mapping.loop_order.find(e.output);
    if (lit == spec_.mapping.loop_order.end()) {
      Add("Einsum " + e.output + " has no loop-order");
      return;
    }
    const auto& loop = lit->second;
    std::set<std::string> seen;
    for (const auto& r : loop) {
      if (!seen.insert(r).second) Add("loop-order of " + e.output + " repeats rank " + r);
      if (!space.find(r)) Add("loop-order of " + e.output + " names " + r + ", which is not an iteration rank");
    }
    const auto existential = e.existential_vars();
    for (const auto& r : space.ranks) {
      if (Contains(loop, r.name)) continue;
      bool optional = r.vars.size() == 1 && r.step < 0 && Contains(existential, r.vars[0]);
      if (!optional) Add("loop-order of " + e.output + " is missing rank " + r.name);
    }
    for (const auto& step : space.steps) {
      if (step.kind == PartitionKind::kFlatten) continue;
      auto up = std::find(loop.begin(), loop.end(), step.upper);
      auto low = std::find(loop.begin(), loop.end(), step.lower);
      if (up != loop.end() && low != loop.end() && low < up)
        Add("loop-order of " + e.output + " places " + step.lower + " before " + step.upper);
    }

    auto sit = spec_.mapping.spacetime.find(e.output);
    if (sit == spec_.mapping.spacetime.end()) {
      Add("Einsum " + e.output + " has no spacetime");
      return;
    }
    const auto& st = sit->second;
    for (const auto& r : st.space)
      if (Contains(st.time, r)) Add("spacetime of " + e.output + ": rank " + r + " is in both space and time");
    for (const auto& list : {st.space, st.time})
      for (const auto& r : list)
        if (!Contains(loop, r)) Add("spacetime of " + e.output + ": rank " + r + " is not in the loop-order");
    for (const auto& r : loop)
      if (!Contains(st.space, r) && !Contains(st.time, r)) Add("spacetime of " + e.output + ": rank " + r + " unscheduled");
  }

  void CheckFormats() {
    for (const auto& [tensor, configs] : spec_.format) {
      std::set<std::string> names;
      for (const auto& cfg : configs) {
        const std::string where = "format " + tensor + "." + cfg.name;
        if (!names.insert(cfg.name).second) Add(where + " is defined twice");
        for (const auto& r : cfg.rank_order)
          if (!cfg.find(r)) Add(where + ": rank " + r + " has no entry");
        for (const auto& [rank, rf] : cfg.ranks) {
          if (rf.cbits < 0 || rf.pbits < 0 || rf.fhbits < 0) Add(where + ": rank " + rank + " has a negative width");
          if (rf.type == FormatType::kB && rf.cbits <= 0)
            Add(where + ": rank " + rank + " has format B but no cbits");
        }
      }
    }
  }

  void CheckComponent(const Component& c, const std::string& where) {
    auto positive = [&](const char* key, bool required) {
      if (!c.has(key)) {
        if (required) Add(where + ": missing attribute " + key);
        return;
      }
      try {
        if (c.num(key) <= 0) Add(where + ": attribute " + std::string(key) + " must be positive");
      } catch (const SpecError& err) {
        Add(err.what());
      }
    };
    auto one_of = [&](const char* key, std::initializer_list<const char*> allowed, bool required) {
      if (!c.has(key)) {
        if (required) Add(where + ": missing attribute " + key);
        return;
      }
      std::string v = c.str(key);
      for (const char* a : allowed)
        if (v == a) return;
      Add(where + ": attribute " + std::string(key) + " has unsupported value '" + v + "'");
    };
    switch (c.cls) {
      case ComponentClass::kDram:
        positive("bandwidth", true);
        break;
      case ComponentClass::kBuffer:
        one_of("type", {"buffet", "cache"}, true);
        positive("width", true);
        positive("depth", true);
        positive("bandwidth", false);
        break;
      case ComponentClass::kIntersection:
        one_of("type", {"two-finger", "leader-follower", "skip-ahead"}, true);
        break;
      case ComponentClass::kMerger:
        positive("inputs", false);
        positive("comparator_radix", false);
        positive("outputs", false);
        one_of("order", {"fifo", "opt"}, false);
        one_of("reduce", {"true", "false"}, false);
        break;
      case ComponentClass::kCompute:
        one_of("type", {"mul", "add"}, true);
        break;
    }
  }

  void CheckLevel(const ArchLevel& level, const std::string& topo, std::set<std::string>& names) {
    if (level.num < 1) Add("topology " + topo + ": level " + level.name + " has non-positive num");
    for (const auto& c : level.local) {
      if (!names.insert(c.name).second) Add("topology " + topo + ": component name " + c.name + " is not unique");
      CheckComponent(c, "topology " + topo + ", component " + c.name);
    }
    for (const auto& s : level.subtree) CheckLevel(s, topo, names);
  }

  void CheckArchitecture() {
    std::set<std::string> topos;
    for (const auto& t : spec_.architecture.topologies) {
      if (!topos.insert(t.name).second) Add("topology " + t.name + " is defined twice");
      if (t.clock <= 0) Add("topology " + t.name + ": clock must be positive");
      std::set<std::string> names;
      CheckLevel(t.root, t.name, names);
    }
  }

  bool KnownRank(const EinsumDecl& e, const std::string& rank) {
    try {
      IterationSpace space = PlanIterationSpace(spec_, e);
      if (space.find(rank) || space.value_rank(VarOf(rank))) return true;
    } catch (const SpecError&) {
    }
    return false;
  }

  void CheckBindings() {
    if (!spec_.architecture.topologies.empty())
      for (const auto& e : spec_.einsums)
        if (!spec_.binding.count(e.output)) Add("Einsum " + e.output + " has no binding");

    for (const auto& [einsum, b] : spec_.binding) {
      const EinsumDecl* e = spec_.einsum(einsum);
      const Topology* topo = spec_.architecture.find(b.topology);
      if (!topo) {
        Add("binding of " + einsum + ": unknown topology " + b.topology);
        continue;
      }
      auto placed = PlaceComponents(*topo);
      auto tensors = e->inputs();
      tensors.push_back(e->output);
      std::vector<std::tuple<const StorageBinding*, std::string, int>> level_data;
      for (const auto& cb : b.components) {
        const std::string where = "binding of " + einsum + ", component " + cb.component;
        auto pc = std::find_if(placed.begin(), placed.end(),
                               [&](const PlacedComponent& p) { return p.component->name == cb.component; });
        if (pc == placed.end()) {
          Add(where + ": not in topology " + b.topology);
          continue;
        }
        const Component& comp = *pc->component;
        bool storage = comp.cls == ComponentClass::kDram || comp.cls == ComponentClass::kBuffer;
        if (storage && !cb.ops.empty()) Add(where + ": storage component bound to an operation");
        if (!storage && !cb.storage.empty()) Add(where + ": non-storage component bound to data");
        for (const auto& s : cb.storage) {
          if (!Contains(tensors, s.tensor)) Add(where + ": tensor " + s.tensor + " is not used by the Einsum");
          auto fit = spec_.format.find(s.tensor);
          const FormatConfig* cfg = nullptr;
          if (fit != spec_.format.end()) {
            for (const auto& c : fit->second)
              if (c.name == s.config || (s.config.empty() && fit->second.size() == 1)) cfg = &c;
            if (!cfg) Add(where + ": tensor " + s.tensor + " has no format config '" + s.config + "'");
          } else if (!s.config.empty()) {
            Add(where + ": tensor " + s.tensor + " has no format configs");
          }
          if (!s.rank.empty() && cfg && !cfg->find(s.rank) && !KnownRank(*e, s.rank))
            Add(where + ": rank " + s.rank + " is not in " + s.tensor + "." + cfg->name);
          if (comp.cls == ComponentClass::kBuffer && comp.str("type") == "buffet" && s.evict_on.empty())
            Add(where + ": buffet binding of " + s.tensor + " lacks evict-on");
          if (!s.evict_on.empty() && !KnownRank(*e, s.evict_on))
            Add(where + ": evict-on rank " + s.evict_on + " is not a loop rank");
          for (const auto& [other, other_comp, depth] : level_data) {
            if (depth != pc->depth || other_comp == cb.component || other->tensor != s.tensor) continue;
            bool ranks = other->rank.empty() || s.rank.empty() || other->rank == s.rank;
            bool types = other->type == DatumType::kElem || s.type == DatumType::kElem || other->type == s.type;
            if (ranks && types)
              Add(where + ": " + s.tensor + (s.rank.empty() ? "" : " " + s.rank) + " " + ToString(s.type) +
                  " is also bound to " + other_comp + " at the same level");
          }
          level_data.emplace_back(&s, cb.component, pc->depth);
        }
        for (const auto& op : cb.ops) {
          if (comp.cls == ComponentClass::kCompute && op.op != comp.str("type"))
            Add(where + ": compute of type " + comp.str("type") + " cannot perform " + op.op);
          if (comp.cls == ComponentClass::kIntersection && op.op != "intersect")
            Add(where + ": intersection unit cannot perform " + op.op);
          if (comp.cls == ComponentClass::kMerger && op.op != "swizzle")
            Add(where + ": merger cannot perform " + op.op);
          if (!op.tensor.empty() && !Contains(tensors, op.tensor))
            Add(where + ": tensor " + op.tensor + " is not used by the Einsum");
          if (!op.rank.empty() && !KnownRank(*e, op.rank))
            Add(where + ": rank " + op.rank + " is not a loop rank");
        }
      }
    }
  }

  void CheckLowering() {
    for (std::size_t i = 0; i < spec_.einsums.size(); ++i) {
      try {
        Compile(spec_, static_cast<int>(i));
      } catch (const Error& err) {
        if (err.module() != "compiler") throw;
        Add("Einsum " + spec_.einsums[i].output + ": mapping cannot be lowered: " + err.what());
      }
    }
  }

  const ProblemSpec& spec_;
  ValidationReport report_;
};

}  // namespace

ValidationReport Validate(const ProblemSpec& spec) { return Validator(spec).Run(); }

CascadeDAG BuildCascade(const ProblemSpec& spec) {
  CascadeDAG dag;
  const int n = static_cast<int>(spec.einsums.size());
  std::set<std::pair<int, int>> edges;
  for (int j = 0; j < n; ++j) {
    const auto& e = spec.einsums[j];
    dag.nodes.push_back(e.output);
    std::vector<int> prod;
    for (const auto& in : e.inputs()) {
      int p = -1;
      for (int i = j - 1; i >= 0; --i)
        if (spec.einsums[i].output == in) {
          p = i;
          break;
        }
      prod.push_back(p);
      if (p >= 0) edges.insert({p, j});
    }
    dag.producers.push_back(std::move(prod));
  }
  dag.edges.assign(edges.begin(), edges.end());

  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (auto [a, b] : dag.edges) {
    succ[a].push_back(b);
    ++indeg[b];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push(i);
  while (!ready.empty()) {
    int i = ready.top();
    ready.pop();
    dag.topo_order.push_back(i);
    for (int s : succ[i])
      if (--indeg[s] == 0) ready.push(s);
  }
  if (static_cast<int>(dag.topo_order.size()) != n) throw SpecError("cyclic dependency among Einsums");
  return dag;
}

}  // namespace fibersim
