#include "fibersim/compiler.hpp"

#include <algorithm>
#include <climits>
#include <functional>
#include <map>
#include <sstream>

#include "fibersim/error.hpp"

namespace fibersim {

std::string ToString(RankMode m) {
  switch (m) {
    case RankMode::kIterate: return "iterate";
    case RankMode::kRange: return "range";
    case RankMode::kLookup: return "lookup";
    case RankMode::kExistential: return "exists";
  }
  return "?";
}

std::string ToString(CoIterKind k) {
  switch (k) {
    case CoIterKind::kDense: return "dense";
    case CoIterKind::kSequential: return "sequential";
    case CoIterKind::kIntersect: return "intersect";
    case CoIterKind::kUnion: return "union";
    case CoIterKind::kLookup: return "lookup";
  }
  return "?";
}

namespace {

constexpr int kLast = INT_MAX;

std::string Join(const std::vector<std::string>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s + "]";
}

[[noreturn]] void Fail(const std::string& msg) { throw Error("compiler", msg); }

template <class C, class T>
bool Contains(const C& c, const T& v) {
  return std::find(c.begin(), c.end(), v) != c.end();
}

void VisitAccesses(const Expr& e, const std::function<void(const Expr&)>& fn) {
  if (e.kind == Expr::Kind::kAccess) {
    fn(e);
    return;
  }
  for (const auto& a : e.args) VisitAccesses(a, fn);
}

// Symbolic rank of a tensor while the prelude is planned.
struct Sym {
  RankUse use;
  std::string loop_base;  // iteration-space name the piece suffixes attach to
  std::string decl_base;  // declared-space counterpart of loop_base
};

std::vector<std::string> Names(const std::vector<Sym>& syms) {
  std::vector<std::string> out;
  for (const auto& s : syms) out.push_back(s.use.name);
  return out;
}

class Planner {
 public:
  Planner(const ProblemSpec& spec, int einsum)
      : spec_(spec), e_(spec.einsums.at(static_cast<std::size_t>(einsum))), index_(einsum) {
    space_ = PlanIterationSpace(spec, e_);
    loop_ = spec.mapping.loop_order.at(e_.output);
    for (std::size_t i = 0; i < loop_.size(); ++i) level_[loop_[i]] = static_cast<int>(i);
    for (const auto& r : loop_)
      if (!space_.find(r)) Fail("loop order of " + e_.output + " names unknown rank " + r);
  }

  const IterationSpace& space() const { return space_; }
  const std::vector<std::string>& loop() const { return loop_; }

  int Level(const std::string& rank) const {
    auto it = level_.find(rank);
    return it == level_.end() ? -1 : it->second;
  }

  // Level of the rank carrying var's value; -1 when the loop omits it.
  int ValueLevel(const std::string& var) const {
    const LoopRank* r = space_.value_rank(var);
    return r ? Level(r->name) : -1;
  }

  // First loop level touching var (upper pieces included).
  int FirstLevel(const std::string& var) const {
    for (std::size_t i = 0; i < loop_.size(); ++i)
      if (Contains(space_.find(loop_[i])->vars, var)) return static_cast<int>(i);
    return -1;
  }

  int SortKey(const Sym& s) const {
    if (s.use.mode == RankMode::kLookup || s.use.vars.size() > 1) {
      int lv = -1;
      for (const auto& v : s.use.vars) {
        int l = ValueLevel(v);
        if (l < 0) return kLast;
        lv = std::max(lv, l);
      }
      return lv;
    }
    int l = FirstLevel(s.use.vars[0]);
    return l < 0 ? kLast : l;
  }

  PartitionPlan Plan() {
    CascadeDAG dag = BuildCascade(spec_);
    const auto inputs = e_.inputs();
    std::map<std::string, std::vector<IndexExpr>> subs;
    VisitAccesses(e_.expr, [&](const Expr& a) {
      auto [it, fresh] = subs.emplace(a.tensor, a.indices);
      if (!fresh && it->second != a.indices)
        Fail("Einsum " + e_.output + " reads " + a.tensor + " with two different subscripts");
    });

    std::vector<TensorPlan> plans;
    std::map<std::string, std::vector<Sym>> state;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      TensorPlan p;
      p.tensor = inputs[i];
      p.intermediate = dag.producers[static_cast<std::size_t>(index_)][i] >= 0;
      p.subscripts = subs.at(p.tensor);
      p.stored = spec_.rank_order(p.tensor);
      const TensorDecl* decl = spec_.tensor(p.tensor);
      std::vector<Sym> syms;
      for (const auto& d : p.stored) {
        auto pos = std::find(decl->ranks.begin(), decl->ranks.end(), d) - decl->ranks.begin();
        const IndexExpr& ix = p.subscripts[static_cast<std::size_t>(pos)];
        Sym s;
        s.use.label = d;
        s.use.origin = {d};
        s.use.vars = ix.vars;
        if (ix.affine()) {
          s.use.name = "(" + ix.str() + ")";
          s.use.mode = RankMode::kLookup;
        } else {
          s.use.name = RankOf(ix.vars[0]);
        }
        s.loop_base = s.use.name;
        s.decl_base = d;
        syms.push_back(s);
      }
      auto sorted = syms;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](const Sym& a, const Sym& b) { return SortKey(a) < SortKey(b); });
      for (auto& st : InferSwizzles(Names(syms), Names(sorted), p.intermediate)) {
        st.rewrite = -1;
        p.prelude.push_back(st);
      }
      state[p.tensor] = sorted;
      plans.push_back(std::move(p));
    }

    for (std::size_t si = 0; si < space_.steps.size(); ++si) {
      const RewriteStep& step = space_.steps[si];
      const int s = static_cast<int>(si);
      if (step.kind == PartitionKind::kFlatten) {
        for (auto& p : plans) Flatten(p, state[p.tensor], step, s);
        continue;
      }
      const std::string& r = step.inputs[0];
      std::vector<Sym> leader_before;
      if (step.kind == PartitionKind::kUniformOccupancy) {
        auto it = state.find(step.leader);
        if (it == state.end()) Fail("occupancy leader " + step.leader + " is not an input of " + e_.output);
        auto pos = Find(it->second, r);
        if (pos < 0 || it->second[static_cast<std::size_t>(pos)].use.mode != RankMode::kIterate)
          Fail("occupancy leader " + step.leader + " does not iterate rank " + r);
        leader_before = it->second;
      }
      for (auto& p : plans) {
        auto& syms = state[p.tensor];
        int pos = Find(syms, r);
        if (pos < 0) continue;
        Sym& sym = syms[static_cast<std::size_t>(pos)];
        if (sym.use.mode == RankMode::kLookup) continue;
        if (sym.use.mode == RankMode::kRange) {
          AddRange(sym, step, s);
          continue;
        }
        bool split = step.kind == PartitionKind::kUniformShape || p.tensor == step.leader ||
                     (CanFollow(leader_before, syms, r) && (!Interleaved(syms, sym, step) || LeadsLater(p.tensor, si)));
        if (!split) {
          sym.use.mode = RankMode::kRange;
          AddRange(sym, step, s);
          continue;
        }
        PreludeStep ps;
        ps.kind = step.kind == PartitionKind::kUniformShape ? PreludeStep::Kind::kSplitShape
                                                            : PreludeStep::Kind::kSplitOccupancy;
        ps.before = Names(syms);
        ps.rank = r;
        ps.upper = step.upper;
        ps.lower = step.lower;
        ps.size = step.size;
        ps.leader = step.leader;
        ps.rewrite = s;
        ps.online = p.intermediate;
        Sym up = sym, low = sym;
        Rename(up, step.upper);
        up.use.upper = true;
        Rename(low, step.lower);
        syms[static_cast<std::size_t>(pos)] = low;
        syms.insert(syms.begin() + pos, up);
        ps.after = Names(syms);
        p.prelude.push_back(ps);
      }
    }

    for (auto& p : plans) {
      auto& syms = state[p.tensor];
      for (auto& sym : syms) Finalize(sym);
      auto sorted = syms;
      std::stable_sort(sorted.begin(), sorted.end(), [](const Sym& a, const Sym& b) {
        auto key = [](const Sym& x) { return x.use.level < 0 ? kLast : x.use.level; };
        return key(a) < key(b);
      });
      for (auto& st : InferSwizzles(Names(syms), Names(sorted), p.intermediate)) {
        st.rewrite = kLast;
        p.prelude.push_back(st);
      }
      for (auto& sym : sorted) p.ranks.push_back(sym.use);
    }
    return PartitionPlan{space_, std::move(plans)};
  }

 private:
  static int Find(const std::vector<Sym>& syms, const std::string& name) {
    for (std::size_t i = 0; i < syms.size(); ++i)
      if (syms[i].use.name == name) return static_cast<int>(i);
    return -1;
  }

  static void Rename(Sym& s, const std::string& name) {
    s.use.name = name;
    s.use.label = s.decl_base + name.substr(std::min(s.loop_base.size(), name.size()));
  }

  static void AddRange(Sym& sym, const RewriteStep& step, int s) {
    sym.use.range_steps.push_back(s);
    Rename(sym, step.lower);
  }

  // Every leader rank above `rank` is also above it in the follower.
  static bool CanFollow(const std::vector<Sym>& leader, const std::vector<Sym>& follower, const std::string& rank) {
    int lp = Find(leader, rank), fp = Find(follower, rank);
    if (lp < 0 || fp < 0) return false;
    for (int i = 0; i < lp; ++i) {
      int at = Find(follower, leader[static_cast<std::size_t>(i)].use.name);
      if (at < 0 || at > fp) return false;
    }
    return true;
  }

  // Another rank of the tensor is consumed between the split's upper level
  // and the level of the rank's value piece.
  // True when `tensor` leads a later occupancy split of the rank chain that step `si` produces.
  bool LeadsLater(const std::string& tensor, std::size_t si) const {
    std::string piece = space_.steps[si].lower;
    for (std::size_t j = si + 1; j < space_.steps.size(); ++j) {
      const RewriteStep& st = space_.steps[j];
      if (st.kind == PartitionKind::kFlatten || st.inputs.empty() || st.inputs[0] != piece) continue;
      if (st.kind == PartitionKind::kUniformOccupancy && st.leader == tensor) return true;
      piece = st.lower;
    }
    return false;
  }

  bool Interleaved(const std::vector<Sym>& syms, const Sym& sym, const RewriteStep& step) const {
    int lo = Level(step.upper);
    int hi = -1;
    for (const auto& v : sym.use.vars) hi = std::max(hi, ValueLevel(v));
    for (const auto& other : syms) {
      if (&other == &sym) continue;
      int k = SortKey(other);
      if (k != kLast && k > lo && k < hi) return true;
    }
    return false;
  }

  void Flatten(TensorPlan& p, std::vector<Sym>& syms, const RewriteStep& step, int s) {
    std::vector<int> pos;
    for (const auto& r : step.inputs) pos.push_back(Find(syms, r));
    int present = static_cast<int>(std::count_if(pos.begin(), pos.end(), [](int x) { return x >= 0; }));
    if (present == 0) return;
    if (present < static_cast<int>(pos.size())) {
      for (int x : pos)
        if (x >= 0) syms[static_cast<std::size_t>(x)].use.mode = RankMode::kLookup;
      return;
    }
    for (int x : pos)
      if (syms[static_cast<std::size_t>(x)].use.mode != RankMode::kIterate)
        Fail("cannot flatten rank " + syms[static_cast<std::size_t>(x)].use.name + " of " + p.tensor +
             ": it is not partitioned with the iteration space");
    const int first = *std::min_element(pos.begin(), pos.end());
    std::vector<Sym> reordered;
    for (int i = 0; i < static_cast<int>(syms.size()); ++i) {
      if (i == first)
        for (int x : pos) reordered.push_back(syms[static_cast<std::size_t>(x)]);
      if (!Contains(pos, i)) reordered.push_back(syms[static_cast<std::size_t>(i)]);
    }
    for (auto& st : InferSwizzles(Names(syms), Names(reordered), p.intermediate)) {
      st.rewrite = s;
      p.prelude.push_back(st);
    }
    syms = reordered;
    Sym merged;
    merged.use.name = step.upper;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const Sym& part = syms[static_cast<std::size_t>(first) + i];
      merged.use.label += part.use.label;
      merged.use.origin.insert(merged.use.origin.end(), part.use.origin.begin(), part.use.origin.end());
      merged.use.vars.insert(merged.use.vars.end(), part.use.vars.begin(), part.use.vars.end());
    }
    merged.loop_base = merged.use.name;
    merged.decl_base = merged.use.label;
    PreludeStep ps;
    ps.kind = PreludeStep::Kind::kFlatten;
    ps.before = Names(syms);
    ps.ranks = step.inputs;
    ps.upper = step.upper;
    ps.rewrite = s;
    ps.online = p.intermediate;
    syms.erase(syms.begin() + first, syms.begin() + first + static_cast<std::ptrdiff_t>(pos.size()));
    syms.insert(syms.begin() + first, merged);
    ps.after = Names(syms);
    p.prelude.push_back(ps);
  }

  void Finalize(Sym& sym) const {
    RankUse& u = sym.use;
    bool existential = false;
    for (const auto& v : u.vars)
      if (ValueLevel(v) < 0) existential = true;
    if (existential) {
      u.mode = RankMode::kExistential;
      u.level = -1;
      return;
    }
    if (u.mode == RankMode::kRange) {
      u.level = Level(u.name);
      if (u.level < 0) Fail("range rank " + u.name + " is not a loop rank of " + e_.output);
      return;
    }
    if (u.mode == RankMode::kIterate) {
      u.level = Level(u.name);
      const LoopRank* lr = space_.find(u.name);
      if (u.level >= 0 && lr && (u.upper || lr->vars == u.vars)) return;
      u.mode = RankMode::kLookup;
    }
    u.level = -1;
    for (const auto& v : u.vars) u.level = std::max(u.level, ValueLevel(v));
  }

  const ProblemSpec& spec_;
  const EinsumDecl& e_;
  int index_;
  IterationSpace space_;
  std::vector<std::string> loop_;
  std::map<std::string, int> level_;
};

}  // namespace

std::string PreludeStep::str() const {
  std::string tag = online ? " online" : " offline";
  switch (kind) {
    case Kind::kSwizzle:
      return "swizzle " + Join(before) + " -> " + Join(after) + tag;
    case Kind::kSplitShape:
      return "split_shape(" + std::to_string(size) + ") " + rank + " -> " + upper + ", " + lower;
    case Kind::kSplitOccupancy:
      return "split_occupancy(" + leader + "." + std::to_string(size) + ") " + rank + " -> " + upper + ", " +
             lower;
    case Kind::kFlatten: {
      std::string s = "flatten(";
      for (std::size_t i = 0; i < ranks.size(); ++i) s += (i ? ", " : "") + ranks[i];
      return s + ") -> " + upper;
    }
  }
  return "?";
}

std::vector<std::string> BaseOrder(const std::vector<std::string>& origin_order) {
  std::vector<std::string> out;
  for (const auto& r : origin_order)
    if (!Contains(out, r)) out.push_back(r);
  return out;
}

std::vector<PreludeStep> InferSwizzles(const std::vector<std::string>& current, const std::vector<std::string>& target,
                                       bool online) {
  if (current == target) return {};
  PreludeStep s;
  s.kind = PreludeStep::Kind::kSwizzle;
  s.before = current;
  s.after = target;
  s.online = online;
  return {s};
}

PartitionPlan ApplyPartitioning(const ProblemSpec& spec, int einsum) { return Planner(spec, einsum).Plan(); }

std::vector<CoIterKind> SelectCoiterators(const EinsumDecl& e, const std::vector<LoopLevel>& levels,
                                          const std::vector<TensorPlan>& operands) {
  std::vector<CoIterKind> out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    auto role = [&](const std::string& tensor) {
      for (const auto& p : operands)
        if (p.tensor == tensor)
          for (const auto& r : p.ranks)
            if (r.level == static_cast<int>(l)) {
              if (r.mode == RankMode::kIterate || r.mode == RankMode::kRange) return 2;
              if (r.mode == RankMode::kLookup) return 1;
            }
      return 0;
    };
    int concrete = 0, lookups = 0;
    bool union_join = false;
    std::function<int(const Expr&)> walk = [&](const Expr& x) -> int {
      if (x.kind == Expr::Kind::kAccess) {
        int r = role(x.tensor);
        if (r == 2) ++concrete;
        if (r == 1) ++lookups;
        return r == 2 ? 1 : 0;
      }
      int a = walk(x.args[0]), b = walk(x.args[1]);
      if ((x.kind == Expr::Kind::kAdd || x.kind == Expr::Kind::kSub) && a && b) union_join = true;
      return a + b;
    };
    walk(e.expr);
    CoIterKind k;
    if (concrete == 0)
      k = lookups ? CoIterKind::kLookup : CoIterKind::kDense;
    else if (concrete == 1)
      k = lookups ? CoIterKind::kLookup : CoIterKind::kSequential;
    else
      k = union_join ? CoIterKind::kUnion : CoIterKind::kIntersect;
    out.push_back(k);
  }
  return out;
}

const TensorPlan* LoopNest::operand(const std::string& tensor) const {
  for (const auto& p : operands)
    if (p.tensor == tensor) return &p;
  return nullptr;
}

int LoopNest::level_of(const std::string& rank) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i].rank.name == rank) return static_cast<int>(i);
  return -1;
}

std::vector<const PreludeStep*> LoopNest::online_swizzles() const {
  std::vector<const PreludeStep*> out;
  for (const auto& p : operands)
    for (const auto& s : p.prelude)
      if (s.kind == PreludeStep::Kind::kSwizzle && s.online) out.push_back(&s);
  if (output.has_storage_swizzle) out.push_back(&output.storage_swizzle);
  return out;
}

std::string LoopNest::str() const {
  std::ostringstream os;
  os << "einsum " << decl.str() << "\n";
  for (const auto& s : space.steps) os << "  rewrite " << s.str() << "\n";
  for (const auto& p : operands) {
    os << "  operand " << p.tensor << (p.intermediate ? " intermediate" : " input") << " stored "
       << Join(p.stored) << "\n";
    for (const auto& s : p.prelude) os << "    prelude " << s.str() << "\n";
    for (const auto& r : p.ranks) {
      os << "    rank " << r.name << " (" << r.label << ") " << ToString(r.mode);
      if (r.level >= 0) os << " @" << levels[static_cast<std::size_t>(r.level)].rank.name;
      os << "\n";
    }
  }
  for (const auto& l : levels) {
    os << "  loop " << l.rank.name << (l.space ? " space " : " time ") << ToString(l.coiter);
    if (!l.tensors.empty()) os << " " << Join(l.tensors);
    if (!l.lookups.empty()) os << " lookup " << Join(l.lookups);
    if (l.reduction) os << " reduce";
    os << "\n";
  }
  os << "  body " << output.tensor << (output.assign ? " = " : " <+ ") << decl.expr.str() << "\n";
  os << "  output " << output.tensor << " produced " << Join(output.produced) << " stored " << Join(output.stored);
  if (output.rewrite) os << " in-place";
  os << "\n";
  if (output.has_storage_swizzle) os << "    epilogue " << output.storage_swizzle.str() << "\n";
  return os.str();
}

LoopNest Compile(const ProblemSpec& spec, int einsum) {
  Planner planner(spec, einsum);
  PartitionPlan plan = planner.Plan();
  const EinsumDecl& e = spec.einsums.at(static_cast<std::size_t>(einsum));

  LoopNest nest;
  nest.einsum = einsum;
  nest.decl = e;
  nest.space = plan.space;
  nest.operands = std::move(plan.operands);

  const auto& st = spec.mapping.spacetime.at(e.output);
  for (const auto& name : planner.loop()) {
    LoopLevel l;
    l.rank = *plan.space.find(name);
    l.space = Contains(st.space, name);
    l.reduction = std::none_of(l.rank.vars.begin(), l.rank.vars.end(),
                               [&](const std::string& v) { return Contains(e.output_vars, v); });
    if (l.reduction) nest.reduction_ranks.push_back(name);
    if (l.rank.step >= 0 && !l.rank.upper) {
      const RewriteStep& rs = plan.space.steps[static_cast<std::size_t>(l.rank.step)];
      if (rs.kind == PartitionKind::kUniformShape) l.split_size = rs.size;
    }
    nest.levels.push_back(l);
  }
  for (const auto& p : nest.operands)
    for (const auto& r : p.ranks) {
      if (r.level < 0) continue;
      auto& l = nest.levels[static_cast<std::size_t>(r.level)];
      if (r.mode == RankMode::kLookup) {
        if (!Contains(l.lookups, p.tensor)) l.lookups.push_back(p.tensor);
      } else if (!Contains(l.tensors, p.tensor)) {
        l.tensors.push_back(p.tensor);
      }
    }
  auto kinds = SelectCoiterators(e, nest.levels, nest.operands);
  for (std::size_t i = 0; i < kinds.size(); ++i) nest.levels[i].coiter = kinds[i];

  OutputPlan& out = nest.output;
  out.tensor = e.output;
  const TensorDecl* decl = spec.tensor(e.output);
  out.declared = decl->ranks;
  out.stored = spec.rank_order(e.output);
  std::vector<std::size_t> order(e.output_vars.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (const auto& v : e.output_vars)
    if (planner.ValueLevel(v) < 0) Fail("output variable " + v + " of " + e.output + " is not in the loop order");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return planner.ValueLevel(e.output_vars[a]) < planner.ValueLevel(e.output_vars[b]);
  });
  std::vector<std::string> produced_decl;
  for (auto i : order) {
    out.vars.push_back(e.output_vars[i]);
    out.produced.push_back(RankOf(e.output_vars[i]));
    produced_decl.push_back(decl->ranks[i]);
    out.write_level = std::max(out.write_level, planner.ValueLevel(e.output_vars[i]));
  }
  auto sw = InferSwizzles(produced_decl, out.stored, true);
  if (!sw.empty()) {
    out.storage_swizzle = sw[0];
    out.has_storage_swizzle = true;
  }
  out.assign = e.expr.kind == Expr::Kind::kTake;
  for (int i = 0; i < einsum && !out.rewrite; ++i)
    if (spec.einsums[static_cast<std::size_t>(i)].output == e.output) out.rewrite = true;
  CascadeDAG dag = BuildCascade(spec);
  for (std::size_t j = 0; j < spec.einsums.size() && !out.rewrite; ++j) {
    auto ins = spec.einsums[j].inputs();
    for (std::size_t i = 0; i < ins.size(); ++i)
      if (ins[i] == e.output && dag.producers[j][i] < 0 && static_cast<int>(j) <= einsum) out.rewrite = true;
  }
  return nest;
}

std::vector<LoopNest> CompileCascade(const ProblemSpec& spec) {
  std::vector<LoopNest> out;
  for (std::size_t i = 0; i < spec.einsums.size(); ++i) out.push_back(Compile(spec, static_cast<int>(i)));
  return out;
}

int FusionSchedule::block_of(int einsum) const {
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (Contains(blocks[b], einsum)) return static_cast<int>(b);
  return -1;
}

std::vector<std::string> TemporalPrefix(const ProblemSpec& spec, const EinsumDecl& e) {
  const auto& loop = spec.mapping.loop_order.at(e.output);
  const auto& space = spec.mapping.spacetime.at(e.output).space;
  std::vector<std::string> out;
  for (const auto& r : loop) {
    if (Contains(space, r)) break;
    out.push_back(r);
  }
  return out;
}

std::set<std::string> ComputeComponents(const ProblemSpec& spec, const EinsumDecl& e) {
  std::set<std::string> out;
  auto bit = spec.binding.find(e.output);
  if (bit == spec.binding.end()) return out;
  const Topology* topo = spec.architecture.find(bit->second.topology);
  if (!topo) return out;
  auto placed = PlaceComponents(*topo);
  for (const auto& cb : bit->second.components)
    for (const auto& pc : placed)
      if (pc.component->name == cb.component && pc.component->cls != ComponentClass::kDram &&
          pc.component->cls != ComponentClass::kBuffer)
        out.insert(cb.component);
  return out;
}

FusionSchedule ScheduleFusion(const ProblemSpec& spec) {
  FusionSchedule sched;
  CascadeDAG dag = BuildCascade(spec);
  auto topology = [&](const EinsumDecl& e) {
    auto it = spec.binding.find(e.output);
    return it == spec.binding.end() ? std::string() : it->second.topology;
  };
  auto compatible = [&](int a, int b) {
    const auto& ea = spec.einsums[static_cast<std::size_t>(a)];
    const auto& eb = spec.einsums[static_cast<std::size_t>(b)];
    if (topology(ea) != topology(eb)) return false;
    if (TemporalPrefix(spec, ea) != TemporalPrefix(spec, eb)) return false;
    auto ca = ComputeComponents(spec, ea), cb = ComputeComponents(spec, eb);
    return std::none_of(ca.begin(), ca.end(), [&](const std::string& c) { return cb.count(c) != 0; });
  };
  for (int e : dag.topo_order) {
    if (!sched.blocks.empty()) {
      auto& block = sched.blocks.back();
      if (std::all_of(block.begin(), block.end(), [&](int m) { return compatible(m, e); })) {
        block.push_back(e);
        continue;
      }
    }
    sched.blocks.push_back({e});
  }
  return sched;
}

}  // namespace fibersim
