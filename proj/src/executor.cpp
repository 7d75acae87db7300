#include "fibersim/executor.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fibersim/error.hpp"
#include "fibersim/tensor_io.hpp"
#include "fibersim/transforms.hpp"

namespace fibersim {

std::vector<Coord> EinsumTrace::prefix(std::int32_t node, int depth) const {
  std::vector<Coord> out(static_cast<std::size_t>(std::max(depth, 0)));
  for (std::int32_t n = node; n > 0; n = nodes[static_cast<std::size_t>(n)].parent) {
    const IterNode& x = nodes[static_cast<std::size_t>(n)];
    if (x.level < depth) out[static_cast<std::size_t>(x.level)] = x.coord;
  }
  return out;
}

namespace {

constexpr double kExactLimit = 9007199254740992.0;  // 2^53

[[noreturn]] void Fail(const std::string& msg) { throw Error("executor", msg); }

template <class C, class T>
bool Contains(const C& c, const T& v) {
  return std::find(c.begin(), c.end(), v) != c.end();
}

// Half-open coordinate interval; an absent bound is unbounded.
struct Range {
  std::optional<Coord> lo, hi;

  void Clip(const std::optional<Coord>& l, const std::optional<Coord>& h) {
    if (l && (!lo || *lo < *l)) lo = l;
    if (h && (!hi || *h < *hi)) hi = h;
  }
  bool empty() const { return lo && hi && !(*lo < *hi); }
};

// Chunk boundaries of one occupancy split, for tensors that scan the split
// rank as a coordinate window.
struct ChunkTable {
  std::vector<std::string> context;  // leader ranks above the split rank
  std::map<std::vector<Coord>, std::vector<Coord>> starts;
  // Per label, over all leader fibers: whether it opens some fiber, and the
  // largest end of a chunk it starts (none when one runs to the end).
  std::map<Coord, std::pair<bool, std::optional<Coord>>> loose;
};

struct FiberPos {
  std::int64_t ordinal = 0;  // fiber index within its rank
  std::int64_t base = 0;     // DFS index of its first element within the rank
};

struct Operand {
  const TensorPlan* plan = nullptr;
  Tensor view;
  int table = 0;
  std::vector<RankFormat> formats;
  std::vector<std::int64_t> shapes;
  std::unordered_map<const Fiber*, FiberPos> pos;
  bool passive = false;  // non-copied take operand: coordinates only at its leaf
  int leaf = -1;         // last rank consumed by the loop nest
};

struct Cursor {
  int rank = 0;
  const Fiber* fiber = nullptr;
  Value value = 0;
  bool present = true;
};

struct CSet {
  enum Kind { kAll, kEmpty, kList } kind = kAll;
  std::vector<Coord> coords;
};

// Swizzle events for reordering `t` (ranks in `before` order) into `after`.
void RecordSwizzle(const Tensor& t, const std::vector<std::string>& after, const std::vector<bool>& reduced,
                   const std::string& tensor, bool storage, std::vector<SwizzleEvent>& out) {
  const auto& before = t.ranks();
  std::size_t p = 0;
  while (p < before.size() && p < after.size() && before[p] == after[p]) ++p;
  std::vector<std::size_t> key_pos;
  for (std::size_t i = p; i < after.size(); ++i)
    key_pos.push_back(static_cast<std::size_t>(std::find(before.begin(), before.end(), after[i]) - before.begin()));
  std::size_t kept = key_pos.size();
  while (kept > 0 && reduced[p + kept - 1]) --kept;

  auto points = t.points();
  std::size_t i = 0;
  while (i < points.size()) {
    std::size_t j = i;
    auto same_prefix = [&](std::size_t a, std::size_t b) {
      for (std::size_t k = 0; k < p; ++k)
        if (points[a].coords[k] != points[b].coords[k]) return false;
      return true;
    };
    while (j < points.size() && same_prefix(i, j)) ++j;
    SwizzleEvent ev;
    ev.tensor = tensor;
    ev.storage = storage;
    ev.space = static_cast<std::int64_t>(out.size());
    ev.n = static_cast<std::int64_t>(j - i);
    std::vector<Coord> prev;
    std::set<std::vector<Coord>> distinct;
    for (std::size_t k = i; k < j; ++k) {
      std::vector<Coord> key;
      for (auto kp : key_pos) key.push_back(points[k].coords[kp]);
      if (k > i && key < prev) ++ev.runs;
      distinct.insert(std::vector<Coord>(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(kept)));
      prev = std::move(key);
    }
    ev.duplicates = storage ? 0 : ev.n - static_cast<std::int64_t>(distinct.size());
    out.push_back(ev);
    i = j;
  }
}

class Runner {
 public:
  Runner(const ProblemSpec& spec, const LoopNest& nest, TensorMap& env)
      : spec_(spec), nest_(nest), env_(env), sr_(spec.semiring), e_(nest.decl) {}

  EinsumTrace Run() {
    trace_.einsum = nest_.einsum;
    trace_.output = e_.output;
    ShapeMap known;
    for (const auto& [name, t] : env_) known[name] = t.shape();
    for (const auto& in : e_.inputs())
      if (!env_.count(in)) Fail("Einsum " + e_.str() + " reads " + in + ", which has no data");
    for (const auto& v : e_.variables()) {
      var_id_[v] = static_cast<int>(vars_.size());
      vars_.push_back(v);
      extent_.push_back(VariableExtent(spec_, e_, v, known));
    }
    binding_.assign(vars_.size(), 0);
    SetupLevels();
    SetupOperands();
    SetupOutput();

    trace_.nodes.push_back(IterNode{});
    cur_.resize(ops_.size());
    for (std::size_t o = 0; o < ops_.size(); ++o) {
      cur_[o].fiber = &ops_[o].view.root();
      if (ops_[o].view.depth() == 0) cur_[o].value = ops_[o].view.scalar();
      CheckExistential(o, 0);
    }
    hit_.assign(levels_(), std::vector<std::pair<const Fiber*, std::size_t>>(ops_.size(), {nullptr, 0}));
    bound_.assign(levels_(), Coord());
    if (Present(e_.expr)) {
      if (out_.write_level < 0) reg_ = {};
      Visit(0, 0);
      if (out_.write_level < 0) Commit(0);
    }
    Finish();
    return std::move(trace_);
  }

 private:
  std::size_t levels_() const { return nest_.levels.size(); }

  // ------------------------------------------------------------------ setup

  void SetupLevels() {
    const auto& steps = nest_.space.steps;
    for (const auto& l : nest_.levels) {
      trace_.levels.push_back(l.rank.name);
      trace_.spatial.push_back(l.space);
      std::int64_t bound = 1;
      if (l.space) {
        const LoopRank& r = l.rank;
        std::int64_t ext = 1;
        for (const auto& v : r.vars) ext *= extent_[static_cast<std::size_t>(var_id_.at(v))];
        if (r.step < 0) {
          bound = ext;
        } else {
          const RewriteStep& s = steps[static_cast<std::size_t>(r.step)];
          if (!r.upper) {
            bound = s.size;
          } else {
            std::int64_t parent = ext;
            for (int t = r.step - 1; t >= 0; --t)
              if (steps[static_cast<std::size_t>(t)].lower == s.inputs[0] &&
                  steps[static_cast<std::size_t>(t)].kind != PartitionKind::kFlatten) {
                parent = steps[static_cast<std::size_t>(t)].size;
                break;
              }
            bound = (parent + s.size - 1) / s.size;
          }
        }
      }
      trace_.space_bound.push_back(std::max<std::int64_t>(bound, 1));
    }
  }

  std::vector<RankFormat> Formats(const std::string& tensor, const std::vector<std::string>& labels,
                                  const std::vector<std::vector<std::string>>& origins,
                                  const std::vector<bool>& upper, std::string& config) {
    const FormatConfig* cfg = SelectConfig(spec_, e_.output, tensor);
    std::vector<RankFormat> out;
    config = cfg ? cfg->name : "";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!cfg) {
        out.push_back(RankFormat{FormatType::kC, Layout::kSoA, 0, 0, 0});
        continue;
      }
      RankFormat f = ResolveRankFormat(*cfg, labels[i], origins[i], upper[i]);
      if (upper[i] && f.type == FormatType::kU) f.type = FormatType::kC;
      out.push_back(f);
    }
    return out;
  }

  static std::string SymName(const IndexExpr& ix) { return ix.affine() ? "(" + ix.str() + ")" : RankOf(ix.vars[0]); }

  bool Reduced(const std::string& name, const TensorPlan& p) const {
    std::vector<std::string> vars;
    if (const LoopRank* r = nest_.space.find(name)) {
      vars = r->vars;
    } else {
      for (const auto& u : p.ranks)
        if (u.name == name) vars = u.vars;
      if (vars.empty()) vars = {VarOf(name)};
    }
    return std::none_of(vars.begin(), vars.end(), [&](const std::string& v) { return Contains(e_.output_vars, v); });
  }

  void SetupOperands() {
    for (const auto& p : nest_.operands) {
      Operand op;
      op.plan = &p;
      const TensorDecl* decl = spec_.tensor(p.tensor);
      Tensor t = Swizzle(env_.at(p.tensor), p.stored);
      std::vector<std::string> names;
      for (const auto& d : p.stored) {
        auto i = static_cast<std::size_t>(std::find(decl->ranks.begin(), decl->ranks.end(), d) - decl->ranks.begin());
        names.push_back(SymName(p.subscripts[i]));
      }
      t.rename_ranks(names);
      op.view = std::move(t);
      ops_.push_back(std::move(op));
      op_index_[p.tensor] = static_cast<int>(ops_.size() - 1);
    }
    ApplyPreludes();

    for (std::size_t o = 0; o < ops_.size(); ++o) {
      Operand& op = ops_[o];
      const TensorPlan& p = *op.plan;
      std::vector<std::string> names, labels;
      std::vector<std::vector<std::string>> origins;
      std::vector<bool> upper;
      for (const auto& r : p.ranks) {
        names.push_back(r.name);
        labels.push_back(r.label);
        origins.push_back(r.origin);
        upper.push_back(r.upper);
        if (r.mode != RankMode::kExistential) op.leaf = static_cast<int>(names.size()) - 1;
      }
      op.view.rename_ranks(names);
      TraceTable table;
      table.einsum = nest_.einsum;
      table.tensor = p.tensor;
      table.intermediate = p.intermediate;
      table.labels = labels;
      table.origins = origins;
      op.formats = Formats(p.tensor, labels, origins, upper, table.config);
      table.formats = op.formats;
      op.table = static_cast<int>(trace_.tables.size());
      trace_.tables.push_back(table);
      op.shapes = op.view.shape();
      Index(op, op.view.root(), 0);
    }
    MarkPassive(e_.expr);
  }

  void Index(Operand& op, const Fiber& f, std::size_t depth) {
    if (depth >= op.view.depth()) return;
    if (fiber_count_.size() <= depth) {
      fiber_count_.resize(depth + 1, 0);
      elem_count_.resize(depth + 1, 0);
    }
    op.pos[&f] = FiberPos{fiber_count_[depth]++, elem_count_[depth]};
    elem_count_[depth] += static_cast<std::int64_t>(f.size());
    if (depth + 1 < op.view.depth())
      for (std::size_t i = 0; i < f.size(); ++i) Index(op, f.payload(i).fiber(), depth + 1);
    if (depth == 0) {
      fiber_count_.clear();
      elem_count_.clear();
    }
  }

  void MarkPassive(const Expr& x) {
    if (x.kind == Expr::Kind::kTake) {
      const Expr& other = x.args[static_cast<std::size_t>(1 - x.take_arg)];
      if (other.kind == Expr::Kind::kAccess) ops_[static_cast<std::size_t>(op_index_.at(other.tensor))].passive = true;
    }
    for (const auto& a : x.args) MarkPassive(a);
  }

  void ApplyStep(Operand& op, const PreludeStep& st) {
    op.view.rename_ranks(st.before);
    switch (st.kind) {
      case PreludeStep::Kind::kSwizzle:
        if (st.online) {
          std::vector<bool> reduced;
          for (const auto& n : st.after) reduced.push_back(Reduced(n, *op.plan));
          RecordSwizzle(op.view, st.after, reduced, op.plan->tensor, false, trace_.swizzles);
        }
        op.view = Swizzle(op.view, st.after);
        break;
      case PreludeStep::Kind::kSplitShape:
        op.view = PartitionUniformShape(op.view, st.rank, st.size, st.upper, st.lower);
        break;
      case PreludeStep::Kind::kFlatten:
        op.view = Flatten(op.view, st.ranks, st.upper);
        break;
      case PreludeStep::Kind::kSplitOccupancy:
        Fail("occupancy split applied outside its group");
    }
  }

  void ApplyPreludes() {
    std::set<int> stages;
    for (const auto& op : ops_)
      for (const auto& st : op.plan->prelude) stages.insert(st.rewrite);
    for (int stage : stages) {
      // Occupancy splits of one rewrite step are applied jointly.
      const PreludeStep* occ = nullptr;
      std::vector<std::size_t> members;
      for (std::size_t o = 0; o < ops_.size(); ++o)
        for (const auto& st : ops_[o].plan->prelude) {
          if (st.rewrite != stage) continue;
          if (st.kind == PreludeStep::Kind::kSplitOccupancy) {
            occ = &st;
            ops_[o].view.rename_ranks(st.before);
            members.push_back(o);
          } else {
            ApplyStep(ops_[o], st);
          }
        }
      if (!occ) continue;
      auto lit = op_index_.find(occ->leader);
      if (lit == op_index_.end()) Fail("occupancy leader " + occ->leader + " is not an operand");
      const auto leader = static_cast<std::size_t>(lit->second);
      std::vector<Tensor> followers;
      for (auto m : members)
        if (m != leader) followers.push_back(ops_[m].view);
      ChunkTable& ct = chunks_[occ->rewrite];
      if (auto r = ops_[leader].view.rank_index(occ->rank))
        ct.context.assign(ops_[leader].view.ranks().begin(),
                          ops_[leader].view.ranks().begin() + static_cast<std::ptrdiff_t>(*r));
      auto part = PartitionUniformOccupancy(ops_[leader].view, followers, occ->rank, occ->size, occ->upper, occ->lower);
      ct.starts = std::move(part.starts);
      for (const auto& [ctx, st] : ct.starts)
        for (std::size_t i = 0; i < st.size(); ++i) {
          auto [it, fresh] = ct.loose.try_emplace(st[i], false, std::nullopt);
          if (i == 0) it->second.first = true;
          std::optional<Coord> end;
          if (i + 1 < st.size()) end = st[i + 1];
          auto& hi = it->second.second;
          if (fresh || (hi && (!end || *hi < *end))) hi = end;
        }
      ops_[leader].view = std::move(part.leader);
      std::size_t k = 0;
      for (auto m : members)
        if (m != leader) ops_[m].view = std::move(part.followers[k++]);
    }
  }

  void SetupOutput() {
    out_ = nest_.output;
    const TensorDecl* decl = spec_.tensor(e_.output);
    TraceTable table;
    table.einsum = nest_.einsum;
    table.tensor = e_.output;
    table.output = true;
    std::vector<std::vector<std::string>> origins;
    std::vector<bool> upper;
    for (const auto& v : out_.vars) {
      auto i = static_cast<std::size_t>(std::find(e_.output_vars.begin(), e_.output_vars.end(), v) -
                                        e_.output_vars.begin());
      produced_labels_.push_back(decl->ranks[i]);
      produced_shape_.push_back(extent_[static_cast<std::size_t>(var_id_.at(v))]);
      out_var_ids_.push_back(var_id_.at(v));
      origins.push_back({decl->ranks[i]});
      upper.push_back(false);
    }
    table.labels = produced_labels_;
    table.origins = origins;
    out_formats_ = Formats(e_.output, produced_labels_, origins, upper, table.config);
    table.formats = out_formats_;
    out_table_ = static_cast<int>(trace_.tables.size());
    trace_.tables.push_back(table);
    rank_prefixes_.resize(out_.vars.size());
    rank_counter_.assign(out_.vars.size(), 0);
  }

  // ------------------------------------------------------------------ trace

  void Emit(int table, std::size_t rank, const RankFormat& f, Datum d, bool write, std::int32_t node,
            std::int64_t position) {
    if (DatumBits(f, d) == 0) return;
    AccessRecord r;
    r.table = static_cast<std::uint32_t>(table);
    r.rank = static_cast<std::uint16_t>(rank);
    r.datum = d;
    r.write = write;
    r.node = node;
    r.position = position;
    trace_.records.push_back(r);
  }

  void Read(const Operand& op, std::size_t rank, Datum d, std::int32_t node, std::int64_t position) {
    Emit(op.table, rank, op.formats[rank], d, false, node, position);
  }

  // ------------------------------------------------------------------ ranges

  // Coordinate window of the piece produced by rewrite step `s`, read from
  // the already-bound upper level.
  void ClipByStep(Range& r, int s, int level) const {
    const RewriteStep& st = nest_.space.steps[static_cast<std::size_t>(s)];
    const int lu = nest_.level_of(st.upper);
    if (lu < 0 || lu >= level) return;
    const Coord& label = bound_[static_cast<std::size_t>(lu)];
    if (st.kind == PartitionKind::kUniformShape) {
      r.Clip(label, Coord(label.scalar() + st.size));
      return;
    }
    if (st.kind != PartitionKind::kUniformOccupancy) return;
    auto ct = chunks_.find(s);
    if (ct == chunks_.end()) return;
    std::vector<Coord> ctx;
    for (const auto& name : ct->second.context) {
      auto v = RankValue(name, level, s);
      if (!v) break;
      ctx.push_back(*v);
    }
    if (ctx.size() == ct->second.context.size()) {
      auto f = ct->second.starts.find(ctx);
      if (f == ct->second.starts.end()) return;
      const auto& st = f->second;
      auto i = static_cast<std::size_t>(std::lower_bound(st.begin(), st.end(), label) - st.begin());
      if (i == st.size() || st[i] != label) {
        r.Clip(label, label);  // this leader fiber has no chunk here
        return;
      }
      std::optional<Coord> lo, hi;
      if (i > 0) lo = label;
      if (i + 1 < st.size()) hi = st[i + 1];
      r.Clip(lo, hi);
      return;
    }
    // The leader fiber is not pinned down yet: take the union of the chunks
    // this label starts.
    auto l = ct->second.loose.find(label);
    if (l == ct->second.loose.end()) return;
    r.Clip(l->second.first ? std::nullopt : std::optional<Coord>(label), l->second.second);
  }

  // Coordinate of the rank `name` once the levels above `level` are bound.
  // `name` as it stands after rewrite step `after`.
  std::optional<Coord> RankValue(const std::string& name, int level, int after) const {
    const auto& steps = nest_.space.steps;
    for (auto i = static_cast<std::size_t>(after + 1); i < steps.size(); ++i) {
      if (!Contains(steps[i].inputs, name)) continue;
      if (steps[i].kind == PartitionKind::kFlatten) return std::nullopt;
      return RankValue(steps[i].lower, level, static_cast<int>(i));
    }
    const int l = nest_.level_of(name);
    if (l < 0 || l >= level) return std::nullopt;
    return bound_[static_cast<std::size_t>(l)];
  }

  // Values the loop rank at `level` may take given the enclosing shape-split labels.
  Range Domain(int level) const {
    Range r;
    const LoopRank& rank = nest_.levels[static_cast<std::size_t>(level)].rank;
    if (rank.vars.size() != 1) return r;
    const std::string& v = rank.vars[0];
    r.Clip(Coord(0), Coord(extent_[static_cast<std::size_t>(var_id_.at(v))]));
    for (int l = 0; l < level; ++l) {
      const LoopRank& up = nest_.levels[static_cast<std::size_t>(l)].rank;
      if (!up.upper || up.vars != rank.vars || up.step < 0) continue;
      const RewriteStep& st = nest_.space.steps[static_cast<std::size_t>(up.step)];
      if (st.kind != PartitionKind::kUniformShape) continue;
      const Coord& label = bound_[static_cast<std::size_t>(l)];
      r.Clip(label, Coord(label.scalar() + st.size));
    }
    // Shape labels stand for [label, label + size); keep those that overlap.
    if (rank.upper && rank.step >= 0) {
      const RewriteStep& own = nest_.space.steps[static_cast<std::size_t>(rank.step)];
      if (own.kind == PartitionKind::kUniformShape && r.lo) r.lo = Coord(r.lo->scalar() - own.size + 1);
    }
    return r;
  }

  Range OperandRange(const RankUse& use, int level) const {
    Range r = Domain(level);
    if (use.mode == RankMode::kRange) {
      for (int s : use.range_steps) ClipByStep(r, s, level);
    } else {
      // A split tensor's own lower fiber already holds exactly its chunk; an
      // occupancy label fiber may merge chunks of several leader fibers.
      const LoopRank& lr = nest_.levels[static_cast<std::size_t>(level)].rank;
      if (lr.step >= 0 && !lr.upper &&
          nest_.space.steps[static_cast<std::size_t>(lr.step)].kind == PartitionKind::kUniformShape)
        ClipByStep(r, lr.step, level);
    }
    return r;
  }

  std::vector<Coord> DenseCoords(int level) const {
    const LoopRank& rank = nest_.levels[static_cast<std::size_t>(level)].rank;
    if (rank.vars.size() != 1) Fail("dense iteration over flattened rank " + rank.name + " is not supported");
    Range r = Domain(level);
    std::int64_t step = 1;
    if (rank.upper) {
      const RewriteStep& st = nest_.space.steps[static_cast<std::size_t>(rank.step)];
      if (st.kind != PartitionKind::kUniformShape)
        Fail("rank " + rank.name + " has no occupancy leader to iterate");
      step = st.size;
    }
    std::vector<Coord> out;
    std::int64_t lo = r.lo->scalar(), hi = r.hi->scalar();
    std::int64_t first = lo <= 0 ? 0 : ((lo + step - 1) / step) * step;
    for (std::int64_t c = first; c < hi; c += step) out.push_back(Coord(c));
    return out;
  }

  // ------------------------------------------------------------------ sets

  struct LevelState {
    std::vector<bool> participates;
    std::vector<std::vector<Coord>> coords;  // per operand, within range
    std::vector<Range> ranges;
    std::vector<const std::vector<Coord>*> probe;  // U operands probed at another side's coordinates
  };

  static std::vector<Coord> IntersectCoords(const std::vector<Coord>& a, const std::vector<Coord>& b,
                                            IntersectTally& t) {
    std::vector<Coord> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) {
        out.push_back(a[i]);
        ++i;
        ++j;
      } else if (a[i] < b[j]) {
        ++i;
      } else {
        ++j;
      }
    }
    t.events += 1;
    t.left += static_cast<std::int64_t>(a.size());
    t.right += static_cast<std::int64_t>(b.size());
    t.matches += static_cast<std::int64_t>(out.size());
    t.steps += static_cast<std::int64_t>(i + j);
    i = j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) {
        ++i;
        ++j;
      } else if (a[i] < b[j]) {
        i = static_cast<std::size_t>(std::lower_bound(a.begin() + static_cast<std::ptrdiff_t>(i), a.end(), b[j]) -
                                     a.begin());
        ++t.probes;
      } else {
        j = static_cast<std::size_t>(std::lower_bound(b.begin() + static_cast<std::ptrdiff_t>(j), b.end(), a[i]) -
                                     b.begin());
        ++t.probes;
      }
    }
    return out;
  }

  bool IsULeaf(const Expr& x, const LevelState& ls) const {
    if (x.kind != Expr::Kind::kAccess) return false;
    auto o = static_cast<std::size_t>(op_index_.at(x.tensor));
    if (!ls.participates[o]) return false;
    return ops_[o].formats[static_cast<std::size_t>(cur_[o].rank)].type == FormatType::kU;
  }

  CSet Eval(const Expr& x, LevelState& ls, int level, std::int64_t space) {
    if (x.kind == Expr::Kind::kAccess) {
      auto o = static_cast<std::size_t>(op_index_.at(x.tensor));
      CSet s;
      if (!cur_[o].present) {
        s.kind = CSet::kEmpty;
      } else if (ls.participates[o]) {
        s.kind = CSet::kList;
        s.coords = ls.coords[o];
      }
      return s;
    }
    CSet a = Eval(x.args[0], ls, level, space);
    CSet b = Eval(x.args[1], ls, level, space);
    if (x.kind == Expr::Kind::kMul || x.kind == Expr::Kind::kTake) {
      if (a.kind == CSet::kEmpty || b.kind == CSet::kEmpty) return CSet{CSet::kEmpty, {}};
      if (a.kind == CSet::kAll) return b;
      if (b.kind == CSet::kAll) return a;
      const bool ua = IsULeaf(x.args[0], ls), ub = IsULeaf(x.args[1], ls);
      IntersectTally& t = trace_.intersections[nest_.levels[static_cast<std::size_t>(level)].rank.name][space];
      if (x.args[0].kind == Expr::Kind::kAccess) t.left_tensor = x.args[0].tensor;
      if (x.args[1].kind == Expr::Kind::kAccess) t.right_tensor = x.args[1].tensor;
      if (ub) {
        probe_lists_.push_back(a.coords);
        ls.probe[static_cast<std::size_t>(op_index_.at(x.args[1].tensor))] = &probe_lists_.back();
      } else if (ua) {
        probe_lists_.push_back(b.coords);
        ls.probe[static_cast<std::size_t>(op_index_.at(x.args[0].tensor))] = &probe_lists_.back();
      }
      CSet out;
      out.kind = CSet::kList;
      out.coords = IntersectCoords(a.coords, b.coords, t);
      return out;
    }
    if (a.kind == CSet::kEmpty) return b;
    if (b.kind == CSet::kEmpty) return a;
    if (a.kind == CSet::kAll || b.kind == CSet::kAll) return CSet{};
    CSet out;
    out.kind = CSet::kList;
    std::set_union(a.coords.begin(), a.coords.end(), b.coords.begin(), b.coords.end(), std::back_inserter(out.coords));
    return out;
  }

  // Structural presence of the expression under the current cursors.
  bool Present(const Expr& x) const {
    switch (x.kind) {
      case Expr::Kind::kAccess: return cur_[static_cast<std::size_t>(op_index_.at(x.tensor))].present;
      case Expr::Kind::kMul:
      case Expr::Kind::kTake: return Present(x.args[0]) && Present(x.args[1]);
      case Expr::Kind::kAdd:
      case Expr::Kind::kSub: return Present(x.args[0]) || Present(x.args[1]);
    }
    return false;
  }

  // ------------------------------------------------------------------ walk

  void ScanTraffic(std::size_t o, const LevelState& ls, std::int32_t node) {
    const Operand& op = ops_[o];
    const Cursor& c = cur_[o];
    const auto rank = static_cast<std::size_t>(c.rank);
    const RankFormat& f = op.formats[rank];
    const FiberPos fp = op.pos.at(c.fiber);
    const Range& r = ls.ranges[o];
    if (f.fhbits > 0 && f.layout == Layout::kSoA) Read(op, rank, Datum::kHeader, node, fp.ordinal);
    const std::int64_t shape = op.shapes[rank];
    auto slot_range = [&](std::int64_t& lo, std::int64_t& hi) {
      lo = r.lo ? std::max<std::int64_t>(0, r.lo->scalar()) : 0;
      hi = r.hi ? std::min<std::int64_t>(shape, r.hi->scalar()) : shape;
    };
    if (f.type == FormatType::kC) {
      std::size_t begin = r.lo ? c.fiber->lower_bound(*r.lo) : 0;
      std::size_t end = r.hi ? c.fiber->lower_bound(*r.hi) : c.fiber->size();
      for (std::size_t i = begin; i < end; ++i) {
        const std::int64_t p = fp.base + static_cast<std::int64_t>(i);
        Read(op, rank, Datum::kCoord, node, p);
        if (f.fhbits > 0 && f.layout == Layout::kAoS) Read(op, rank, Datum::kHeader, node, p);
      }
      return;
    }
    std::int64_t lo = 0, hi = 0;
    slot_range(lo, hi);
    if (f.type == FormatType::kB) {
      for (std::int64_t x = lo; x < hi; ++x) Read(op, rank, Datum::kCoord, node, fp.ordinal * shape + x);
      return;
    }
    if (const auto* probe = ls.probe[o]) {
      for (const Coord& x : *probe) {
        const std::int64_t s = x.scalar();
        if (s >= lo && s < hi) Read(op, rank, Datum::kPayload, node, fp.ordinal * shape + s);
      }
      return;
    }
    for (std::int64_t x = lo; x < hi; ++x) {
      Read(op, rank, Datum::kCoord, node, fp.ordinal * shape + x);
      Read(op, rank, Datum::kPayload, node, fp.ordinal * shape + x);
    }
  }

  // Moves operand `o` past rank `rank` to the element at index `idx`.
  void Descend(std::size_t o, std::size_t idx, bool charge, std::int32_t node) {
    Operand& op = ops_[o];
    Cursor& c = cur_[o];
    const auto rank = static_cast<std::size_t>(c.rank);
    const RankFormat& f = op.formats[rank];
    const bool leaf = static_cast<int>(rank) == op.leaf;
    if (charge && !(leaf && op.passive)) {
      const FiberPos fp = op.pos.at(c.fiber);
      if (f.type == FormatType::kU)
        Read(op, rank, Datum::kPayload, node, fp.ordinal * op.shapes[rank] + c.fiber->coord(idx).scalar());
      else
        Read(op, rank, Datum::kPayload, node, fp.base + static_cast<std::int64_t>(idx));
    }
    const Payload& p = c.fiber->payload(idx);
    ++c.rank;
    if (p.is_fiber()) {
      c.fiber = &p.fiber();
    } else {
      c.value = p.value();
      c.fiber = nullptr;
    }
  }

  void CheckExistential(std::size_t o, std::int32_t node) {
    Operand& op = ops_[o];
    Cursor& c = cur_[o];
    if (!c.present || !c.fiber) return;
    const auto& ranks = op.plan->ranks;
    if (static_cast<std::size_t>(c.rank) >= ranks.size()) return;
    if (ranks[static_cast<std::size_t>(c.rank)].mode != RankMode::kExistential) return;
    const FiberPos fp = op.pos.at(c.fiber);
    const auto rank = static_cast<std::size_t>(c.rank);
    if (op.formats[rank].type == FormatType::kC) {
      Read(op, rank, Datum::kCoord, node, fp.base);
    } else if (!c.fiber->empty()) {
      Read(op, rank, Datum::kCoord, node, fp.ordinal * op.shapes[rank] + c.fiber->coord(0).scalar());
    }
    c.present = !c.fiber->empty();
    c.value = 1;
    c.fiber = nullptr;
    c.rank = static_cast<int>(ranks.size());
  }

  Coord LookupCoord(const RankUse& use) const {
    auto val = [&](const std::string& v) { return binding_[static_cast<std::size_t>(var_id_.at(v))]; };
    if (use.origin.size() == 1 && use.vars.size() > 1) {
      std::int64_t s = 0;
      for (const auto& v : use.vars) s += val(v);
      return Coord(s);
    }
    if (use.vars.size() == 1) return Coord(val(use.vars[0]));
    Coord c(val(use.vars[0]));
    for (std::size_t i = 1; i < use.vars.size(); ++i) c = Coord::Concat(c, Coord(val(use.vars[i])));
    return c;
  }

  void Lookup(std::size_t o, std::int32_t node) {
    Operand& op = ops_[o];
    Cursor& c = cur_[o];
    const auto rank = static_cast<std::size_t>(c.rank);
    const RankUse& use = op.plan->ranks[rank];
    const RankFormat& f = op.formats[rank];
    const FiberPos fp = op.pos.at(c.fiber);
    const Fiber& fiber = *c.fiber;
    Coord key = LookupCoord(use);
    std::optional<std::size_t> idx;
    if (use.upper) {
      std::size_t ub = fiber.lower_bound(key);
      if (ub < fiber.size() && fiber.coord(ub) == key) idx = ub;
      else if (ub > 0) idx = ub - 1;
      else if (!fiber.empty()) idx = 0;
    } else {
      idx = fiber.find(key);
    }
    if (f.type == FormatType::kU && !use.upper) {
      const std::int64_t s = key.arity() == 1 ? key.scalar() : -1;
      if (s >= 0 && s < op.shapes[rank]) {
        const bool leaf = static_cast<int>(rank) == op.leaf;
        if (!(leaf && op.passive) || !idx) Read(op, rank, Datum::kPayload, node, fp.ordinal * op.shapes[rank] + s);
      }
      if (!idx) {
        c.present = false;
        return;
      }
      Descend(o, *idx, false, node);
      return;
    }
    if (f.type == FormatType::kB) {
      const std::int64_t s = key.arity() == 1 ? key.scalar() : -1;
      if (s >= 0 && s < op.shapes[rank]) Read(op, rank, Datum::kCoord, node, fp.ordinal * op.shapes[rank] + s);
    } else if (!fiber.empty()) {
      std::size_t at = std::min(fiber.lower_bound(key), fiber.size() - 1);
      Read(op, rank, Datum::kCoord, node, fp.base + static_cast<std::int64_t>(at));
    }
    if (!idx) {
      c.present = false;
      return;
    }
    Descend(o, *idx, true, node);
  }

  void Visit(int level, std::int32_t parent) {
    if (level == static_cast<int>(levels_())) {
      Evaluate(parent);
      return;
    }
    const auto L = static_cast<std::size_t>(level);
    const LoopLevel& ll = nest_.levels[L];
    const std::int64_t parent_space = trace_.nodes[static_cast<std::size_t>(parent)].space;

    LevelState ls;
    ls.participates.assign(ops_.size(), false);
    ls.coords.resize(ops_.size());
    ls.ranges.resize(ops_.size());
    ls.probe.assign(ops_.size(), nullptr);
    for (std::size_t o = 0; o < ops_.size(); ++o) {
      const Cursor& c = cur_[o];
      if (!c.present || !c.fiber) continue;
      const auto& ranks = ops_[o].plan->ranks;
      if (static_cast<std::size_t>(c.rank) >= ranks.size()) continue;
      const RankUse& use = ranks[static_cast<std::size_t>(c.rank)];
      if (use.level != level || (use.mode != RankMode::kIterate && use.mode != RankMode::kRange)) continue;
      ls.participates[o] = true;
      ls.ranges[o] = OperandRange(use, level);
      const Range& r = ls.ranges[o];
      std::size_t begin = r.lo ? c.fiber->lower_bound(*r.lo) : 0;
      std::size_t end = r.hi ? c.fiber->lower_bound(*r.hi) : c.fiber->size();
      for (std::size_t i = begin; i < end; ++i) ls.coords[o].push_back(c.fiber->coord(i));
    }
    probe_lists_.clear();
    CSet set = Eval(e_.expr, ls, level, parent_space);
    for (std::size_t o = 0; o < ops_.size(); ++o)
      if (ls.participates[o]) ScanTraffic(o, ls, parent);
    if (set.kind == CSet::kEmpty) return;
    std::vector<Coord> coords = set.kind == CSet::kAll ? DenseCoords(level) : std::move(set.coords);

    const std::vector<Cursor> saved = cur_;
    const std::int64_t bound = trace_.space_bound[L];
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const Coord& c = coords[i];
      IterNode n;
      n.parent = parent;
      n.level = level;
      n.coord = c;
      n.space = ll.space ? parent_space * bound + static_cast<std::int64_t>(i) : parent_space;
      const auto id = static_cast<std::int32_t>(trace_.nodes.size());
      trace_.nodes.push_back(n);
      bound_[L] = c;
      if (!ll.rank.upper) {
        if (c.arity() != ll.rank.vars.size()) Fail("coordinate arity mismatch at rank " + ll.rank.name);
        for (std::size_t k = 0; k < ll.rank.vars.size(); ++k)
          binding_[static_cast<std::size_t>(var_id_.at(ll.rank.vars[k]))] = c[k];
      }
      for (std::size_t o = 0; o < ops_.size(); ++o) {
        hit_[L][o] = {nullptr, 0};
        Cursor& cu = cur_[o];
        const auto& ranks = ops_[o].plan->ranks;
        while (cu.present && cu.fiber && static_cast<std::size_t>(cu.rank) < ranks.size() &&
               ranks[static_cast<std::size_t>(cu.rank)].level == level) {
          const RankUse& use = ranks[static_cast<std::size_t>(cu.rank)];
          if (use.mode == RankMode::kLookup) {
            Lookup(o, id);
          } else if (use.mode == RankMode::kExistential) {
            break;
          } else {
            auto idx = cu.fiber->find(c);
            if (!idx) {
              cu.present = false;
              break;
            }
            hit_[L][o] = {cu.fiber, *idx};
            const bool u = ops_[o].formats[static_cast<std::size_t>(cu.rank)].type == FormatType::kU;
            Descend(o, *idx, !u, id);
          }
        }
        CheckExistential(o, id);
      }
      if (Present(e_.expr)) {
        if (level == out_.write_level) reg_ = {};
        Visit(level + 1, id);
        if (level == out_.write_level) Commit(id);
      }
      cur_ = saved;
    }
  }

  struct Val {
    bool present = false;
    Value v = 0;
  };

  void Check(Value v) const {
    if (std::isfinite(v) && std::fabs(v) > kExactLimit)
      Fail("integer overflow in " + e_.output + ": result exceeds 2^53");
  }

  Val Compute(const Expr& x, std::int64_t space) {
    if (x.kind == Expr::Kind::kAccess) {
      const Cursor& c = cur_[static_cast<std::size_t>(op_index_.at(x.tensor))];
      return Val{c.present, c.value};
    }
    Val a = Compute(x.args[0], space), b = Compute(x.args[1], space);
    Val r;
    switch (x.kind) {
      case Expr::Kind::kMul:
        if (!a.present || !b.present) return r;
        ++trace_.compute["mul"][space];
        r = Val{true, sr_.Mul(a.v, b.v)};
        break;
      case Expr::Kind::kTake:
        if (!a.present || !b.present) return r;
        r = Val{true, x.take_arg == 0 ? a.v : b.v};
        break;
      case Expr::Kind::kAdd:
      case Expr::Kind::kSub: {
        if (!a.present && !b.present) return r;
        if (a.present && b.present) ++trace_.compute[x.kind == Expr::Kind::kAdd ? "add" : "sub"][space];
        const Value av = a.present ? a.v : sr_.zero(), bv = b.present ? b.v : sr_.zero();
        r = Val{true, x.kind == Expr::Kind::kAdd ? sr_.Add(av, bv) : sr_.Sub(av, bv)};
        break;
      }
      case Expr::Kind::kAccess: break;
    }
    Check(r.v);
    return r;
  }

  void Evaluate(std::int32_t node) {
    const std::int64_t space = trace_.nodes[static_cast<std::size_t>(node)].space;
    Val v = Compute(e_.expr, space);
    if (!v.present) return;
    if (!reg_.present || out_.assign) {
      reg_ = v;
    } else {
      ++trace_.compute["add"][space];
      reg_.v = sr_.Add(reg_.v, v.v);
      Check(reg_.v);
    }
  }

  void Commit(std::int32_t node) {
    if (!reg_.present) return;
    const std::int64_t space = trace_.nodes[static_cast<std::size_t>(node)].space;
    std::vector<Coord> key;
    for (int id : out_var_ids_) key.push_back(Coord(binding_[static_cast<std::size_t>(id)]));
    const std::size_t leaf = key.size() - (key.empty() ? 0 : 1);
    auto it = out_points_.find(key);
    if (it != out_points_.end()) {
      if (!key.empty() && !out_.assign)
        Emit(out_table_, leaf, out_formats_[leaf], Datum::kPayload, false, node, it->second.second);
      if (out_.assign) {
        it->second.first = reg_.v;
      } else {
        ++trace_.compute["add"][space];
        it->second.first = sr_.Add(it->second.first, reg_.v);
        Check(it->second.first);
      }
      if (!key.empty()) Emit(out_table_, leaf, out_formats_[leaf], Datum::kPayload, true, node, it->second.second);
      return;
    }
    if (reg_.v == sr_.zero()) return;
    std::int64_t parent = 0, payload_pos = 0;
    for (std::size_t j = 0; j < key.size(); ++j) {
      std::vector<Coord> prefix(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(j + 1));
      auto [pit, fresh] = rank_prefixes_[j].emplace(prefix, rank_counter_[j]);
      const RankFormat& f = out_formats_[j];
      const std::int64_t pos =
          f.type == FormatType::kC ? pit->second : parent * produced_shape_[j] + key[j].scalar();
      if (fresh) {
        ++rank_counter_[j];
        if (f.type != FormatType::kU) Emit(out_table_, j, f, Datum::kCoord, true, node, pos);
        Emit(out_table_, j, f, Datum::kPayload, true, node, pos);
      }
      parent = pit->second;
      payload_pos = pos;
    }
    out_points_.emplace(key, std::make_pair(reg_.v, payload_pos));
  }

  void Finish() {
    const Value zero = sr_.zero();
    const TensorDecl* decl = spec_.tensor(e_.output);
    std::vector<Point> pts;
    Value scalar = zero;
    for (const auto& [coords, entry] : out_points_) {
      if (entry.first == zero) continue;
      if (coords.empty()) {
        scalar = entry.first;
        continue;
      }
      pts.push_back(Point{coords, entry.first});
    }
    Tensor produced = Tensor::FromPoints(e_.output, produced_labels_, produced_shape_, std::move(pts));
    produced.set_scalar(scalar);
    if (out_.has_storage_swizzle) {
      std::vector<bool> reduced(out_.stored.size(), false);
      RecordSwizzle(produced, out_.stored, reduced, e_.output, true, trace_.swizzles);
    }
    Tensor result = Swizzle(produced, decl->ranks);
    if (out_.rewrite) {
      auto it = env_.find(e_.output);
      if (it != env_.end()) {
        std::map<std::vector<Coord>, Value> merged;
        for (auto& p : it->second.points()) merged[p.coords] = p.value;
        for (auto& p : result.points()) merged[p.coords] = p.value;
        std::vector<Point> all;
        for (auto& [c, v] : merged) all.push_back(Point{c, v});
        Tensor m = Tensor::FromPoints(e_.output, decl->ranks, result.shape(), std::move(all));
        m.set_scalar(scalar != zero ? scalar : it->second.scalar());
        result = std::move(m);
      }
    }
    result.set_name(e_.output);
    env_[e_.output] = std::move(result);
  }

  const ProblemSpec& spec_;
  const LoopNest& nest_;
  TensorMap& env_;
  const Semiring& sr_;
  const EinsumDecl& e_;
  EinsumTrace trace_;

  std::vector<std::string> vars_;
  std::map<std::string, int> var_id_;
  std::vector<std::int64_t> extent_;
  std::vector<std::int64_t> binding_;

  std::vector<Operand> ops_;
  std::map<std::string, int> op_index_;
  std::vector<Cursor> cur_;
  std::vector<std::vector<std::pair<const Fiber*, std::size_t>>> hit_;
  std::vector<Coord> bound_;
  std::map<int, ChunkTable> chunks_;  // by rewrite step
  std::deque<std::vector<Coord>> probe_lists_;
  std::vector<std::int64_t> fiber_count_, elem_count_;

  OutputPlan out_;
  int out_table_ = 0;
  std::vector<RankFormat> out_formats_;
  std::vector<std::string> produced_labels_;
  std::vector<std::int64_t> produced_shape_;
  std::vector<int> out_var_ids_;
  std::map<std::vector<Coord>, std::pair<Value, std::int64_t>> out_points_;
  std::vector<std::map<std::vector<Coord>, std::int64_t>> rank_prefixes_;
  std::vector<std::int64_t> rank_counter_;
  Val reg_;
};

}  // namespace

EinsumTrace Execute(const ProblemSpec& spec, const LoopNest& nest, TensorMap& env) {
  return Runner(spec, nest, env).Run();
}

namespace {

// Operands sharing a plain-subscript variable must agree on its extent.
void CheckShapes(const EinsumDecl& e, const TensorMap& env) {
  std::map<std::string, std::pair<std::int64_t, std::string>> seen;
  std::function<void(const Expr&)> visit = [&](const Expr& x) {
    if (x.kind != Expr::Kind::kAccess) {
      for (const auto& a : x.args) visit(a);
      return;
    }
    auto it = env.find(x.tensor);
    if (it == env.end()) return;
    const auto& shape = it->second.shape();
    for (std::size_t i = 0; i < x.indices.size() && i < shape.size(); ++i) {
      if (x.indices[i].affine()) continue;
      const std::string& v = x.indices[i].vars[0];
      auto [at, fresh] = seen.emplace(v, std::make_pair(shape[i], x.tensor));
      if (!fresh && at->second.first != shape[i])
        throw Error("executor", "shape mismatch in " + e.str() + ": " + at->second.second + " gives " + v + " extent " +
                                    std::to_string(at->second.first) + ", " + x.tensor + " gives " +
                                    std::to_string(shape[i]));
    }
  };
  visit(e.expr);
}

}  // namespace

ExecResult ExecuteCascade(const ProblemSpec& spec, const TensorMap& inputs) {
  ExecResult r;
  r.tensors = inputs;
  for (std::size_t i = 0; i < spec.einsums.size(); ++i) {
    CheckShapes(spec.einsums[i], r.tensors);
    LoopNest nest = Compile(spec, static_cast<int>(i));
    r.traces.push_back(Execute(spec, nest, r.tensors));
  }
  return r;
}

std::string TraceCsv(const EinsumTrace& trace) {
  std::ostringstream os;
  os << "einsum,tensor,config,rank,kind,access,space,time\n";
  for (const auto& rec : trace.records) {
    const TraceTable& t = trace.tables[rec.table];
    std::string time;
    std::vector<std::string> parts;
    for (std::int32_t n = rec.node; n > 0; n = trace.nodes[static_cast<std::size_t>(n)].parent) {
      const IterNode& x = trace.nodes[static_cast<std::size_t>(n)];
      if (!trace.spatial[static_cast<std::size_t>(x.level)])
        parts.push_back(trace.levels[static_cast<std::size_t>(x.level)] + "=" + x.coord.str());
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) time += (time.empty() ? "" : ";") + *it;
    os << trace.output << ',' << t.tensor << ',' << t.config << ',' << t.labels[rec.rank] << ','
       << ToString(rec.datum) << ',' << (rec.write ? "write" : "read") << ','
       << trace.nodes[static_cast<std::size_t>(rec.node)].space << ',' << time << '\n';
  }
  return os.str();
}

}  // namespace fibersim
