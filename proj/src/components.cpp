#include "fibersim/components.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fibersim/error.hpp"

namespace fibersim {

// ------------------------------------------------------------------ energy

EnergyTable EnergyTable::Parse(const std::string& text) {
  EnergyTable t;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("components", "energy table line " + std::to_string(n) + ": missing '='");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      double v = std::stod(value, &used);
      if (used != value.size() || v < 0) throw std::invalid_argument(value);
      t.pj[key] = v;
    } catch (const std::exception&) {
      throw Error("components", "energy table line " + std::to_string(n) + ": bad value '" + value + "'");
    }
  }
  return t;
}

EnergyTable EnergyTable::Load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot read energy table " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return Parse(ss.str());
}

EnergyTable EnergyTable::Default() {
  return Parse(R"(
dram.read_bytes = 20
dram.write_bytes = 20
cache.hits = 10
cache.misses = 15
cache.writebacks = 15
cache.access_bytes = 1
buffet.fill_bytes = 2
buffet.drain_bytes = 2
buffet.access_bytes = 1
intersection.tests = 0.5
merger.moves = 1
compute.mul = 1
compute.add = 0.5
)");
}

// ------------------------------------------------------------------ unit models

LruCache::LruCache(std::int64_t lines) : capacity_(std::max<std::int64_t>(lines, 1)) {}

LruCache::Outcome LruCache::Access(std::uint64_t line, bool write) {
  Outcome out;
  auto it = where_.find(line);
  if (it != where_.end()) {
    out.hit = true;
    bool dirty = it->second->second || write;
    order_.erase(it->second);
    order_.emplace_front(line, dirty);
    it->second = order_.begin();
    return out;
  }
  if (static_cast<std::int64_t>(order_.size()) >= capacity_) {
    auto& victim = order_.back();
    if (victim.second) out.evicted_dirty = victim.first;
    where_.erase(victim.first);
    order_.pop_back();
  }
  order_.emplace_front(line, write);
  where_[line] = order_.begin();
  return out;
}

std::vector<std::uint64_t> LruCache::Flush() {
  std::vector<std::uint64_t> dirty;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it)
    if (it->second) dirty.push_back(it->first);
  order_.clear();
  where_.clear();
  return dirty;
}

double DramCycles(double bytes, double gbps, double clock) {
  if (bytes <= 0) return 0;
  const double per_cycle = gbps * 1e9 / clock;
  return std::ceil(bytes / per_cycle - 1e-9);
}

std::int64_t MergerPasses(std::int64_t runs, std::int64_t radix) {
  radix = std::max<std::int64_t>(radix, 2);
  std::int64_t r = std::max<std::int64_t>(runs, 2);
  std::int64_t passes = 0;
  for (std::int64_t cover = 1; cover < r; cover *= radix) ++passes;
  return passes;
}

std::int64_t MergerMoves(const SwizzleEvent& ev, const MergerParams& p) {
  const std::int64_t passes = MergerPasses(ev.runs, p.radix);
  std::int64_t moves = ev.n * passes;
  if (p.reduce) moves -= ev.duplicates;
  if (p.opt && passes > 1) moves -= ev.n;
  return std::max<std::int64_t>(moves, 0);
}

std::int64_t IntersectTests(const std::string& type, const IntersectTally& t, const std::string& leader) {
  if (type == "leader-follower") {
    if (!leader.empty() && leader == t.left_tensor) return t.left;
    if (!leader.empty() && leader == t.right_tensor) return t.right;
    return std::min(t.left, t.right);
  }
  if (type == "skip-ahead") return t.matches + t.probes;
  return t.steps;
}

double ModelReport::dram_bytes() const {
  double total = 0;
  for (const auto& [name, t] : dram) total += t.total();
  return total;
}

// ------------------------------------------------------------------ replay

namespace {

bool TypeMatches(DatumType bound, Datum d) {
  switch (bound) {
    case DatumType::kElem: return true;
    case DatumType::kCoord: return d == Datum::kCoord || d == Datum::kHeader;
    case DatumType::kPayload: return d == Datum::kPayload;
  }
  return false;
}

std::string KindOf(const Component& c) {
  switch (c.cls) {
    case ComponentClass::kDram: return "dram";
    case ComponentClass::kBuffer: return c.str("type", "cache") == "buffet" ? "buffet" : "cache";
    case ComponentClass::kIntersection: return "intersection";
    case ComponentClass::kMerger: return "merger";
    case ComponentClass::kCompute: return "compute";
  }
  return "?";
}

// Per-instance state of a storage component.
struct StorageState {
  std::vector<LruCache> caches;
  struct Buffet {
    std::vector<Coord> epoch;
    bool started = false;
    std::map<std::pair<int, std::int64_t>, std::pair<double, bool>> resident;  // -> bytes, dirty
    std::map<std::pair<int, std::int64_t>, std::string> owner;
    double occupancy = 0;
  };
  std::vector<Buffet> buffets;
  std::vector<std::unordered_map<std::uint64_t, std::string>> line_owner;
  std::vector<double> access_bytes;  // per instance
};

struct Access {
  int region = 0;
  std::int64_t byte = 0;
  double bytes = 0;
  bool write = false;
  std::string tensor;
  std::int64_t space = 0;
  std::vector<Coord> epoch;  // filled for buffet levels
};

class BlockReplay {
 public:
  BlockReplay(const ProblemSpec& spec, const ExecResult& exec, const std::vector<int>& block, ModelReport& report,
              std::vector<EinsumResult>& results)
      : spec_(spec), exec_(exec), block_(block), report_(report), results_(results) {}

  void Run() {
    const std::string& topo_name = spec_.binding.count(Out(block_[0])) ? spec_.binding.at(Out(block_[0])).topology : "";
    topo_ = spec_.architecture.find(topo_name);
    if (topo_) placed_ = PlaceComponents(*topo_);
    for (std::size_t i = 0; i < placed_.size(); ++i) {
      const Component& c = *placed_[i].component;
      if (c.cls == ComponentClass::kBuffer || c.cls == ComponentClass::kDram) {
        StorageState st;
        const auto inst = static_cast<std::size_t>(c.cls == ComponentClass::kDram ? 1 : placed_[i].instances);
        if (KindOf(c) == "cache")
          st.caches.assign(inst, LruCache(static_cast<std::int64_t>(c.num("depth", 1))));
        else
          st.buffets.resize(inst);
        st.line_owner.resize(inst);
        st.access_bytes.assign(inst, 0);
        state_[i] = std::move(st);
      }
    }
    for (int e : block_) {
      for (const auto& t : exec_.traces[static_cast<std::size_t>(e)].tables) {
        if (t.output) written_.insert(t.tensor);
        else read_.insert(t.tensor);
      }
    }
    Replay();
    Flush();
  }

 private:
  const std::string& Out(int e) const { return spec_.einsums[static_cast<std::size_t>(e)].output; }

  EinsumResult& Result(int e) { return results_[static_cast<std::size_t>(e)]; }

  ComponentResult& Comp(int e, std::size_t placed_index) {
    EinsumResult& r = Result(e);
    const Component& c = *placed_[placed_index].component;
    for (auto& cr : r.components)
      if (cr.name == c.name) return cr;
    ComponentResult cr;
    cr.name = c.name;
    cr.cls = c.cls;
    cr.kind = KindOf(c);
    cr.instances = placed_[placed_index].instances;
    r.components.push_back(cr);
    return r.components.back();
  }

  void Diagnose(const std::string& msg) {
    if (std::find(report_.diagnostics.begin(), report_.diagnostics.end(), msg) == report_.diagnostics.end())
      report_.diagnostics.push_back(msg);
  }

  int Region(const std::string& key) {
    auto [it, fresh] = regions_.emplace(key, static_cast<int>(regions_.size()));
    return it->second;
  }

  struct Link {
    std::size_t placed = 0;
    int evict_level = -1;  // buffets: deepest loop level of the epoch
  };

  int EvictLevel(int e, const std::string& rank) const {
    const EinsumTrace& tr = exec_.traces[static_cast<std::size_t>(e)];
    for (std::size_t l = 0; l < tr.levels.size(); ++l)
      if (tr.levels[l] == rank) return static_cast<int>(l);
    const std::string var = VarOf(rank);
    LoopNest nest = Compile(spec_, e);
    int found = -1;
    for (std::size_t l = 0; l < nest.levels.size(); ++l) {
      const auto& vars = nest.levels[l].rank.vars;
      if (std::find(vars.begin(), vars.end(), var) != vars.end()) found = static_cast<int>(l);
    }
    return found;
  }

  // Bound storage for one datum of a table rank, innermost first.
  const std::vector<Link>& Chain(int e, std::uint32_t table, std::uint16_t rank, Datum d) {
    auto key = std::make_tuple(e, table, rank, static_cast<int>(d));
    auto it = chains_.find(key);
    if (it != chains_.end()) return it->second;
    std::vector<Link> chain;
    const TraceTable& t = exec_.traces[static_cast<std::size_t>(e)].tables[table];
    auto bit = spec_.binding.find(Out(e));
    if (bit != spec_.binding.end()) {
      for (const auto& cb : bit->second.components) {
        for (const auto& s : cb.storage) {
          if (s.tensor != t.tensor) continue;
          if (!s.config.empty() && s.config != t.config) continue;
          const auto& origin = t.origins[rank];
          if (!s.rank.empty() && s.rank != t.labels[rank] &&
              std::find(origin.begin(), origin.end(), s.rank) == origin.end())
            continue;
          if (!TypeMatches(s.type, d)) continue;
          for (std::size_t i = 0; i < placed_.size(); ++i)
            if (placed_[i].component->name == cb.component &&
                (placed_[i].component->cls == ComponentClass::kBuffer ||
                 placed_[i].component->cls == ComponentClass::kDram)) {
              Link l;
              l.placed = i;
              if (!s.evict_on.empty()) l.evict_level = EvictLevel(e, s.evict_on);
              chain.push_back(l);
            }
          break;
        }
      }
    }
    std::stable_sort(chain.begin(), chain.end(),
                     [&](const Link& a, const Link& b) { return placed_[a.placed].depth > placed_[b.placed].depth; });
    if (chain.empty()) {
      const bool fused_intermediate = block_.size() > 1 && written_.count(t.tensor) && read_.count(t.tensor);
      if (!fused_intermediate) {
        Diagnose("unbound traffic: " + t.tensor + " rank " + t.labels[rank] + " in Einsum " + Out(e) +
                 " charged to DRAM");
        for (std::size_t i = 0; i < placed_.size(); ++i)
          if (placed_[i].component->cls == ComponentClass::kDram) {
            chain.push_back(Link{i, -1});
            break;
          }
        if (chain.empty()) Diagnose("Einsum " + Out(e) + " has no DRAM component for unbound traffic");
      }
    }
    return chains_[key] = chain;
  }

  void Replay() {
    struct Item {
      int e;
      std::size_t r;
    };
    std::vector<Item> items;
    for (int e : block_) {
      const auto& tr = exec_.traces[static_cast<std::size_t>(e)];
      for (std::size_t r = 0; r < tr.records.size(); ++r) items.push_back(Item{e, r});
    }
    if (block_.size() > 1) {
      const int depth = static_cast<int>(TemporalPrefix(spec_, spec_.einsums[static_cast<std::size_t>(block_[0])]).size());
      std::map<std::pair<int, std::int32_t>, std::vector<Coord>> keys;
      auto key = [&](const Item& it) -> const std::vector<Coord>& {
        const auto& tr = exec_.traces[static_cast<std::size_t>(it.e)];
        const std::int32_t node = tr.records[it.r].node;
        auto k = keys.find({it.e, node});
        if (k == keys.end()) k = keys.emplace(std::make_pair(it.e, node), tr.prefix(node, depth)).first;
        return k->second;
      };
      for (const auto& it : items) key(it);
      std::stable_sort(items.begin(), items.end(), [&](const Item& a, const Item& b) { return key(a) < key(b); });
    }
    for (const auto& it : items) {
      const EinsumTrace& tr = exec_.traces[static_cast<std::size_t>(it.e)];
      const AccessRecord& rec = tr.records[it.r];
      const TraceTable& t = tr.tables[rec.table];
      const RankFormat& f = t.formats[rec.rank];
      const DatumAddress addr = Locate(f, rec.datum, rec.position);
      const auto& chain = Chain(it.e, rec.table, rec.rank, rec.datum);
      if (chain.empty()) continue;
      Access a;
      a.region = Region(t.tensor + "|" + t.config + "|" + t.labels[rec.rank] + "|" + std::to_string(addr.region) +
                        (t.output ? "|out" : ""));
      a.byte = addr.byte;
      a.bytes = static_cast<double>(addr.bits) / 8.0;
      a.write = rec.write;
      a.tensor = t.tensor;
      a.space = tr.nodes[static_cast<std::size_t>(rec.node)].space;
      Forward(it.e, chain, 0, a, &tr, rec.node);
    }
  }

  void Dram(int e, std::size_t placed, const Access& a) {
    ComponentResult& c = Comp(e, placed);
    TensorTraffic& t = Result(e).dram[a.tensor];
    if (a.write) {
      c.actions["write_bytes"] += a.bytes;
      t.write_bytes += a.bytes;
    } else {
      c.actions["read_bytes"] += a.bytes;
      t.read_bytes += a.bytes;
    }
  }

  void Forward(int e, const std::vector<Link>& chain, std::size_t level, const Access& a, const EinsumTrace* tr,
               std::int32_t node) {
    if (level >= chain.size()) return;
    const Link& link = chain[level];
    const PlacedComponent& pc = placed_[link.placed];
    const Component& comp = *pc.component;
    if (comp.cls == ComponentClass::kDram) {
      Dram(e, link.placed, a);
      return;
    }
    StorageState& st = state_.at(link.placed);
    const auto inst = static_cast<std::size_t>(a.space % std::max<std::int64_t>(pc.instances, 1));
    ComponentResult& cr = Comp(e, link.placed);
    cr.actions["access_bytes"] += a.bytes;
    per_instance_bytes_[{e, link.placed}][inst] += a.bytes;

    if (!st.caches.empty()) {
      const auto width = static_cast<std::int64_t>(std::max(1.0, comp.num("width", 64)));
      const std::int64_t size = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(a.bytes)));
      for (std::int64_t line = a.byte / width; line <= (a.byte + size - 1) / width; ++line) {
        const std::uint64_t id = (static_cast<std::uint64_t>(a.region) << 40) ^ static_cast<std::uint64_t>(line);
        auto out = st.caches[inst].Access(id, a.write);
        if (out.hit) {
          cr.actions["hits"] += 1;
        } else {
          cr.actions["misses"] += 1;
          if (!a.write) {
            Access fill = a;
            fill.write = false;
            fill.bytes = static_cast<double>(width);
            fill.byte = line * width;
            Forward(e, chain, level + 1, fill, tr, node);
          }
        }
        st.line_owner[inst][id] = a.tensor;
        if (out.evicted_dirty) {
          cr.actions["writebacks"] += 1;
          Access wb;
          wb.write = true;
          wb.bytes = static_cast<double>(width);
          wb.tensor = st.line_owner[inst][*out.evicted_dirty];
          wb.space = a.space;
          Forward(e, chain, level + 1, wb, tr, node);
        }
      }
      return;
    }

    auto& b = st.buffets[inst];
    if (link.evict_level >= 0 && tr != nullptr) {
      auto epoch = tr->prefix(node, link.evict_level + 1);
      if (!b.started || epoch != b.epoch) {
        Drain(e, chain, level, b, a.space, tr, node);
        b.epoch = std::move(epoch);
        b.started = true;
      }
    }
    const auto key = std::make_pair(a.region, a.byte);
    auto it = b.resident.find(key);
    if (it == b.resident.end()) {
      if (!a.write) {
        cr.actions["fill_bytes"] += a.bytes;
        Access fill = a;
        Forward(e, chain, level + 1, fill, tr, node);
      }
      it = b.resident.emplace(key, std::make_pair(a.bytes, false)).first;
      b.owner[key] = a.tensor;
      b.occupancy += a.bytes;
      const double capacity = comp.num("width", 0) * comp.num("depth", 0);
      if (capacity > 0 && b.occupancy > capacity)
        Diagnose("buffet " + comp.name + " overflow in Einsum " + Out(e) + ": occupancy exceeds " +
                 std::to_string(static_cast<std::int64_t>(capacity)) + " bytes");
    }
    if (a.write) it->second.second = true;
  }

  void Drain(int e, const std::vector<Link>& chain, std::size_t level, StorageState::Buffet& b, std::int64_t space,
             const EinsumTrace* tr, std::int32_t node) {
    const std::size_t placed = chain[level].placed;
    for (const auto& [key, val] : b.resident) {
      if (!val.second) continue;
      Comp(e, placed).actions["drain_bytes"] += val.first;
      Access wb;
      wb.region = key.first;
      wb.byte = key.second;
      wb.bytes = val.first;
      wb.write = true;
      wb.tensor = b.owner[key];
      wb.space = space;
      Forward(e, chain, level + 1, wb, tr, node);
    }
    b.resident.clear();
    b.owner.clear();
    b.occupancy = 0;
  }

  void Flush() {
    const int e = block_.back();
    for (auto& [placed, st] : state_) {
      std::vector<Link> chain;
      // Parent of a flushed level: the DRAM component of the topology.
      chain.push_back(Link{placed, -1});
      for (std::size_t i = 0; i < placed_.size(); ++i)
        if (placed_[i].component->cls == ComponentClass::kDram && i != placed) chain.push_back(Link{i, -1});
      if (chain.size() == 1 && placed_[placed].component->cls != ComponentClass::kDram) {
        for (auto& c : st.caches) c.Flush();
        continue;
      }
      const Component& comp = *placed_[placed].component;
      for (std::size_t inst = 0; inst < st.caches.size(); ++inst) {
        for (auto line : st.caches[inst].Flush()) {
          Comp(e, placed).actions["writebacks"] += 1;
          Access wb;
          wb.write = true;
          wb.bytes = comp.num("width", 64);
          wb.tensor = st.line_owner[inst][line];
          Forward(e, chain, 1, wb, nullptr, 0);
        }
      }
      for (auto& b : st.buffets) Drain(e, chain, 0, b, 0, nullptr, 0);
    }
  }

 public:
  std::map<std::pair<int, std::size_t>, std::map<std::size_t, double>> per_instance_bytes_;
  std::vector<PlacedComponent> placed_;
  const Topology* topo_ = nullptr;

 private:
  const ProblemSpec& spec_;
  const ExecResult& exec_;
  const std::vector<int>& block_;
  ModelReport& report_;
  std::vector<EinsumResult>& results_;
  std::map<std::size_t, StorageState> state_;
  std::map<std::string, int> regions_;
  std::map<std::tuple<int, std::uint32_t, std::uint16_t, int>, std::vector<Link>> chains_;
  std::set<std::string> written_, read_;
};

double MaxLoad(const std::map<std::int64_t, std::int64_t>& by_space, std::int64_t instances) {
  std::map<std::int64_t, double> load;
  for (const auto& [space, n] : by_space) load[space % std::max<std::int64_t>(instances, 1)] += static_cast<double>(n);
  double m = 0;
  for (const auto& [i, v] : load) m = std::max(m, v);
  return m;
}

bool LevelMatches(const EinsumTrace& tr, const LoopNest& nest, const std::string& level, const std::string& rank) {
  (void)tr;
  if (rank.empty() || rank == level) return true;
  int l = nest.level_of(level);
  if (l < 0) return false;
  const auto& vars = nest.levels[static_cast<std::size_t>(l)].rank.vars;
  return std::find(vars.begin(), vars.end(), VarOf(rank)) != vars.end();
}

}  // namespace

ModelReport EvaluateModel(const ProblemSpec& spec, const ExecResult& exec, const FusionSchedule& schedule,
                          const EnergyTable& energy) {
  ModelReport report;
  std::vector<EinsumResult> results(spec.einsums.size());
  for (std::size_t e = 0; e < spec.einsums.size(); ++e) {
    results[e].output = spec.einsums[e].output;
    auto bit = spec.binding.find(results[e].output);
    if (bit != spec.binding.end()) results[e].topology = bit->second.topology;
    if (const Topology* t = spec.architecture.find(results[e].topology)) results[e].clock = t->clock;
  }

  for (std::size_t b = 0; b < schedule.blocks.size(); ++b) {
    const auto& block = schedule.blocks[b];
    BlockReplay replay(spec, exec, block, report, results);
    replay.Run();
    const auto& placed = replay.placed_;

    for (int e : block) {
      EinsumResult& r = results[static_cast<std::size_t>(e)];
      r.block = static_cast<int>(b);
      const EinsumTrace& tr = exec.traces[static_cast<std::size_t>(e)];
      LoopNest nest = Compile(spec, e);
      auto comp_result = [&](std::size_t i) -> ComponentResult& {
        for (auto& cr : r.components)
          if (cr.name == placed[i].component->name) return cr;
        ComponentResult cr;
        cr.name = placed[i].component->name;
        cr.cls = placed[i].component->cls;
        cr.kind = KindOf(*placed[i].component);
        cr.instances = placed[i].instances;
        r.components.push_back(cr);
        return r.components.back();
      };
      auto bit = spec.binding.find(r.output);
      std::vector<const ComponentBinding*> bindings;
      if (bit != spec.binding.end())
        for (const auto& cb : bit->second.components) bindings.push_back(&cb);
      auto placed_of = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < placed.size(); ++i)
          if (placed[i].component->name == name) return static_cast<int>(i);
        return -1;
      };
      auto find_op = [&](const std::string& op, const std::string& tensor, ComponentClass cls) -> std::pair<int, const OpBinding*> {
        for (const auto* cb : bindings) {
          int p = placed_of(cb->component);
          if (p < 0 || placed[static_cast<std::size_t>(p)].component->cls != cls) continue;
          for (const auto& o : cb->ops)
            if (o.op == op && (o.tensor.empty() || tensor.empty() || o.tensor == tensor)) return {p, &o};
        }
        return {-1, nullptr};
      };

      // Storage components touched by this Einsum get bandwidth-limited cycles.
      for (const auto& [key, loads] : replay.per_instance_bytes_) {
        if (key.first != e) continue;
        const Component& c = *placed[key.second].component;
        double bw = c.num("bandwidth", 0);
        double m = 0;
        for (const auto& [inst, bytes] : loads) m = std::max(m, bytes);
        ComponentResult& cr = comp_result(key.second);
        cr.cycles = bw > 0 ? std::ceil(m / bw - 1e-9) : 0;
      }
      for (auto& cr : r.components)
        if (cr.cls == ComponentClass::kDram) {
          int p = placed_of(cr.name);
          double bytes = cr.actions["read_bytes"] + cr.actions["write_bytes"];
          cr.cycles = DramCycles(bytes, placed[static_cast<std::size_t>(p)].component->num("bandwidth", 0) > 0
                                            ? placed[static_cast<std::size_t>(p)].component->num("bandwidth", 0)
                                            : 1,
                                 r.clock);
        }

      // Compute: effectual operations per instance.
      for (const auto& [op, by_space] : tr.compute) {
        const std::string bound_op = op == "sub" ? "add" : op;
        auto [p, binding] = find_op(bound_op, "", ComponentClass::kCompute);
        if (p < 0) {
          report.diagnostics.push_back("unmodeled " + op + " in Einsum " + r.output);
          continue;
        }
        ComponentResult& cr = comp_result(static_cast<std::size_t>(p));
        std::int64_t total = 0;
        for (const auto& [s, n] : by_space) total += n;
        cr.actions[bound_op] += static_cast<double>(total);
        cr.cycles = std::max(cr.cycles, MaxLoad(by_space, placed[static_cast<std::size_t>(p)].instances));
      }

      // Intersections.
      for (const auto* cb : bindings) {
        int p = placed_of(cb->component);
        if (p < 0 || placed[static_cast<std::size_t>(p)].component->cls != ComponentClass::kIntersection) continue;
        const Component& c = *placed[static_cast<std::size_t>(p)].component;
        for (const auto& o : cb->ops) {
          if (o.op != "intersect") continue;
          std::map<std::int64_t, std::int64_t> tests_by_space;
          double matches = 0;
          for (const auto& [level, by_space] : tr.intersections) {
            if (!LevelMatches(tr, nest, level, o.rank)) continue;
            for (const auto& [s, tally] : by_space) {
              tests_by_space[s] += IntersectTests(c.str("type", "two-finger"), tally, c.str("leader"));
              matches += static_cast<double>(tally.matches);
            }
          }
          ComponentResult& cr = comp_result(static_cast<std::size_t>(p));
          double tests = 0;
          for (const auto& [s, n] : tests_by_space) tests += static_cast<double>(n);
          cr.actions["tests"] += tests;
          cr.actions["matches"] += matches;
          cr.cycles = std::max(cr.cycles, MaxLoad(tests_by_space, placed[static_cast<std::size_t>(p)].instances));
        }
      }

      // Online swizzles.
      std::set<std::string> unmodeled;
      std::map<int, std::pair<double, double>> merger_work;  // placed -> moves, passes
      for (const auto& ev : tr.swizzles) {
        auto [p, binding] = find_op("swizzle", ev.tensor, ComponentClass::kMerger);
        if (p < 0) {
          unmodeled.insert(ev.tensor);
          continue;
        }
        const Component& c = *placed[static_cast<std::size_t>(p)].component;
        MergerParams mp;
        mp.radix = static_cast<std::int64_t>(c.num("comparator_radix", 2));
        mp.reduce = c.str("reduce", "false") == "true";
        mp.opt = c.str("order", "fifo") == "opt";
        merger_work[p].first += static_cast<double>(MergerMoves(ev, mp));
        merger_work[p].second += static_cast<double>(MergerPasses(ev.runs, mp.radix));
      }
      for (const auto& t : unmodeled)
        report.diagnostics.push_back("unmodeled swizzle of " + t + " in Einsum " + r.output);
      for (const auto& [p, work] : merger_work) {
        const PlacedComponent& pc = placed[static_cast<std::size_t>(p)];
        ComponentResult& cr = comp_result(static_cast<std::size_t>(p));
        cr.actions["moves"] += work.first;
        cr.actions["passes"] += work.second;
        const double outputs = std::max(1.0, pc.component->num("outputs", 1));
        cr.cycles = std::ceil(cr.actions["moves"] / (outputs * static_cast<double>(pc.instances)) - 1e-9);
      }

      // Bottleneck in placement order; ties keep the earlier component.
      std::stable_sort(r.components.begin(), r.components.end(), [&](const ComponentResult& a, const ComponentResult& b) {
        return placed_of(a.name) < placed_of(b.name);
      });
      r.cycles = 0;
      r.bottleneck.clear();
      for (const auto& cr : r.components)
        if (cr.cycles > r.cycles || r.bottleneck.empty()) {
          r.bottleneck = cr.name;
          r.cycles = cr.cycles;
        }
    }
  }

  // Energy.
  std::set<std::string> missing;
  for (auto& r : results) {
    for (auto& cr : r.components) {
      cr.energy_pj = 0;
      for (const auto& [action, count] : cr.actions) {
        if (count == 0 || action == "passes" || action == "matches") continue;
        const std::string key = cr.kind + "." + action;
        auto it = energy.pj.find(key);
        if (it == energy.pj.end()) {
          missing.insert(key);
          continue;
        }
        cr.energy_pj += count * it->second;
      }
      report.energy_pj += cr.energy_pj;
    }
    for (const auto& [t, traffic] : r.dram) {
      report.dram[t].read_bytes += traffic.read_bytes;
      report.dram[t].write_bytes += traffic.write_bytes;
    }
  }
  for (const auto& k : missing) report.diagnostics.push_back("energy table has no entry for " + k);

  for (const auto& block : schedule.blocks) {
    BlockResult br;
    double clock = 1e9;
    for (int e : block) {
      const auto& r = results[static_cast<std::size_t>(e)];
      br.einsums.push_back(r.output);
      br.cycles = std::max(br.cycles, r.cycles);
      clock = r.clock;
    }
    br.seconds = br.cycles / clock;
    report.cycles += br.cycles;
    report.seconds += br.seconds;
    report.blocks.push_back(br);
  }
  report.einsums = std::move(results);
  return report;
}

}  // namespace fibersim
