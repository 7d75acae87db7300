#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fibersim/compiler.hpp"
#include "fibersim/executor.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

// ------------------------------------------------------------------ energy

// Flat `key = pJ` table; keys are `<kind>.<action>` where kind is dram,
// cache, buffet, intersection, merger or compute.
struct EnergyTable {
  std::map<std::string, double> pj;

  static EnergyTable Parse(const std::string& text);
  static EnergyTable Load(const std::string& path);
  // The table shipped in data/energy_default.txt.
  static EnergyTable Default();
};

// ------------------------------------------------------------------ unit models

// Least-recently-used set of lines.
class LruCache {
 public:
  struct Outcome {
    bool hit = false;
    std::optional<std::uint64_t> evicted_dirty;  // line written back
  };

  explicit LruCache(std::int64_t lines);
  Outcome Access(std::uint64_t line, bool write);
  // Dirty lines still resident, in LRU order (oldest first); clears the cache.
  std::vector<std::uint64_t> Flush();

 private:
  std::int64_t capacity_;
  std::list<std::pair<std::uint64_t, bool>> order_;  // front = most recent
  std::unordered_map<std::uint64_t, std::list<std::pair<std::uint64_t, bool>>::iterator> where_;
};

// ceil(bytes / bytes-per-cycle) for a bandwidth in GB/s at `clock` Hz.
double DramCycles(double bytes, double gbps, double clock);

// ceil(log_radix(max(runs, 2))).
std::int64_t MergerPasses(std::int64_t runs, std::int64_t radix);

struct MergerParams {
  std::int64_t radix = 2;
  bool reduce = false;
  bool opt = false;
};

// Element moves of one merge job.
std::int64_t MergerMoves(const SwizzleEvent& ev, const MergerParams& p);

// Comparisons an intersection unit of `type` spends on a tally; `leader`
// names the leading tensor of leader-follower units.
std::int64_t IntersectTests(const std::string& type, const IntersectTally& t, const std::string& leader);

// ------------------------------------------------------------------ report

struct TensorTraffic {
  double read_bytes = 0;
  double write_bytes = 0;
  double total() const { return read_bytes + write_bytes; }
};

struct ComponentResult {
  std::string name;
  ComponentClass cls = ComponentClass::kCompute;
  std::string kind;  // dram, cache, buffet, intersection, merger, compute
  std::int64_t instances = 1;
  std::map<std::string, double> actions;
  double cycles = 0;
  double energy_pj = 0;
};

struct EinsumResult {
  std::string output;
  int block = 0;
  std::string topology;
  double clock = 1e9;
  std::vector<ComponentResult> components;
  double cycles = 0;
  std::string bottleneck;
  std::map<std::string, TensorTraffic> dram;  // by tensor
};

struct BlockResult {
  std::vector<std::string> einsums;
  double cycles = 0;
  double seconds = 0;
};

struct ModelReport {
  std::vector<EinsumResult> einsums;
  std::vector<BlockResult> blocks;
  double cycles = 0;
  double seconds = 0;
  double energy_pj = 0;
  std::map<std::string, TensorTraffic> dram;  // by tensor, whole cascade
  std::vector<std::string> diagnostics;

  double dram_bytes() const;
};

// Replays the traces through the bound components of each Einsum and
// composes cycles per Einsum (max over components), per fused block (max over
// Einsums) and in total (sum over blocks).
ModelReport EvaluateModel(const ProblemSpec& spec, const ExecResult& exec, const FusionSchedule& schedule,
                          const EnergyTable& energy);

}  // namespace fibersim
