#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fibersim/compiler.hpp"
#include "fibersim/fibertree.hpp"
#include "fibersim/format.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

using TensorMap = std::map<std::string, Tensor>;

// A tensor as one Einsum accesses it: the operand view after its prelude, or
// the output in produced order.
struct TraceTable {
  int einsum = -1;
  std::string tensor;
  std::string config;               // empty when the tensor has no format
  bool output = false;
  bool intermediate = false;        // written earlier in the cascade
  std::vector<std::string> labels;  // per rank, declared terms
  std::vector<std::vector<std::string>> origins;
  std::vector<RankFormat> formats;  // zero widths when unformatted
};

// One point of the iteration trie: the coordinate bound at a loop level.
struct IterNode {
  std::int32_t parent = -1;
  std::int32_t level = -1;  // -1 for the root
  Coord coord;
  std::int64_t space = 0;   // ordinal of the spatial point
};

struct AccessRecord {
  std::uint32_t table = 0;
  std::uint16_t rank = 0;
  Datum datum = Datum::kCoord;
  bool write = false;
  std::int32_t node = 0;
  std::int64_t position = 0;  // element index within the rank's storage
};

// Co-iteration of two concrete coordinate streams at one loop level.
struct IntersectTally {
  std::int64_t events = 0;
  std::int64_t left = 0;    // |a| summed
  std::int64_t right = 0;   // |b| summed
  std::int64_t matches = 0;
  std::int64_t steps = 0;   // two-finger pointer advances
  std::int64_t probes = 0;  // skip-ahead searches
  std::string left_tensor, right_tensor;  // sides that are single operands
};

// One merge-sort job of an online swizzle: the points sharing a prefix of the
// old and new rank orders.
struct SwizzleEvent {
  std::string tensor;
  bool storage = false;     // producer-side reorder of an output
  std::int64_t space = 0;
  std::int64_t n = 0;
  std::int64_t runs = 1;
  std::int64_t duplicates = 0;
};

struct EinsumTrace {
  int einsum = -1;
  std::string output;
  std::vector<std::string> levels;     // loop rank names
  std::vector<bool> spatial;           // per level
  std::vector<std::int64_t> space_bound;
  std::vector<TraceTable> tables;
  std::vector<IterNode> nodes;         // nodes[0] is the root
  std::vector<AccessRecord> records;   // in execution order
  // op (mul, add, sub) -> space ordinal -> effectual operations
  std::map<std::string, std::map<std::int64_t, std::int64_t>> compute;
  // level name -> space ordinal -> tally
  std::map<std::string, std::map<std::int64_t, IntersectTally>> intersections;
  std::vector<SwizzleEvent> swizzles;

  // Coordinates of `node`'s ancestors (itself included) at levels [0, depth).
  std::vector<Coord> prefix(std::int32_t node, int depth) const;
};

struct ExecResult {
  TensorMap tensors;                 // declared rank order
  std::vector<EinsumTrace> traces;   // listing order
};

// Runs one compiled Einsum against `env`, adding its output to `env`.
// Throws Error("executor") on missing inputs or integer overflow.
EinsumTrace Execute(const ProblemSpec& spec, const LoopNest& nest, TensorMap& env);

// Runs every Einsum in listing order. `inputs` must hold every tensor that is
// read before it is written.
ExecResult ExecuteCascade(const ProblemSpec& spec, const TensorMap& inputs);

// Newline-delimited `einsum,tensor,config,rank,kind,access,space,time` with a
// header line. `time` lists the temporal loop coordinates outermost first.
std::string TraceCsv(const EinsumTrace& trace);

}  // namespace fibersim
