#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fibersim/iteration_space.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

// How an operand rank is consumed by the loop nest.
//  kIterate: the rank's fiber is co-iterated at the loop level of the same name.
//  kRange: the rank was not partitioned with its leader; it is consumed at the
//    level of the lowest piece, restricted to the enclosing partition's range.
//  kLookup: the coordinate is computed from bound variables (affine subscript,
//    or a rank flattened away in the iteration space) and found by search.
//  kExistential: never iterated; only a nonempty subtree is required.
enum class RankMode { kIterate, kRange, kLookup, kExistential };

std::string ToString(RankMode m);

struct RankUse {
  std::string name;                 // iteration-space name (M1, MK00, (q+s))
  std::string label;                // name in the tensor's declared ranks (D1 for R[v])
  std::vector<std::string> origin;  // declared base ranks it covers, top to bottom
  bool upper = false;               // partition label rank
  RankMode mode = RankMode::kIterate;
  int level = -1;                   // consuming loop level; -1 when existential
  std::vector<std::string> vars;    // variables whose values form the coordinate
  std::vector<int> range_steps;     // kRange: rewrite steps restricting the rank
};

struct PreludeStep {
  enum class Kind { kSwizzle, kSplitShape, kSplitOccupancy, kFlatten };

  Kind kind = Kind::kSwizzle;
  std::vector<std::string> before;  // rank names before the step
  std::vector<std::string> after;
  std::string rank;                 // split input
  std::vector<std::string> ranks;   // flatten inputs
  std::string upper, lower;         // split outputs / flatten output (upper)
  std::int64_t size = 0;
  std::string leader;               // occupancy leader tensor
  int rewrite = -1;                 // index into IterationSpace::steps
  bool online = false;              // cost-bearing swizzle of an intermediate

  std::string str() const;
};

// Rank orders in declared base ranks: [M1, M0, K0, N] -> [M, K, N].
std::vector<std::string> BaseOrder(const std::vector<std::string>& origin_order);

struct TensorPlan {
  std::string tensor;
  bool intermediate = false;          // written earlier in the cascade
  std::vector<IndexExpr> subscripts;  // in declared rank order
  std::vector<std::string> stored;    // mapping rank-order, declared names
  std::vector<PreludeStep> prelude;
  std::vector<RankUse> ranks;         // final order, top to bottom
};

enum class CoIterKind { kDense, kSequential, kIntersect, kUnion, kLookup };

std::string ToString(CoIterKind k);

struct LoopLevel {
  LoopRank rank;
  bool space = false;
  bool reduction = false;              // binds no output variable
  CoIterKind coiter = CoIterKind::kDense;
  std::vector<std::string> tensors;    // operands iterating or range-scanning here
  std::vector<std::string> lookups;    // operands searched here
  // Shape-split value ranks: size and index of the upper level.
  std::int64_t split_size = 0;
};

struct OutputPlan {
  std::string tensor;
  std::vector<std::string> vars;      // produced order
  std::vector<std::string> produced;  // loop rank names, produced order
  std::vector<std::string> stored;    // mapping rank-order (declared names)
  std::vector<std::string> declared;  // declaration order
  PreludeStep storage_swizzle;        // produced -> stored, when they differ
  bool has_storage_swizzle = false;
  int write_level = -1;               // deepest level binding an output variable
  bool rewrite = false;               // tensor exists before this Einsum
  bool assign = false;                // take-rooted: assignment instead of add
};

struct LoopNest {
  int einsum = -1;
  EinsumDecl decl;
  IterationSpace space;
  std::vector<LoopLevel> levels;
  std::vector<TensorPlan> operands;  // one per distinct input tensor
  OutputPlan output;
  std::vector<std::string> reduction_ranks;

  const TensorPlan* operand(const std::string& tensor) const;
  int level_of(const std::string& rank) const;
  std::vector<const PreludeStep*> online_swizzles() const;
  // Stable text rendering for golden tests (--dump-ir).
  std::string str() const;
};

// Per-tensor transform plans and the rewritten iteration space for one Einsum.
struct PartitionPlan {
  IterationSpace space;
  std::vector<TensorPlan> operands;
};

PartitionPlan ApplyPartitioning(const ProblemSpec& spec, int einsum);

// Swizzle needed to bring `current` into `target`; nullopt-like empty result
// when they already agree.
std::vector<PreludeStep> InferSwizzles(const std::vector<std::string>& current,
                                       const std::vector<std::string>& target, bool online);

// Co-iterator kind per loop level, from the expression structure.
std::vector<CoIterKind> SelectCoiterators(const EinsumDecl& e, const std::vector<LoopLevel>& levels,
                                          const std::vector<TensorPlan>& operands);

LoopNest Compile(const ProblemSpec& spec, int einsum);
std::vector<LoopNest> CompileCascade(const ProblemSpec& spec);

struct FusionSchedule {
  std::vector<std::vector<int>> blocks;  // Einsum indices, topological order
  int block_of(int einsum) const;
};

// Greedy fusion in topological order: an Einsum joins the current block when
// it shares the block's topology, has the same temporal ranks before the first
// spatial rank, and uses no non-storage component used by a block member.
FusionSchedule ScheduleFusion(const ProblemSpec& spec);

// Temporal ranks before the first spatial rank (the whole loop order when
// nothing is spatial).
std::vector<std::string> TemporalPrefix(const ProblemSpec& spec, const EinsumDecl& e);
// Non-storage components an Einsum binds.
std::set<std::string> ComputeComponents(const ProblemSpec& spec, const EinsumDecl& e);

}  // namespace fibersim
