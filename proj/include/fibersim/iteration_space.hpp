#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fibersim/spec.hpp"

namespace fibersim {

// One partitioning rewrite of an Einsum's iteration space, resolved to
// concrete names and sizes.
struct RewriteStep {
  PartitionKind kind = PartitionKind::kUniformShape;
  std::vector<std::string> inputs;   // rank(s) consumed
  std::string upper;                 // split: outer piece; flatten: result
  std::string lower;                 // split: inner piece
  std::int64_t size = 0;
  std::string leader;

  std::string str() const;
};

struct LoopRank {
  std::string name;
  std::vector<std::string> vars;   // iteration variables, tuple order
  bool upper = false;              // coordinates are partition labels
  int step = -1;                   // producing rewrite, -1 when unpartitioned
};

struct IterationSpace {
  std::vector<RewriteStep> steps;
  // Final ranks in default order: variables in default order with every
  // rewrite applied in place.
  std::vector<LoopRank> ranks;

  const LoopRank* find(const std::string& name) const;
  // The rank whose coordinates carry the value of `var`.
  const LoopRank* value_rank(const std::string& var) const;
};

// Applies the Einsum's partitioning directives in listing order. Splitting R
// n times yields R{n}..R0; flattening (X, Y) yields XY. Throws SpecError on a
// directive that names a rank absent at that stage or an unresolvable size.
IterationSpace PlanIterationSpace(const ProblemSpec& spec, const EinsumDecl& e);

// Default loop order: output variables in order, remaining variables
// alphabetically, each expanded through the partitioning rewrites.
std::vector<std::string> DefaultLoopOrder(const ProblemSpec& spec, const EinsumDecl& e);

}  // namespace fibersim
