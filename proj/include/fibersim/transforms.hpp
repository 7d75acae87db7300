#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fibersim/fibertree.hpp"

// Content-preserving fibertree transformations. Every function returns a new
// tensor; inputs are never modified.
namespace fibersim {

// Reorders the levels of `t`. `order` must be a permutation of t.ranks().
Tensor Swizzle(const Tensor& t, const std::vector<std::string>& order);

// Splits `rank` into (upper, lower). An element with coordinate c lands under
// upper coordinate floor(c/size)*size and keeps c as its lower coordinate.
// Names default to rank+"1" / rank+"0".
Tensor PartitionUniformShape(const Tensor& t, const std::string& rank, std::int64_t size,
                             std::string upper = {}, std::string lower = {});

struct OccupancyPartition {
  Tensor leader;
  std::vector<Tensor> followers;
  // First coordinate of every chunk, per leader fiber, keyed by the leader
  // coordinates above `rank`.
  std::map<std::vector<Coord>, std::vector<Coord>> starts;
};

// Chops each of the leader's fibers on `rank` into chunks of `size` elements
// (the last chunk holds the remainder) labelled by each chunk's first
// coordinate. Followers adopt the leader's coordinate ranges; a follower
// element below the first boundary joins the first chunk. A follower must
// carry every leader rank above `rank` (see CanFollow).
OccupancyPartition PartitionUniformOccupancy(const Tensor& leader, std::span<const Tensor> followers,
                                             const std::string& rank, std::int64_t size,
                                             std::string upper = {}, std::string lower = {});

// True when `follower` has `rank` and every rank above it in `leader`.
bool CanFollow(const Tensor& leader, const Tensor& follower, const std::string& rank);

// Merges adjacent `ranks` (top to bottom) into one rank with tuple
// coordinates. The name defaults to the concatenated rank names.
Tensor Flatten(const Tensor& t, const std::vector<std::string>& ranks, std::string name = {});

// Inverses, used to check content preservation.
Tensor MergePartition(const Tensor& t, const std::string& upper, const std::string& lower,
                      std::string name);
Tensor Unflatten(const Tensor& t, const std::string& rank, const std::vector<std::string>& names,
                 const std::vector<std::int64_t>& shapes);

// Coordinates of one co-iteration step; a null payload marks a missing side.
struct CoElement {
  Coord coord;
  const Payload* a = nullptr;
  const Payload* b = nullptr;
};

std::vector<CoElement> Intersect(const Fiber& a, const Fiber& b);
std::vector<CoElement> Union(const Fiber& a, const Fiber& b);

inline Value PayloadOr(const Payload* p, Value fallback) { return p ? p->value() : fallback; }

}  // namespace fibersim
