#include "fibersim/transforms.hpp"

#include <algorithm>
#include <map>

#include "fibersim/error.hpp"

namespace fibersim {

namespace {

std::size_t RequireRank(const Tensor& t, const std::string& rank, const char* op) {
  auto i = t.rank_index(rank);
  if (!i) throw Error("fibertree", std::string(op) + ": tensor " + t.name() + " has no rank " + rank);
  return *i;
}

template <typename T>
std::vector<T> SpliceOne(const std::vector<T>& v, std::size_t at, T a, T b) {
  std::vector<T> out(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(at));
  out.push_back(std::move(a));
  out.push_back(std::move(b));
  out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(at) + 1, v.end());
  return out;
}

using Context = std::vector<Coord>;

// Chunk boundaries of every leader fiber on rank index `r`, keyed by the
// coordinates above it.
std::map<Context, std::vector<Coord>> ChunkStarts(const std::vector<Point>& points, std::size_t r,
                                                  std::int64_t size) {
  std::map<Context, std::vector<Coord>> starts;
  Context ctx;
  std::int64_t seen = 0;
  const Coord* last = nullptr;
  for (const Point& p : points) {
    Context here(p.coords.begin(), p.coords.begin() + static_cast<std::ptrdiff_t>(r));
    if (here != ctx || last == nullptr) {
      ctx = here;
      seen = 0;
      last = nullptr;
    }
    const Coord& c = p.coords[r];
    if (last && *last == c) continue;
    if (seen % size == 0) starts[ctx].push_back(c);
    ++seen;
    last = &p.coords[r];
  }
  return starts;
}

Coord LabelFor(const std::vector<Coord>& starts, const Coord& c) {
  auto it = std::upper_bound(starts.begin(), starts.end(), c);
  if (it == starts.begin()) return starts.front();
  return *(it - 1);
}

}  // namespace

Tensor Swizzle(const Tensor& t, const std::vector<std::string>& order) {
  if (order.size() != t.depth())
    throw Error("fibertree", "swizzle of " + t.name() + ": new order is not a permutation");
  std::vector<std::size_t> src(order.size());
  std::vector<bool> used(order.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto j = t.rank_index(order[i]);
    if (!j || used[*j])
      throw Error("fibertree", "swizzle of " + t.name() + ": new order is not a permutation");
    used[*j] = true;
    src[i] = *j;
  }
  if (order == t.ranks()) return t;
  std::vector<std::int64_t> shape(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) shape[i] = t.shape()[src[i]];
  std::vector<Point> pts = t.points();
  for (Point& p : pts) {
    std::vector<Coord> c(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) c[i] = p.coords[src[i]];
    p.coords = std::move(c);
  }
  return Tensor::FromPoints(t.name(), order, std::move(shape), std::move(pts));
}

Tensor PartitionUniformShape(const Tensor& t, const std::string& rank, std::int64_t size,
                             std::string upper, std::string lower) {
  if (size < 1) throw Error("fibertree", "uniform_shape size must be >= 1");
  const std::size_t r = RequireRank(t, rank, "uniform_shape");
  if (upper.empty()) upper = rank + "1";
  if (lower.empty()) lower = rank + "0";
  std::vector<Point> pts = t.points();
  for (Point& p : pts) {
    const std::int64_t c = p.coords[r].scalar();
    p.coords.insert(p.coords.begin() + static_cast<std::ptrdiff_t>(r), Coord((c / size) * size));
  }
  return Tensor::FromPoints(t.name(), SpliceOne(t.ranks(), r, upper, lower),
                            SpliceOne(t.shape(), r, t.shape()[r], t.shape()[r]), std::move(pts));
}

bool CanFollow(const Tensor& leader, const Tensor& follower, const std::string& rank) {
  auto r = leader.rank_index(rank);
  if (!r || !follower.rank_index(rank)) return false;
  for (std::size_t i = 0; i < *r; ++i)
    if (!follower.rank_index(leader.ranks()[i])) return false;
  return true;
}

OccupancyPartition PartitionUniformOccupancy(const Tensor& leader, std::span<const Tensor> followers,
                                             const std::string& rank, std::int64_t size,
                                             std::string upper, std::string lower) {
  if (size < 1) throw Error("fibertree", "uniform_occupancy size must be >= 1");
  const std::size_t r = RequireRank(leader, rank, "uniform_occupancy");
  if (upper.empty()) upper = rank + "1";
  if (lower.empty()) lower = rank + "0";

  std::vector<Point> lpts = leader.points();
  const auto starts = ChunkStarts(lpts, r, size);

  OccupancyPartition out;
  for (Point& p : lpts) {
    Context ctx(p.coords.begin(), p.coords.begin() + static_cast<std::ptrdiff_t>(r));
    Coord label = LabelFor(starts.at(ctx), p.coords[r]);
    p.coords.insert(p.coords.begin() + static_cast<std::ptrdiff_t>(r), label);
  }
  out.leader = Tensor::FromPoints(leader.name(), SpliceOne(leader.ranks(), r, upper, lower),
                                  SpliceOne(leader.shape(), r, leader.shape()[r], leader.shape()[r]),
                                  std::move(lpts));

  for (const Tensor& f : followers) {
    if (!CanFollow(leader, f, rank))
      throw Error("fibertree", "uniform_occupancy: " + f.name() + " cannot follow " + leader.name() +
                                   " on " + rank);
    std::vector<std::size_t> ctx_idx;
    for (std::size_t i = 0; i < r; ++i) ctx_idx.push_back(*f.rank_index(leader.ranks()[i]));
    const std::size_t fr = *f.rank_index(rank);

    // Follower fibers with no leader counterpart stay whole, labelled by
    // their own first coordinate (points arrive depth-first, so the first
    // point seen in a fiber carries its smallest coordinate).
    std::map<Context, Coord> orphan_first;
    std::vector<Point> fpts = f.points();
    for (Point& p : fpts) {
      auto& c = p.coords;
      Context ctx;
      for (auto i : ctx_idx) ctx.push_back(c[i]);
      Coord label;
      if (auto it = starts.find(ctx); it != starts.end()) {
        label = LabelFor(it->second, c[fr]);
      } else {
        Context fiber_ctx(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(fr));
        label = orphan_first.try_emplace(fiber_ctx, c[fr]).first->second;
      }
      c.insert(c.begin() + static_cast<std::ptrdiff_t>(fr), label);
    }
    out.followers.push_back(Tensor::FromPoints(f.name(), SpliceOne(f.ranks(), fr, upper, lower),
                                               SpliceOne(f.shape(), fr, f.shape()[fr], f.shape()[fr]),
                                               std::move(fpts)));
  }
  out.starts = starts;
  return out;
}

Tensor Flatten(const Tensor& t, const std::vector<std::string>& ranks, std::string name) {
  if (ranks.size() < 2) throw Error("fibertree", "flatten needs at least two ranks");
  const std::size_t first = RequireRank(t, ranks[0], "flatten");
  for (std::size_t i = 1; i < ranks.size(); ++i)
    if (RequireRank(t, ranks[i], "flatten") != first + i)
      throw Error("fibertree", "flatten of " + t.name() + ": ranks are not adjacent");
  if (name.empty())
    for (const auto& r : ranks) name += r;

  std::int64_t extent = 1;
  for (std::size_t i = 0; i < ranks.size(); ++i) extent *= t.shape()[first + i];
  std::vector<std::string> new_ranks;
  std::vector<std::int64_t> new_shape;
  for (std::size_t i = 0; i < t.depth(); ++i) {
    if (i == first) {
      new_ranks.push_back(name);
      new_shape.push_back(extent);
    } else if (i < first || i >= first + ranks.size()) {
      new_ranks.push_back(t.ranks()[i]);
      new_shape.push_back(t.shape()[i]);
    }
  }
  std::vector<Point> pts = t.points();
  for (Point& p : pts) {
    Coord merged = p.coords[first];
    for (std::size_t i = 1; i < ranks.size(); ++i) merged = Coord::Concat(merged, p.coords[first + i]);
    std::vector<Coord> c(p.coords.begin(), p.coords.begin() + static_cast<std::ptrdiff_t>(first));
    c.push_back(merged);
    c.insert(c.end(), p.coords.begin() + static_cast<std::ptrdiff_t>(first + ranks.size()),
             p.coords.end());
    p.coords = std::move(c);
  }
  return Tensor::FromPoints(t.name(), std::move(new_ranks), std::move(new_shape), std::move(pts));
}

Tensor MergePartition(const Tensor& t, const std::string& upper, const std::string& lower,
                      std::string name) {
  const std::size_t u = RequireRank(t, upper, "merge_partition");
  if (RequireRank(t, lower, "merge_partition") != u + 1)
    throw Error("fibertree", "merge_partition: " + upper + " is not directly above " + lower);
  std::vector<std::string> ranks = t.ranks();
  std::vector<std::int64_t> shape = t.shape();
  ranks.erase(ranks.begin() + static_cast<std::ptrdiff_t>(u));
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(u));
  ranks[u] = std::move(name);
  std::vector<Point> pts = t.points();
  for (Point& p : pts) p.coords.erase(p.coords.begin() + static_cast<std::ptrdiff_t>(u));
  return Tensor::FromPoints(t.name(), std::move(ranks), std::move(shape), std::move(pts));
}

Tensor Unflatten(const Tensor& t, const std::string& rank, const std::vector<std::string>& names,
                 const std::vector<std::int64_t>& shapes) {
  const std::size_t r = RequireRank(t, rank, "unflatten");
  if (names.size() != shapes.size() || names.size() < 2)
    throw Error("fibertree", "unflatten: names and shapes must list the same >= 2 ranks");
  std::vector<std::string> ranks(t.ranks().begin(), t.ranks().begin() + static_cast<std::ptrdiff_t>(r));
  std::vector<std::int64_t> shape(t.shape().begin(), t.shape().begin() + static_cast<std::ptrdiff_t>(r));
  ranks.insert(ranks.end(), names.begin(), names.end());
  shape.insert(shape.end(), shapes.begin(), shapes.end());
  ranks.insert(ranks.end(), t.ranks().begin() + static_cast<std::ptrdiff_t>(r) + 1, t.ranks().end());
  shape.insert(shape.end(), t.shape().begin() + static_cast<std::ptrdiff_t>(r) + 1, t.shape().end());
  std::vector<Point> pts = t.points();
  for (Point& p : pts) {
    const Coord tuple = p.coords[r];
    if (tuple.arity() != names.size())
      throw Error("fibertree", "unflatten: coordinate " + tuple.str() + " has the wrong arity");
    std::vector<Coord> c(p.coords.begin(), p.coords.begin() + static_cast<std::ptrdiff_t>(r));
    for (std::size_t i = 0; i < names.size(); ++i) c.push_back(tuple.Slice(i, i + 1));
    c.insert(c.end(), p.coords.begin() + static_cast<std::ptrdiff_t>(r) + 1, p.coords.end());
    p.coords = std::move(c);
  }
  return Tensor::FromPoints(t.name(), std::move(ranks), std::move(shape), std::move(pts));
}

std::vector<CoElement> Intersect(const Fiber& a, const Fiber& b) {
  std::vector<CoElement> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a.coord(i) == b.coord(j)) {
      out.push_back({a.coord(i), &a.payload(i), &b.payload(j)});
      ++i;
      ++j;
    } else if (a.coord(i) < b.coord(j)) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

std::vector<CoElement> Union(const Fiber& a, const Fiber& b) {
  std::vector<CoElement> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a.coord(i) < b.coord(j))) {
      out.push_back({a.coord(i), &a.payload(i), nullptr});
      ++i;
    } else if (i == a.size() || b.coord(j) < a.coord(i)) {
      out.push_back({b.coord(j), nullptr, &b.payload(j)});
      ++j;
    } else {
      out.push_back({a.coord(i), &a.payload(i), &b.payload(j)});
      ++i;
      ++j;
    }
  }
  return out;
}

}  // namespace fibersim
