#pragma once

// Test-only helpers: a random dense-array source independent of the
// library's generator, and a few comparison utilities.

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fibersim/fibertree.hpp"

namespace fibersim::testing {

inline Dense RandomDense(std::mt19937_64& rng, std::vector<std::int64_t> shape, double density,
                         int max_value = 9) {
  Dense d(std::move(shape), 0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> val(1, max_value);
  for (auto& x : d.data)
    if (coin(rng) < density) x = val(rng);
  return d;
}

inline Fiber RandomFiber(std::mt19937_64& rng, int extent, double density) {
  Fiber f;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int c = 0; c < extent; ++c)
    if (coin(rng) < density) f.append(Coord(c), Payload(Value(c + 1)));
  return f;
}

inline std::set<std::int64_t> CoordSet(const Fiber& f) {
  std::set<std::int64_t> s;
  for (const auto& c : f.coords()) s.insert(c.scalar());
  return s;
}

// Axis permutation of a dense array: out[idx permuted] = in[idx].
inline Dense PermuteAxes(const Dense& in, const std::vector<std::size_t>& perm) {
  std::vector<std::int64_t> shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shape[i] = in.shape[perm[i]];
  Dense out(shape, 0);
  std::vector<std::int64_t> idx(in.shape.size(), 0), oidx(perm.size());
  for (std::size_t flat = 0; flat < in.data.size(); ++flat) {
    for (std::size_t i = 0; i < perm.size(); ++i) oidx[i] = idx[perm[i]];
    out.at(oidx) = in.data[flat];
    for (std::size_t d = idx.size(); d-- > 0;) {
      if (++idx[d] < in.shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

// Stable tensor equality up to shape metadata: same points, same values.
inline bool SamePoints(const Tensor& a, const Tensor& b) {
  auto pa = a.points(), pb = b.points();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].coords != pb[i].coords || pa[i].value != pb[i].value) return false;
  return true;
}

}  // namespace fibersim::testing
