#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fibersim/fibertree.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

// SplitMix64: state advances by 0x9e3779b97f4a7c15 per draw, output is the
// standard two-multiply finalizer of the new state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t Next();
  // Uniform in [0, n), n > 0, by rejection on the 128-bit product.
  std::uint64_t Below(std::uint64_t n);
  // Uniform in (0, 1]: ((x >> 11) + 1) * 2^-53.
  double Unit();

 private:
  std::uint64_t state_;
};

struct GenSpec {
  enum class Values { kInt, kFloat };

  std::vector<std::int64_t> shape;
  double density = 1.0;
  std::uint64_t seed = 1;
  Values values = Values::kInt;
  std::int64_t lo = 1;  // inclusive integer range
  std::int64_t hi = 9;
};

// "shape=16x16,density=0.3,seed=7[,values=int:1:9|float]". Keys not given
// keep the defaults of `base`.
GenSpec ParseGenSpec(const std::string& text, const GenSpec& base = {});

// Samples exactly round(density * prod(shape)) distinct linear positions with
// Floyd's algorithm (draw j in [N-k, N): t = Below(j+1); take t, or j if t was
// already taken), sorts them, then draws one value per position in order.
Tensor Generate(const GenSpec& spec, std::string name, std::vector<std::string> ranks);

// FNV-1a over each point's coordinates and value (as int64 when integral,
// else its IEEE bits), in depth-first order.
std::uint64_t Checksum(const Tensor& t);

// Coordinate Matrix Market (real, integer, pattern; general, symmetric).
// Indices become 0-based, symmetric entries are mirrored, pattern entries are
// 1, duplicates are summed and zero sums dropped.
Tensor LoadMatrixMarket(const std::string& path, std::string name = "",
                        std::vector<std::string> ranks = {"R", "C"});
Tensor ParseMatrixMarket(const std::string& text, std::string name = "",
                         std::vector<std::string> ranks = {"R", "C"});
void SaveMatrixMarket(const Tensor& t, const std::string& path);
std::string FormatMatrixMarket(const Tensor& t);

using ShapeMap = std::map<std::string, std::vector<std::int64_t>>;

// Shapes of every tensor the cascade writes, given the external inputs'
// shapes (in declaration rank order). A variable's extent is taken from a
// known operand where it is a plain subscript, else einsum.shape, else any
// known tensor with a rank of that name, else the shape indexed by an affine
// subscript that contains it.
ShapeMap InferShapes(const ProblemSpec& spec, const ShapeMap& inputs);

// Extent of one variable of `e` under the rule above.
std::int64_t VariableExtent(const ProblemSpec& spec, const EinsumDecl& e, const std::string& var,
                            const ShapeMap& known);

// Brute-force evaluation of the cascade over dense arrays in declaration
// rank order, filled with the semiring zero. Returns every tensor (inputs
// included) after the last Einsum. Each rank is limited to 32.
std::map<std::string, Dense> DenseEinsumOracle(const ProblemSpec& spec,
                                               const std::map<std::string, Dense>& inputs);

}  // namespace fibersim
