#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fibersim/fibertree.hpp"
#include "fibersim/spec.hpp"

namespace fibersim {

enum class Datum { kCoord, kPayload, kHeader };

std::string ToString(Datum d);

// Format of one rank of a (possibly partitioned or flattened) tensor view.
//  label:  the rank's name in declared terms (M1, MK00, K)
//  origin: declared base ranks it covers
//  upper:  partition label rank
// An exact entry wins; the lowest piece of a split uses its base entry; upper
// pieces cost nothing; a flattened rank sums its constituents' cbits and takes
// the innermost constituent's payload width. Throws Error("format") when the
// configuration has no entry for the rank.
RankFormat ResolveRankFormat(const FormatConfig& config, const std::string& label,
                             const std::vector<std::string>& origin, bool upper);

// Bit width of one access to a datum of the rank.
std::int64_t DatumBits(const RankFormat& f, Datum d);

struct Footprint {
  std::map<std::string, std::int64_t> rank_bits;  // by rank name
  std::int64_t total_bits = 0;
  double bytes() const { return static_cast<double>(total_bits) / 8.0; }
};

// Storage of `t` in `config`; t's rank names must have entries in the config.
Footprint ComputeFootprint(const Tensor& t, const FormatConfig& config);

// Address of a datum inside its rank's storage. SoA keeps coordinates,
// payloads and headers in separate arrays; AoS interleaves each element's
// coordinate and payload.
struct DatumAddress {
  int region = 0;           // 0 coordinates (or AoS elements), 1 payloads, 2 headers
  std::int64_t byte = 0;    // offset of the first byte
  std::int64_t bits = 0;    // width of the access
};

DatumAddress Locate(const RankFormat& f, Datum d, std::int64_t position);

// Configuration a tensor is accessed through in one Einsum: the first
// storage binding naming it with a config, else its sole or first config.
// Null when the tensor has no format configurations.
const FormatConfig* SelectConfig(const ProblemSpec& spec, const std::string& einsum_output,
                                 const std::string& tensor);

}  // namespace fibersim
