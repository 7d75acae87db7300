#include "fibersim/format.hpp"

#include <algorithm>

#include "fibersim/error.hpp"

namespace fibersim {

std::string ToString(Datum d) {
  switch (d) {
    case Datum::kCoord: return "coord";
    case Datum::kPayload: return "payload";
    case Datum::kHeader: return "header";
  }
  return "?";
}

RankFormat ResolveRankFormat(const FormatConfig& config, const std::string& label,
                             const std::vector<std::string>& origin, bool upper) {
  if (const RankFormat* f = config.find(label)) return *f;
  if (upper) {
    RankFormat f;
    f.type = FormatType::kC;
    return f;
  }
  if (origin.size() == 1) {
    if (const RankFormat* f = config.find(origin[0])) return *f;
  } else if (!origin.empty()) {
    RankFormat out;
    bool complete = true;
    for (const auto& o : origin) {
      const RankFormat* f = config.find(o);
      if (!f) {
        complete = false;
        break;
      }
      out.cbits += f->cbits;
      out.pbits = f->pbits;
      out.fhbits = f->fhbits;
      out.type = f->type;
      out.layout = f->layout;
    }
    if (complete) return out;
  }
  throw Error("format", "configuration " + config.name + " has no entry for rank " + label);
}

std::int64_t DatumBits(const RankFormat& f, Datum d) {
  switch (d) {
    case Datum::kCoord: return f.cbits;
    case Datum::kPayload: return f.pbits;
    case Datum::kHeader: return f.fhbits;
  }
  return 0;
}

namespace {

void Accumulate(const Fiber& fiber, std::size_t depth, const Tensor& t,
                const std::vector<RankFormat>& formats, Footprint& fp) {
  const RankFormat& f = formats[depth];
  const std::int64_t shape = t.shape()[depth];
  const auto occ = static_cast<std::int64_t>(fiber.size());
  std::int64_t bits = f.fhbits;
  switch (f.type) {
    case FormatType::kU: bits += (f.cbits + f.pbits) * shape; break;
    case FormatType::kC: bits += (f.cbits + f.pbits) * occ; break;
    case FormatType::kB: bits += f.cbits * shape + f.pbits * occ; break;
  }
  fp.rank_bits[t.ranks()[depth]] += bits;
  fp.total_bits += bits;
  if (depth + 1 < formats.size())
    for (std::size_t i = 0; i < fiber.size(); ++i) Accumulate(fiber.payload(i).fiber(), depth + 1, t, formats, fp);
}

}  // namespace

Footprint ComputeFootprint(const Tensor& t, const FormatConfig& config) {
  std::vector<RankFormat> formats;
  Footprint fp;
  for (const auto& r : t.ranks()) {
    const RankFormat* f = config.find(r);
    if (!f) throw Error("format", "configuration " + config.name + " has no entry for rank " + r);
    formats.push_back(*f);
    fp.rank_bits[r] = 0;
  }
  if (!formats.empty()) Accumulate(t.root(), 0, t, formats, fp);
  return fp;
}

DatumAddress Locate(const RankFormat& f, Datum d, std::int64_t position) {
  DatumAddress a;
  a.bits = DatumBits(f, d);
  if (d == Datum::kHeader) {
    a.region = 2;
    a.byte = position * f.fhbits / 8;
    return a;
  }
  if (f.layout == Layout::kAoS) {
    a.region = 0;
    a.byte = (position * (f.cbits + f.pbits) + (d == Datum::kPayload ? f.cbits : 0)) / 8;
    return a;
  }
  a.region = d == Datum::kCoord ? 0 : 1;
  a.byte = position * a.bits / 8;
  return a;
}

const FormatConfig* SelectConfig(const ProblemSpec& spec, const std::string& einsum_output,
                                 const std::string& tensor) {
  auto fit = spec.format.find(tensor);
  if (fit == spec.format.end() || fit->second.empty()) return nullptr;
  auto named = [&](const std::string& name) -> const FormatConfig* {
    for (const auto& c : fit->second)
      if (c.name == name) return &c;
    return nullptr;
  };
  auto bit = spec.binding.find(einsum_output);
  if (bit != spec.binding.end())
    for (const auto& cb : bit->second.components)
      for (const auto& s : cb.storage)
        if (s.tensor == tensor && !s.config.empty())
          if (const FormatConfig* c = named(s.config)) return c;
  return &fit->second.front();
}

}  // namespace fibersim
