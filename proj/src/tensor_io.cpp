#include "fibersim/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include "fibersim/error.hpp"

namespace fibersim {

std::uint64_t SplitMix64::Next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::Below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection of the biased low region.
  unsigned __int128 m = static_cast<unsigned __int128>(Next()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(Next()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double SplitMix64::Unit() { return static_cast<double>((Next() >> 11) + 1) * 0x1.0p-53; }

namespace {

[[noreturn]] void Fail(const std::string& msg) { throw Error("tensor_io", msg); }

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) out.push_back(part);
  return out;
}

std::int64_t ToInt(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    Fail("bad " + what + " '" + s + "'");
  }
}

std::vector<std::int64_t> Unravel(std::uint64_t linear, const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> idx(shape.size());
  for (std::size_t i = shape.size(); i-- > 0;) {
    idx[i] = static_cast<std::int64_t>(linear % static_cast<std::uint64_t>(shape[i]));
    linear /= static_cast<std::uint64_t>(shape[i]);
  }
  return idx;
}

}  // namespace

GenSpec ParseGenSpec(const std::string& text, const GenSpec& base) {
  GenSpec g = base;
  for (const auto& item : SplitOn(text, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) Fail("generator field '" + item + "' lacks '='");
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    if (key == "shape") {
      g.shape.clear();
      for (const auto& d : SplitOn(val, 'x')) g.shape.push_back(ToInt(d, "shape"));
    } else if (key == "density") {
      try {
        g.density = std::stod(val);
      } catch (const std::exception&) {
        Fail("bad density '" + val + "'");
      }
    } else if (key == "seed") {
      try {
        g.seed = std::stoull(val);
      } catch (const std::exception&) {
        Fail("bad seed '" + val + "'");
      }
    } else if (key == "values") {
      if (val == "float") {
        g.values = GenSpec::Values::kFloat;
      } else {
        auto parts = SplitOn(val, ':');
        if (parts.size() != 3 || parts[0] != "int") Fail("values must be float or int:LO:HI");
        g.values = GenSpec::Values::kInt;
        g.lo = ToInt(parts[1], "value bound");
        g.hi = ToInt(parts[2], "value bound");
      }
    } else {
      Fail("unknown generator field '" + key + "'");
    }
  }
  return g;
}

Tensor Generate(const GenSpec& spec, std::string name, std::vector<std::string> ranks) {
  if (spec.shape.size() != ranks.size()) Fail("generator shape has " + std::to_string(spec.shape.size()) +
                                              " ranks, tensor " + name + " has " + std::to_string(ranks.size()));
  if (!(spec.density >= 0) || spec.density > 1) Fail("density must lie in [0, 1]");
  if (spec.values == GenSpec::Values::kInt && (spec.lo > spec.hi || (spec.lo <= 0 && spec.hi >= 0)))
    Fail("integer value range must be nonempty and exclude 0");
  std::uint64_t total = 1;
  for (auto s : spec.shape) {
    if (s < 1) Fail("shape extents must be positive");
    total *= static_cast<std::uint64_t>(s);
  }
  const auto k = static_cast<std::uint64_t>(std::llround(spec.density * static_cast<double>(total)));

  SplitMix64 rng(spec.seed);
  std::unordered_set<std::uint64_t> taken;
  taken.reserve(k * 2);
  std::vector<std::uint64_t> chosen;
  chosen.reserve(k);
  for (std::uint64_t j = total - k; j < total; ++j) {
    std::uint64_t t = rng.Below(j + 1);
    if (!taken.insert(t).second) {
      taken.insert(j);
      t = j;
    }
    chosen.push_back(t);
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<Point> points;
  points.reserve(k);
  const auto span = static_cast<std::uint64_t>(spec.hi - spec.lo + 1);
  for (auto linear : chosen) {
    Point p;
    for (auto c : Unravel(linear, spec.shape)) p.coords.emplace_back(c);
    p.value = spec.values == GenSpec::Values::kFloat ? rng.Unit()
                                                     : static_cast<Value>(spec.lo + static_cast<std::int64_t>(rng.Below(span)));
    points.push_back(std::move(p));
  }
  return Tensor::FromPoints(std::move(name), std::move(ranks), spec.shape, std::move(points));
}

std::uint64_t Checksum(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : t.points()) {
    for (const auto& c : p.coords)
      for (std::size_t i = 0; i < c.arity(); ++i) mix(static_cast<std::uint64_t>(c[i]));
    if (std::nearbyint(p.value) == p.value && std::fabs(p.value) < 0x1.0p63)
      mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(p.value)));
    else
      mix(std::bit_cast<std::uint64_t>(p.value));
  }
  return h;
}

// ---------------------------------------------------------------- Matrix Market

Tensor ParseMatrixMarket(const std::string& text, std::string name, std::vector<std::string> ranks) {
  if (ranks.size() != 2) Fail("a Matrix Market tensor has two ranks");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) Fail("empty Matrix Market file");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  object = lower(object), format = lower(format), field = lower(field), symmetry = lower(symmetry);
  if (banner != "%%MatrixMarket" || object != "matrix") Fail("malformed Matrix Market header: " + line);
  if (format != "coordinate") Fail("only coordinate Matrix Market files are supported");
  if (field != "real" && field != "integer" && field != "pattern") Fail("unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric") Fail("unsupported symmetry '" + symmetry + "'");

  std::int64_t rows = -1, cols = -1, entries = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream size(line);
    if (!(size >> rows >> cols >> entries) || rows < 1 || cols < 1 || entries < 0)
      Fail("malformed size line: " + line);
    break;
  }
  if (rows < 0) Fail("missing size line");

  std::map<std::pair<std::int64_t, std::int64_t>, Value> sums;
  std::int64_t seen = 0;
  while (seen < entries && std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream entry(line);
    std::int64_t i = 0, j = 0;
    Value v = 1;
    if (!(entry >> i >> j)) Fail("malformed entry: " + line);
    if (field != "pattern" && !(entry >> v)) Fail("entry lacks a value: " + line);
    if (i < 1 || i > rows || j < 1 || j > cols)
      Fail("entry (" + std::to_string(i) + ", " + std::to_string(j) + ") outside " + std::to_string(rows) + "x" +
           std::to_string(cols));
    sums[{i - 1, j - 1}] += v;
    if (symmetry == "symmetric" && i != j) sums[{j - 1, i - 1}] += v;
    ++seen;
  }
  if (seen < entries) Fail("expected " + std::to_string(entries) + " entries, found " + std::to_string(seen));

  std::vector<Point> points;
  for (const auto& [ij, v] : sums) {
    if (v == 0) continue;
    points.push_back(Point{{Coord(ij.first), Coord(ij.second)}, v});
  }
  return Tensor::FromPoints(std::move(name), std::move(ranks), {rows, cols}, std::move(points));
}

Tensor LoadMatrixMarket(const std::string& path, std::string name, std::vector<std::string> ranks) {
  std::ifstream f(path);
  if (!f) Fail("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ParseMatrixMarket(ss.str(), std::move(name), std::move(ranks));
}

std::string FormatMatrixMarket(const Tensor& t) {
  if (t.depth() != 2) Fail("Matrix Market output needs a 2-rank tensor");
  auto points = t.points();
  bool integral = std::all_of(points.begin(), points.end(), [](const Point& p) {
    return std::nearbyint(p.value) == p.value && std::fabs(p.value) < 0x1.0p53;
  });
  std::ostringstream out;
  out << "%%MatrixMarket matrix coordinate " << (integral ? "integer" : "real") << " general\n";
  out << t.shape()[0] << " " << t.shape()[1] << " " << points.size() << "\n";
  char buf[64];
  for (const auto& p : points) {
    out << p.coords[0].scalar() + 1 << " " << p.coords[1].scalar() + 1 << " ";
    if (integral) {
      out << static_cast<std::int64_t>(p.value);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", p.value);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

void SaveMatrixMarket(const Tensor& t, const std::string& path) {
  std::ofstream f(path);
  if (!f) Fail("cannot write " + path);
  f << FormatMatrixMarket(t);
  if (!f) Fail("write failed for " + path);
}

// ---------------------------------------------------------------- shapes

namespace {

void VisitAccesses(const Expr& e, const std::function<void(const Expr&)>& fn) {
  if (e.kind == Expr::Kind::kAccess) {
    fn(e);
    return;
  }
  for (const auto& a : e.args) VisitAccesses(a, fn);
}

}  // namespace

std::int64_t VariableExtent(const ProblemSpec& spec, const EinsumDecl& e, const std::string& var,
                            const ShapeMap& known) {
  std::int64_t found = -1;
  VisitAccesses(e.expr, [&](const Expr& a) {
    auto it = known.find(a.tensor);
    if (found >= 0 || it == known.end()) return;
    for (std::size_t i = 0; i < a.indices.size(); ++i)
      if (!a.indices[i].affine() && a.indices[i].vars[0] == var) {
        found = it->second[i];
        return;
      }
  });
  if (found >= 0) return found;
  if (auto s = spec.shape.find(RankOf(var)); s != spec.shape.end()) return s->second;
  for (const auto& [name, shape] : known) {
    const TensorDecl* d = spec.tensor(name);
    if (!d) continue;
    for (std::size_t i = 0; i < d->ranks.size() && i < shape.size(); ++i)
      if (d->ranks[i] == RankOf(var)) return shape[i];
  }
  VisitAccesses(e.expr, [&](const Expr& a) {
    auto it = known.find(a.tensor);
    if (found >= 0 || it == known.end()) return;
    for (std::size_t i = 0; i < a.indices.size(); ++i) {
      const auto& vs = a.indices[i].vars;
      if (a.indices[i].affine() && std::find(vs.begin(), vs.end(), var) != vs.end()) {
        found = it->second[i];
        return;
      }
    }
  });
  if (found >= 0) return found;
  throw Error("spec", "cannot determine the extent of variable " + var + " in " + e.str());
}

ShapeMap InferShapes(const ProblemSpec& spec, const ShapeMap& inputs) {
  ShapeMap known = inputs;
  for (const auto& [name, shape] : inputs) {
    const TensorDecl* d = spec.tensor(name);
    if (d && d->ranks.size() != shape.size())
      throw Error("spec", "tensor " + name + " has " + std::to_string(shape.size()) + " ranks, declared " +
                              std::to_string(d->ranks.size()));
  }
  for (const auto& e : spec.einsums) {
    for (const auto& in : e.inputs())
      if (!known.count(in)) throw Error("spec", "input tensor " + in + " of " + e.str() + " has no data");
    std::vector<std::int64_t> shape;
    for (const auto& v : e.output_vars) shape.push_back(VariableExtent(spec, e, v, known));
    auto it = known.find(e.output);
    if (it != known.end() && it->second != shape)
      throw Error("spec", "Einsum " + e.str() + " rewrites " + e.output + " with a different shape");
    known[e.output] = shape;
  }
  return known;
}

// ---------------------------------------------------------------- oracle

namespace {

constexpr std::int64_t kOracleMaxExtent = 32;

class Oracle {
 public:
  Oracle(const Semiring& sr, std::map<std::string, Dense>& tensors, const std::map<std::string, std::size_t>& slot)
      : sr_(sr), tensors_(tensors), slot_(slot) {}

  Value Eval(const Expr& e, const std::vector<std::int64_t>& point) const {
    switch (e.kind) {
      case Expr::Kind::kAccess: {
        const Dense& d = tensors_.at(e.tensor);
        std::vector<std::int64_t> idx;
        for (std::size_t i = 0; i < e.indices.size(); ++i) {
          std::int64_t c = 0;
          for (const auto& v : e.indices[i].vars) c += point[slot_.at(v)];
          if (c >= d.shape[i]) return sr_.zero();
          idx.push_back(c);
        }
        return d.at(idx);
      }
      case Expr::Kind::kMul:
        return sr_.Mul(Eval(e.args[0], point), Eval(e.args[1], point));
      case Expr::Kind::kAdd:
        return sr_.Add(Eval(e.args[0], point), Eval(e.args[1], point));
      case Expr::Kind::kSub:
        return sr_.Sub(Eval(e.args[0], point), Eval(e.args[1], point));
      case Expr::Kind::kTake: {
        Value a = Eval(e.args[0], point), b = Eval(e.args[1], point);
        if (a == sr_.zero() || b == sr_.zero()) return sr_.zero();
        return e.take_arg == 0 ? a : b;
      }
    }
    return sr_.zero();
  }

 private:
  Semiring sr_;
  std::map<std::string, Dense>& tensors_;
  const std::map<std::string, std::size_t>& slot_;
};

}  // namespace

std::map<std::string, Dense> DenseEinsumOracle(const ProblemSpec& spec, const std::map<std::string, Dense>& inputs) {
  ShapeMap in_shapes;
  for (const auto& [name, d] : inputs) in_shapes[name] = d.shape;
  ShapeMap shapes = InferShapes(spec, in_shapes);
  for (const auto& [name, shape] : shapes)
    for (auto s : shape)
      if (s > kOracleMaxExtent)
        Fail("oracle refuses tensor " + name + ": extent " + std::to_string(s) + " exceeds " +
             std::to_string(kOracleMaxExtent));

  const Semiring& sr = spec.semiring;
  std::map<std::string, Dense> tensors = inputs;
  for (const auto& e : spec.einsums) {
    std::vector<std::string> vars = e.variables();
    ShapeMap known;
    for (const auto& [name, d] : tensors) known[name] = d.shape;
    std::map<std::string, std::size_t> slot;
    std::vector<std::int64_t> extent;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      slot[vars[i]] = i;
      extent.push_back(VariableExtent(spec, e, vars[i], known));
      if (extent.back() > kOracleMaxExtent) Fail("oracle refuses variable " + vars[i] + ": extent too large");
    }
    Oracle oracle(sr, tensors, slot);
    const bool take_root = e.expr.kind == Expr::Kind::kTake;

    Dense result(shapes.at(e.output), sr.zero());
    std::vector<std::int64_t> point(vars.size(), 0);
    bool empty = std::any_of(extent.begin(), extent.end(), [](std::int64_t x) { return x == 0; });
    while (!empty) {
      Value v = oracle.Eval(e.expr, point);
      std::vector<std::int64_t> out(point.begin(), point.begin() + static_cast<std::ptrdiff_t>(e.output_vars.size()));
      Value& dst = result.at(out);
      if (take_root) {
        if (v != sr.zero()) dst = v;
      } else {
        dst = sr.Add(dst, v);
      }
      std::size_t i = vars.size();
      while (i > 0) {
        if (++point[i - 1] < extent[i - 1]) break;
        point[i - 1] = 0;
        --i;
      }
      if (i == 0) break;
    }

    auto prior = tensors.find(e.output);
    if (prior != tensors.end()) {
      for (std::size_t i = 0; i < result.size(); ++i)
        if (result.data[i] != sr.zero()) prior->second.data[i] = result.data[i];
    } else {
      tensors.emplace(e.output, std::move(result));
    }
  }
  return tensors;
}

}  // namespace fibersim
