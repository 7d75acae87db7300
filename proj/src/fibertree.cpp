#include "fibersim/fibertree.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "fibersim/error.hpp"

namespace fibersim {

Coord::Coord(std::initializer_list<std::int64_t> parts) {
  if (parts.size() == 0 || parts.size() > kMaxArity)
    throw Error("fibertree", "coordinate arity must be in [1, 4]");
  for (auto p : parts) v_[n_++] = p;
}

Coord Coord::Concat(const Coord& upper, const Coord& lower) {
  if (upper.n_ + lower.n_ > kMaxArity)
    throw Error("fibertree", "flattened coordinate exceeds arity 4");
  Coord c = upper;
  for (std::size_t i = 0; i < lower.n_; ++i) c.v_[c.n_++] = lower.v_[i];
  return c;
}

std::int64_t Coord::scalar() const {
  if (n_ != 1) throw Error("fibertree", "expected scalar coordinate, got " + str());
  return v_[0];
}

Coord Coord::Slice(std::size_t begin, std::size_t end) const {
  Coord c;
  for (std::size_t i = begin; i < end && i < n_; ++i) c.v_[c.n_++] = v_[i];
  return c;
}

std::string Coord::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Coord& c) {
  if (!c.is_tuple()) return os << c[0];
  os << '(';
  for (std::size_t i = 0; i < c.arity(); ++i) os << (i ? "," : "") << c[i];
  return os << ')';
}

Payload::Payload(Fiber f) : fiber_(std::make_unique<Fiber>(std::move(f))) {}

Payload::Payload(const Payload& other) : value_(other.value_) {
  if (other.fiber_) fiber_ = std::make_unique<Fiber>(*other.fiber_);
}

Payload& Payload::operator=(const Payload& other) {
  if (this != &other) {
    value_ = other.value_;
    fiber_ = other.fiber_ ? std::make_unique<Fiber>(*other.fiber_) : nullptr;
  }
  return *this;
}

Payload::~Payload() = default;

bool operator==(const Payload& a, const Payload& b) {
  if (a.is_fiber() != b.is_fiber()) return false;
  if (a.is_fiber()) return *a.fiber_ == *b.fiber_;
  return a.value_ == b.value_;
}

std::optional<std::size_t> Fiber::find(const Coord& c) const {
  auto it = std::lower_bound(coords_.begin(), coords_.end(), c);
  if (it == coords_.end() || *it != c) return std::nullopt;
  return static_cast<std::size_t>(it - coords_.begin());
}

std::size_t Fiber::lower_bound(const Coord& c) const { return lower_bound(c, 0); }

std::size_t Fiber::lower_bound(const Coord& c, std::size_t from) const {
  auto it = std::lower_bound(coords_.begin() + static_cast<std::ptrdiff_t>(from), coords_.end(), c);
  return static_cast<std::size_t>(it - coords_.begin());
}

const Payload* Fiber::get_payload(const Coord& c) const {
  auto pos = find(c);
  return pos ? &payloads_[*pos] : nullptr;
}

Payload& Fiber::populate(const Coord& c, const Payload& init) {
  if (coords_.empty() || coords_.back() < c) {
    coords_.push_back(c);
    payloads_.push_back(init);
    return payloads_.back();
  }
  auto it = std::lower_bound(coords_.begin(), coords_.end(), c);
  auto pos = it - coords_.begin();
  if (*it != c) {
    coords_.insert(it, c);
    payloads_.insert(payloads_.begin() + pos, init);
  }
  return payloads_[static_cast<std::size_t>(pos)];
}

void Fiber::append(const Coord& c, Payload p) {
  if (!coords_.empty() && !(coords_.back() < c))
    throw Error("fibertree", "append out of order: " + c.str() + " after " + coords_.back().str());
  coords_.push_back(c);
  payloads_.push_back(std::move(p));
}

void Fiber::erase(std::size_t i) {
  coords_.erase(coords_.begin() + static_cast<std::ptrdiff_t>(i));
  payloads_.erase(payloads_.begin() + static_cast<std::ptrdiff_t>(i));
}

Dense::Dense(std::vector<std::int64_t> s, Value fill) : shape(std::move(s)) {
  std::size_t n = 1;
  for (auto e : shape) n *= static_cast<std::size_t>(e);
  data.assign(n, fill);
}

std::size_t Dense::offset(std::span<const std::int64_t> index) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < shape.size(); ++i)
    off = off * static_cast<std::size_t>(shape[i]) + static_cast<std::size_t>(index[i]);
  return off;
}

Tensor::Tensor(std::string name, std::vector<std::string> ranks, std::vector<std::int64_t> shape)
    : name_(std::move(name)), ranks_(std::move(ranks)), shape_(std::move(shape)) {
  if (ranks_.size() != shape_.size())
    throw Error("fibertree", "tensor " + name_ + ": ranks and shape differ in length");
  for (auto e : shape_)
    if (e < 1) throw Error("fibertree", "tensor " + name_ + ": rank shapes must be positive");
}

Tensor::Tensor(std::string name, std::vector<std::string> ranks, std::vector<std::int64_t> shape,
               Fiber root)
    : Tensor(std::move(name), std::move(ranks), std::move(shape)) {
  root_ = std::move(root);
}

namespace {

void BuildFromSorted(Fiber& fiber, std::span<Point> points, std::size_t level, std::size_t depth) {
  std::size_t i = 0;
  while (i < points.size()) {
    const Coord& c = points[i].coords[level];
    std::size_t j = i + 1;
    while (j < points.size() && points[j].coords[level] == c) ++j;
    if (level + 1 == depth) {
      if (j - i > 1) throw Error("fibertree", "duplicate point at coordinate " + c.str());
      fiber.append(c, Payload(points[i].value));
    } else {
      Fiber child;
      BuildFromSorted(child, points.subspan(i, j - i), level + 1, depth);
      fiber.append(c, Payload(std::move(child)));
    }
    i = j;
  }
}

void CollectPoints(const Fiber& fiber, std::vector<Coord>& prefix, std::vector<Point>& out) {
  for (std::size_t i = 0; i < fiber.size(); ++i) {
    prefix.push_back(fiber.coord(i));
    const Payload& p = fiber.payload(i);
    if (p.is_fiber())
      CollectPoints(p.fiber(), prefix, out);
    else
      out.push_back(Point{prefix, p.value()});
    prefix.pop_back();
  }
}

std::size_t CountLeaves(const Fiber& fiber) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < fiber.size(); ++i)
    n += fiber.payload(i).is_fiber() ? CountLeaves(fiber.payload(i).fiber()) : 1;
  return n;
}

void CompactFiber(Fiber& fiber, Value zero) {
  for (std::size_t i = fiber.size(); i-- > 0;) {
    Payload& p = fiber.payload(i);
    if (p.is_fiber()) {
      CompactFiber(p.fiber(), zero);
      if (p.fiber().empty()) fiber.erase(i);
    } else if (p.value() == zero) {
      fiber.erase(i);
    }
  }
}

}  // namespace

Tensor Tensor::FromPoints(std::string name, std::vector<std::string> ranks,
                          std::vector<std::int64_t> shape, std::vector<Point> points) {
  Tensor t(std::move(name), std::move(ranks), std::move(shape));
  if (t.depth() == 0) {
    if (points.size() > 1) throw Error("fibertree", "rank-0 tensor with several points");
    if (!points.empty()) t.scalar_ = points.front().value;
    return t;
  }
  std::sort(points.begin(), points.end(),
            [](const Point& a, const Point& b) { return a.coords < b.coords; });
  BuildFromSorted(t.root_, points, 0, t.depth());
  return t;
}

std::optional<std::size_t> Tensor::rank_index(const std::string& rank) const {
  auto it = std::find(ranks_.begin(), ranks_.end(), rank);
  if (it == ranks_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ranks_.begin());
}

std::int64_t Tensor::shape_of(const std::string& rank) const {
  auto i = rank_index(rank);
  if (!i) throw Error("fibertree", "tensor " + name_ + " has no rank " + rank);
  return shape_[*i];
}

std::vector<Point> Tensor::points() const {
  std::vector<Point> out;
  if (depth() == 0) {
    out.push_back(Point{{}, scalar_});
    return out;
  }
  std::vector<Coord> prefix;
  CollectPoints(root_, prefix, out);
  return out;
}

std::size_t Tensor::nnz() const { return depth() == 0 ? 1 : CountLeaves(root_); }

void Tensor::rename_ranks(std::vector<std::string> ranks) {
  if (ranks.size() != ranks_.size())
    throw Error("fibertree", "rename of tensor " + name_ + " changes its depth");
  ranks_ = std::move(ranks);
}

void Tensor::compact(Value zero) {
  if (depth() > 0) CompactFiber(root_, zero);
}

Tensor FromDense(const Dense& data, std::string name, std::vector<std::string> ranks, Value zero) {
  if (ranks.size() != data.shape.size())
    throw Error("fibertree", "from_dense: " + std::to_string(ranks.size()) + " rank names for a " +
                                 std::to_string(data.shape.size()) + "-d array");
  std::size_t expect = 1;
  for (auto e : data.shape) expect *= static_cast<std::size_t>(e);
  if (expect != data.data.size()) throw Error("fibertree", "from_dense: ragged input");

  std::vector<Point> points;
  std::vector<std::int64_t> idx(data.shape.size(), 0);
  for (std::size_t flat = 0; flat < data.data.size(); ++flat) {
    if (data.data[flat] != zero) {
      Point p;
      p.value = data.data[flat];
      for (auto i : idx) p.coords.emplace_back(i);
      points.push_back(std::move(p));
    }
    for (std::size_t d = idx.size(); d-- > 0;) {
      if (++idx[d] < data.shape[d]) break;
      idx[d] = 0;
    }
  }
  return Tensor::FromPoints(std::move(name), std::move(ranks), data.shape, std::move(points));
}

Dense ToDense(const Tensor& t, Value zero) {
  Dense out(t.shape(), zero);
  if (t.depth() == 0) {
    out.data.assign(1, t.scalar());
    return out;
  }
  std::vector<std::int64_t> idx(t.depth());
  for (const Point& p : t.points()) {
    for (std::size_t d = 0; d < t.depth(); ++d) {
      idx[d] = p.coords[d].scalar();
      if (idx[d] < 0 || idx[d] >= t.shape()[d])
        throw Error("fibertree", "to_dense: coordinate out of shape in " + t.name());
    }
    out.at(idx) = p.value;
  }
  return out;
}

std::ostream& operator<<(std::ostream& os, const Fiber& f) {
  os << '{';
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) os << ", ";
    os << f.coord(i) << "->";
    if (f.payload(i).is_fiber())
      os << f.payload(i).fiber();
    else
      os << f.payload(i).value();
  }
  return os << '}';
}

std::ostream& operator<<(std::ostream& os, const Tensor& t) {
  os << t.name() << '[';
  for (std::size_t i = 0; i < t.depth(); ++i) os << (i ? "," : "") << t.ranks()[i];
  os << "] ";
  if (t.depth() == 0) return os << t.scalar();
  return os << t.root();
}

}  // namespace fibersim
