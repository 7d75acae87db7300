#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fibersim {

// Scalar payloads. Integer workloads stay exact up to 2^53.
using Value = double;

// A fiber coordinate: a scalar, or a tuple after rank flattening. Tuples
// compare lexicographically.
class Coord {
 public:
  static constexpr std::size_t kMaxArity = 4;

  Coord() = default;
  Coord(std::int64_t c) : n_(1) { v_[0] = c; }  // NOLINT
  Coord(std::initializer_list<std::int64_t> parts);

  static Coord Concat(const Coord& upper, const Coord& lower);

  std::size_t arity() const { return n_; }
  bool is_tuple() const { return n_ > 1; }
  std::int64_t operator[](std::size_t i) const { return v_[i]; }
  std::int64_t scalar() const;

  // Components [begin, end).
  Coord Slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const Coord& a, const Coord& b) {
    if (a.n_ != b.n_) return false;
    for (std::size_t i = 0; i < a.n_; ++i)
      if (a.v_[i] != b.v_[i]) return false;
    return true;
  }
  friend std::strong_ordering operator<=>(const Coord& a, const Coord& b) {
    const std::size_t n = a.n_ < b.n_ ? a.n_ : b.n_;
    for (std::size_t i = 0; i < n; ++i)
      if (auto c = a.v_[i] <=> b.v_[i]; c != 0) return c;
    return a.n_ <=> b.n_;
  }

  std::string str() const;

 private:
  std::array<std::int64_t, kMaxArity> v_{};
  std::uint8_t n_ = 0;
};

std::ostream& operator<<(std::ostream& os, const Coord& c);

class Fiber;

// Leaf payloads hold a Value, interior payloads own a child Fiber.
class Payload {
 public:
  Payload() = default;
  Payload(Value v) : value_(v) {}  // NOLINT
  explicit Payload(Fiber f);
  Payload(const Payload& other);
  Payload(Payload&&) noexcept = default;
  Payload& operator=(const Payload& other);
  Payload& operator=(Payload&&) noexcept = default;
  ~Payload();

  bool is_fiber() const { return static_cast<bool>(fiber_); }
  Value value() const { return value_; }
  Value& value() { return value_; }
  const Fiber& fiber() const { return *fiber_; }
  Fiber& fiber() { return *fiber_; }

  friend bool operator==(const Payload& a, const Payload& b);

 private:
  Value value_ = 0;
  std::unique_ptr<Fiber> fiber_;
};

// Ordered coordinate/payload elements. Coordinates are strictly increasing.
class Fiber {
 public:
  Fiber() = default;

  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  const Coord& coord(std::size_t i) const { return coords_[i]; }
  const Payload& payload(std::size_t i) const { return payloads_[i]; }
  Payload& payload(std::size_t i) { return payloads_[i]; }
  std::span<const Coord> coords() const { return coords_; }

  // Position of `c`, by binary search.
  std::optional<std::size_t> find(const Coord& c) const;
  // First position whose coordinate is >= c.
  std::size_t lower_bound(const Coord& c) const;
  std::size_t lower_bound(const Coord& c, std::size_t from) const;

  const Payload* get_payload(const Coord& c) const;

  // Returns the payload at `c`, inserting `init` first if absent. Keeps
  // coordinates ordered; appending past the last coordinate is O(1).
  Payload& populate(const Coord& c, const Payload& init);

  // Appends an element; `c` must exceed the last coordinate.
  void append(const Coord& c, Payload p);

  void erase(std::size_t i);
  void reserve(std::size_t n) {
    coords_.reserve(n);
    payloads_.reserve(n);
  }

  friend bool operator==(const Fiber& a, const Fiber& b) {
    return a.coords_ == b.coords_ && a.payloads_ == b.payloads_;
  }

 private:
  std::vector<Coord> coords_;
  std::vector<Payload> payloads_;
};

// Row-major dense array, the oracle-side representation of a tensor.
struct Dense {
  std::vector<std::int64_t> shape;
  std::vector<Value> data;

  Dense() = default;
  Dense(std::vector<std::int64_t> s, Value fill);

  std::size_t size() const { return data.size(); }
  std::size_t offset(std::span<const std::int64_t> index) const;
  Value at(std::span<const std::int64_t> index) const { return data[offset(index)]; }
  Value& at(std::span<const std::int64_t> index) { return data[offset(index)]; }
  friend bool operator==(const Dense&, const Dense&) = default;
};

// One nonzero point: coordinates in the tensor's rank order and its value.
struct Point {
  std::vector<Coord> coords;
  Value value = 0;
};

// A named fibertree. Rank 0 of `ranks` is the root level.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::string name, std::vector<std::string> ranks, std::vector<std::int64_t> shape);
  Tensor(std::string name, std::vector<std::string> ranks, std::vector<std::int64_t> shape,
         Fiber root);

  // Builds a tree from points in any order. Duplicate points are an error.
  static Tensor FromPoints(std::string name, std::vector<std::string> ranks,
                           std::vector<std::int64_t> shape, std::vector<Point> points);

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  const std::vector<std::string>& ranks() const { return ranks_; }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::size_t depth() const { return ranks_.size(); }
  std::optional<std::size_t> rank_index(const std::string& rank) const;
  std::int64_t shape_of(const std::string& rank) const;

  const Fiber& root() const { return root_; }
  Fiber& root() { return root_; }
  // Scalar value of a rank-0 tensor.
  Value scalar() const { return scalar_; }
  void set_scalar(Value v) { scalar_ = v; }

  // Points in depth-first (rank-order lexicographic) order.
  std::vector<Point> points() const;
  std::size_t nnz() const;

  // Structural rename of ranks (no data movement).
  void rename_ranks(std::vector<std::string> ranks);

  // Removes elements equal to `zero` and any fiber left empty.
  void compact(Value zero);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.ranks_ == b.ranks_ && a.shape_ == b.shape_ && a.root_ == b.root_ &&
           a.scalar_ == b.scalar_;
  }

 private:
  std::string name_;
  std::vector<std::string> ranks_;
  std::vector<std::int64_t> shape_;
  Fiber root_;
  Value scalar_ = 0;
};

Tensor FromDense(const Dense& data, std::string name, std::vector<std::string> ranks,
                 Value zero = 0);
// Tuple-coordinate ranks are not supported here; undo flattening first.
Dense ToDense(const Tensor& t, Value zero = 0);

std::ostream& operator<<(std::ostream& os, const Fiber& f);
std::ostream& operator<<(std::ostream& os, const Tensor& t);

}  // namespace fibersim
