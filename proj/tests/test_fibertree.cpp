#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "fibersim/error.hpp"
#include "fibersim/transforms.hpp"
#include "test_util.hpp"

using namespace fibersim;
using fibersim::testing::CoordSet;
using fibersim::testing::PermuteAxes;
using fibersim::testing::RandomDense;
using fibersim::testing::RandomFiber;

namespace {

Fiber Leaf(std::initializer_list<std::int64_t> coords) {
  Fiber f;
  for (auto c : coords) f.append(c, Payload(Value(c * 10 + 1)));
  return f;
}

Tensor Vector(std::initializer_list<std::int64_t> coords, std::int64_t shape) {
  return Tensor("V", {"K"}, {shape}, Leaf(coords));
}

std::vector<std::int64_t> Coords(const Fiber& f) {
  std::vector<std::int64_t> out;
  for (const auto& c : f.coords()) out.push_back(c.scalar());
  return out;
}

}  // namespace

TEST_CASE("from_dense omits zeros and empty fibers") {
  Dense d({2, 2}, 0);
  d.data = {1, 0, 0, 2};
  Tensor t = FromDense(d, "A", {"M", "K"});
  REQUIRE(t.root().size() == 2);
  CHECK(Coords(t.root().payload(0).fiber()) == std::vector<std::int64_t>{0});
  CHECK(t.root().payload(0).fiber().payload(0).value() == 1);
  CHECK(Coords(t.root().payload(1).fiber()) == std::vector<std::int64_t>{1});
  CHECK(t.root().payload(1).fiber().payload(0).value() == 2);

  CHECK(FromDense(Dense({3, 3}, 0), "Z", {"M", "K"}).root().empty());

  Dense row({1, 2}, 0);
  row.data = {0, 5};
  Tensor r = FromDense(row, "A", {"M", "K"});
  REQUIRE(r.root().size() == 1);
  CHECK(r.root().coord(0) == Coord(0));
  CHECK(Coords(r.root().payload(0).fiber()) == std::vector<std::int64_t>{1});

  Dense bad({2, 2}, 0);
  bad.data.pop_back();
  CHECK_THROWS_AS(FromDense(bad, "A", {"M", "K"}), Error);
}

TEST_CASE("to_dense") {
  Tensor empty("E", {"M", "K"}, {2, 2});
  CHECK(ToDense(empty).data == std::vector<Value>{0, 0, 0, 0});

  Fiber f;
  f.append(3, Payload(7.0));
  Tensor v("V", {"K"}, {5}, f);
  CHECK(ToDense(v).data == std::vector<Value>{0, 0, 0, 7, 0});

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Dense d = RandomDense(rng, {8, 8}, 0.25);
    CHECK(ToDense(FromDense(d, "A", {"M", "K"})) == d);
  }
}

TEST_CASE("get_payload") {
  Fiber f;
  f.append(1, Payload(Value(100)));
  f.append(3, Payload(Value(300)));
  REQUIRE(f.get_payload(3) != nullptr);
  CHECK(f.get_payload(3)->value() == 300);
  CHECK(f.get_payload(2) == nullptr);
  CHECK(Fiber().get_payload(0) == nullptr);
}

TEST_CASE("intersect and union") {
  Fiber a = Leaf({1, 3, 5}), b = Leaf({3, 4, 5});
  std::vector<std::int64_t> got;
  for (const auto& e : Intersect(a, b)) got.push_back(e.coord.scalar());
  CHECK(got == std::vector<std::int64_t>{3, 5});
  CHECK(Intersect(a, Fiber()).empty());

  got.clear();
  Fiber c = Leaf({1, 3}), d = Leaf({3, 4});
  auto u = Union(c, d);
  for (const auto& e : u) got.push_back(e.coord.scalar());
  CHECK(got == std::vector<std::int64_t>{1, 3, 4});
  CHECK(PayloadOr(u[0].b, -1) == -1);
  CHECK(PayloadOr(u[1].b, -1) == 31);

  got.clear();
  for (const auto& e : Union(Fiber(), b)) got.push_back(e.coord.scalar());
  CHECK(got == std::vector<std::int64_t>{3, 4, 5});
}

TEST_CASE("intersect/union agree with set operations") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Fiber a = RandomFiber(rng, 32, 0.3), b = RandomFiber(rng, 32, 0.5);
    auto sa = CoordSet(a), sb = CoordSet(b);
    std::set<std::int64_t> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(inter, inter.end()));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(uni, uni.end()));
    std::vector<std::int64_t> gi, gu;
    for (const auto& e : Intersect(a, b)) gi.push_back(e.coord.scalar());
    for (const auto& e : Union(a, b)) gu.push_back(e.coord.scalar());
    CHECK(gi == std::vector<std::int64_t>(inter.begin(), inter.end()));
    CHECK(gu == std::vector<std::int64_t>(uni.begin(), uni.end()));
    CHECK(std::includes(uni.begin(), uni.end(), inter.begin(), inter.end()));
  }
}

TEST_CASE("populate keeps order and existing payloads") {
  Fiber f;
  f.populate(4, Payload(Value(0))).value() = 9;
  CHECK(f.size() == 1);
  CHECK(f.populate(4, Payload(Value(0))).value() == 9);
  CHECK(f.size() == 1);

  Fiber g;
  for (std::int64_t c : {5, 2, 9}) g.populate(c, Payload(Value(c)));
  CHECK(Coords(g) == std::vector<std::int64_t>{2, 5, 9});
}

TEST_CASE("swizzle matches dense axis permutation") {
  Dense d({2, 2}, 0);
  d.data = {1, 2, 0, 3};
  Tensor t = FromDense(d, "A", {"M", "K"});
  Tensor s = Swizzle(t, {"K", "M"});
  CHECK(s.ranks() == std::vector<std::string>{"K", "M"});
  CHECK(ToDense(s) == PermuteAxes(d, {1, 0}));
  CHECK(Swizzle(t, {"M", "K"}) == t);
  CHECK_THROWS_AS(Swizzle(t, {"M", "M"}), Error);
  CHECK_THROWS_AS(Swizzle(t, {"M"}), Error);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    Dense x = RandomDense(rng, {4, 5, 6}, 0.3);
    Tensor xt = FromDense(x, "X", {"M", "K", "N"});
    CHECK(ToDense(Swizzle(xt, {"M", "N", "K"})) == PermuteAxes(x, {0, 2, 1}));
    CHECK(ToDense(Swizzle(xt, {"N", "M", "K"})) == PermuteAxes(x, {2, 0, 1}));
  }
}

TEST_CASE("uniform shape partitioning") {
  Tensor v = Vector({0, 2, 4, 5}, 8);
  Tensor p = PartitionUniformShape(v, "K", 4);
  CHECK(p.ranks() == std::vector<std::string>{"K1", "K0"});
  REQUIRE(p.root().size() == 2);
  CHECK(p.root().coord(0) == Coord(0));
  CHECK(Coords(p.root().payload(0).fiber()) == std::vector<std::int64_t>{0, 2});
  CHECK(p.root().coord(1) == Coord(4));
  CHECK(Coords(p.root().payload(1).fiber()) == std::vector<std::int64_t>{4, 5});

  Tensor whole = PartitionUniformShape(v, "K", 8);
  REQUIRE(whole.root().size() == 1);
  CHECK(whole.root().payload(0).fiber() == v.root());

  CHECK_THROWS_AS(PartitionUniformShape(v, "Q", 4), Error);
}

// Enumerate-and-chunk oracle for a single fiber.
static std::vector<std::pair<std::int64_t, std::vector<std::int64_t>>> ChunkOracle(
    const std::vector<std::int64_t>& coords, std::size_t size) {
  std::vector<std::pair<std::int64_t, std::vector<std::int64_t>>> out;
  for (std::size_t i = 0; i < coords.size(); i += size) {
    std::vector<std::int64_t> chunk(coords.begin() + static_cast<std::ptrdiff_t>(i),
                                    coords.begin() + static_cast<std::ptrdiff_t>(std::min(i + size, coords.size())));
    out.emplace_back(chunk.front(), chunk);
  }
  return out;
}

TEST_CASE("uniform occupancy partitioning with a follower") {
  Tensor leader = Vector({1, 3, 4, 7, 8}, 10);
  Tensor follower("F", {"K"}, {10}, Leaf({2, 5, 9}));
  auto parts = PartitionUniformOccupancy(leader, std::span(&follower, 1), "K", 2);

  auto expect = ChunkOracle({1, 3, 4, 7, 8}, 2);
  const Fiber& up = parts.leader.root();
  REQUIRE(up.size() == expect.size());
  for (std::size_t i = 0; i < up.size(); ++i) {
    CHECK(up.coord(i) == Coord(expect[i].first));
    CHECK(Coords(up.payload(i).fiber()) == expect[i].second);
  }

  // Range-filter oracle: follower coordinate c goes to the last boundary <= c.
  const Fiber& fup = parts.followers[0].root();
  std::map<std::int64_t, std::vector<std::int64_t>> want;
  for (std::int64_t c : {2, 5, 9}) {
    std::int64_t label = expect.front().first;
    for (const auto& [start, chunk] : expect)
      if (start <= c) label = start;
    want[label].push_back(c);
  }
  REQUIRE(fup.size() == want.size());
  std::size_t i = 0;
  for (const auto& [label, coords] : want) {
    CHECK(fup.coord(i) == Coord(label));
    CHECK(Coords(fup.payload(i).fiber()) == coords);
    ++i;
  }

  auto one = PartitionUniformOccupancy(leader, {}, "K", 16);
  REQUIRE(one.leader.root().size() == 1);
  CHECK(one.leader.root().payload(0).fiber() == leader.root());

  CHECK_THROWS_AS(PartitionUniformOccupancy(leader, {}, "K", 0), Error);
}

TEST_CASE("occupancy follower below the first boundary joins the first chunk") {
  Tensor leader = Vector({3, 6}, 10);
  Tensor follower("F", {"K"}, {10}, Leaf({0, 4, 7}));
  auto parts = PartitionUniformOccupancy(leader, std::span(&follower, 1), "K", 1);
  const Fiber& fup = parts.followers[0].root();
  REQUIRE(fup.size() == 2);
  CHECK(fup.coord(0) == Coord(3));
  CHECK(Coords(fup.payload(0).fiber()) == std::vector<std::int64_t>{0, 4});
  CHECK(Coords(fup.payload(1).fiber()) == std::vector<std::int64_t>{7});
}

TEST_CASE("occupancy partitioning is per leader fiber") {
  Dense a({2, 6}, 0);
  a.data = {1, 1, 1, 0, 0, 0,  //
            0, 0, 1, 1, 1, 1};
  Tensor leader = FromDense(a, "A", {"M", "K"});
  Dense b({2, 6, 2}, 1);
  Tensor follower = FromDense(b, "T", {"M", "K", "N"});
  auto parts = PartitionUniformOccupancy(leader, std::span(&follower, 1), "K", 2);
  // Row 0 boundaries {0, 2}; row 1 boundaries {2, 4}.
  const Fiber& row1 = parts.followers[0].root().payload(1).fiber();
  REQUIRE(row1.size() == 2);
  CHECK(row1.coord(0) == Coord(2));
  CHECK(Coords(row1.payload(0).fiber()) == std::vector<std::int64_t>{0, 1, 2, 3});
  CHECK(row1.coord(1) == Coord(4));

  Tensor lacks("B", {"K", "N"}, {6, 2});
  CHECK_FALSE(CanFollow(leader, lacks, "K"));
  CHECK_THROWS_AS(PartitionUniformOccupancy(leader, std::span(&lacks, 1), "K", 2), Error);
}

TEST_CASE("flatten") {
  Fiber m;
  m.append(0, Payload(Leaf({0, 2})));
  m.append(2, Payload(Leaf({1})));
  Tensor t("A", {"M", "K"}, {3, 3}, m);
  Tensor f = Flatten(t, {"M", "K"});
  CHECK(f.ranks() == std::vector<std::string>{"MK"});
  REQUIRE(f.root().size() == 3);
  CHECK(f.root().coord(0) == Coord({0, 0}));
  CHECK(f.root().coord(1) == Coord({0, 2}));
  CHECK(f.root().coord(2) == Coord({2, 1}));

  Fiber single;
  single.append(1, Payload(Leaf({2})));
  Tensor one = Flatten(Tensor("S", {"M", "K"}, {3, 3}, single), {"M", "K"});
  REQUIRE(one.root().size() == 1);
  CHECK(one.root().coord(0) == Coord({1, 2}));

  Tensor three("X", {"M", "K", "N"}, {2, 2, 2});
  CHECK_THROWS_AS(Flatten(three, {"M", "N"}), Error);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor x = FromDense(RandomDense(rng, {6, 7}, 0.3), "X", {"M", "K"});
    CHECK(Flatten(x, {"M", "K"}).root().size() == x.nnz());
  }
}

TEST_CASE("coordinates stay strictly increasing through transforms") {
  std::mt19937_64 rng(19);
  auto increasing = [](const Fiber& f, auto&& self) -> bool {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i && !(f.coord(i - 1) < f.coord(i))) return false;
      if (f.payload(i).is_fiber() && !self(f.payload(i).fiber(), self)) return false;
    }
    return true;
  };
  for (int trial = 0; trial < 40; ++trial) {
    Tensor x = FromDense(RandomDense(rng, {8, 8, 4}, 0.2), "X", {"M", "K", "N"});
    Tensor p = PartitionUniformShape(Swizzle(x, {"K", "M", "N"}), "M", 3);
    Tensor q = PartitionUniformOccupancy(Flatten(p, {"M0", "N"}), {}, "M0N", 2).leader;
    CHECK(increasing(p.root(), increasing));
    CHECK(increasing(q.root(), increasing));
  }
}
