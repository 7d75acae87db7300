#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "fibersim/compiler.hpp"
#include "fibersim/error.hpp"
#include "naive_fusion.hpp"

using namespace fibersim;

namespace {

std::string Fixture(const std::string& name) { return std::string(FIBERSIM_SOURCE_DIR) + "/specs/" + name; }

const char* kFixtures[] = {"outerspace.yaml",    "gamma.yaml",     "extensor.yaml",
                           "sigma.yaml",         "graphicionado.yaml", "graphicionado_sparse.yaml",
                           "conv_direct.yaml",   "conv_toeplitz.yaml"};

const RankUse& Rank(const TensorPlan& p, const std::string& name) {
  for (const auto& r : p.ranks)
    if (r.name == name) return r;
  FAIL("missing rank " << name);
  return p.ranks.front();
}

std::vector<std::string> RankNames(const TensorPlan& p) {
  std::vector<std::string> out;
  for (const auto& r : p.ranks) out.push_back(r.name);
  return out;
}

using V = std::vector<std::string>;

}  // namespace

TEST_CASE("outerspace swizzles T twice online and never A or B") {
  ProblemSpec s = LoadSpec(Fixture("outerspace.yaml"));
  auto nests = CompileCascade(s);
  REQUIRE(nests.size() == 2);

  auto t_sw = nests[0].online_swizzles();
  REQUIRE(t_sw.size() == 1);
  CHECK(t_sw[0]->before == V{"K", "M", "N"});
  CHECK(t_sw[0]->after == V{"M", "K", "N"});
  CHECK(nests[0].output.has_storage_swizzle);

  auto z_sw = nests[1].online_swizzles();
  REQUIRE(z_sw.size() == 1);
  CHECK(z_sw[0]->before == V{"M", "K", "N"});
  CHECK(z_sw[0]->after == V{"M", "N", "K"});

  for (const char* input : {"A", "B"}) {
    const TensorPlan* p = nests[0].operand(input);
    REQUIRE(p);
    CHECK_FALSE(p->intermediate);
    for (const auto& st : p->prelude) CHECK_FALSE(st.online);
  }
  CHECK(RankNames(*nests[0].operand("A")) == V{"K", "M2", "M1", "M0"});
  CHECK(RankNames(*nests[1].operand("T")) == V{"M2", "M1", "M0", "N", "K"});
  CHECK(nests[1].operand("T")->intermediate);
}

TEST_CASE("outerspace loop levels") {
  ProblemSpec s = LoadSpec(Fixture("outerspace.yaml"));
  LoopNest t = Compile(s, 0);
  REQUIRE(t.levels.size() == 5);
  CHECK(t.levels[0].rank.name == "K");
  CHECK(t.levels[0].coiter == CoIterKind::kIntersect);
  CHECK(t.levels[1].rank.upper);
  CHECK(t.levels[2].space);
  CHECK(t.levels[3].space);
  CHECK_FALSE(t.levels[4].space);
  CHECK(t.levels[4].coiter == CoIterKind::kSequential);
  CHECK(t.output.produced == V{"K", "M", "N"});
  CHECK(t.output.write_level == 4);
  CHECK(t.reduction_ranks.empty());

  LoopNest z = Compile(s, 1);
  CHECK(z.reduction_ranks == V{"K"});
  CHECK(z.level_of("K") == 4);
  CHECK(z.output.write_level == 3);
  CHECK_FALSE(z.output.has_storage_swizzle);
}

TEST_CASE("extensor splits every rank twice and keeps inputs offline") {
  ProblemSpec s = LoadSpec(Fixture("extensor.yaml"));
  LoopNest n = Compile(s, 0);
  CHECK(n.levels.size() == 9);
  CHECK(RankNames(*n.operand("A")) == V{"K2", "M2", "M1", "K1", "M0", "K0"});
  CHECK(RankNames(*n.operand("B")) == V{"N2", "K2", "N1", "K1", "N0", "K0"});
  CHECK(n.online_swizzles().empty());
  CHECK(n.levels[static_cast<std::size_t>(n.level_of("K0"))].coiter == CoIterKind::kIntersect);
  CHECK(n.levels[static_cast<std::size_t>(n.level_of("K1"))].space);
  CHECK(n.levels[static_cast<std::size_t>(n.level_of("M0"))].split_size == 8);
  CHECK(n.levels[static_cast<std::size_t>(n.level_of("M1"))].split_size == 0);
}

TEST_CASE("gamma follower without a matching prefix scans a range") {
  ProblemSpec s = LoadSpec(Fixture("gamma.yaml"));
  LoopNest t = Compile(s, 0);
  const TensorPlan* b = t.operand("B");
  REQUIRE(b);
  CHECK(RankNames(*b) == V{"K0", "N"});
  const RankUse& k = Rank(*b, "K0");
  CHECK(k.mode == RankMode::kRange);
  CHECK(k.range_steps == std::vector<int>{1});
  CHECK(k.origin == V{"K"});
  CHECK(t.output.assign);

  LoopNest z = Compile(s, 1);
  const TensorPlan* tp = z.operand("T");
  REQUIRE(tp);
  CHECK(RankNames(*tp) == V{"M1", "M0", "N", "K0"});
  CHECK(Rank(*tp, "M0").mode == RankMode::kIterate);
  auto sw = z.online_swizzles();
  REQUIRE(sw.size() == 1);
  CHECK(sw[0]->before == V{"M1", "M0", "K0", "N"});
  CHECK(sw[0]->after == V{"M1", "M0", "N", "K0"});
  CHECK(BaseOrder({"M", "M", "N", "K"}) == V{"M", "N", "K"});
}

TEST_CASE("sigma flattens T online and looks up B") {
  ProblemSpec s = LoadSpec(Fixture("sigma.yaml"));
  LoopNest t = Compile(s, 0);
  CHECK(Rank(*t.operand("B"), "N").mode == RankMode::kExistential);
  CHECK(t.levels[0].coiter == CoIterKind::kIntersect);

  LoopNest z = Compile(s, 1);
  const TensorPlan* tp = z.operand("T");
  CHECK(RankNames(*tp) == V{"K1", "MK01", "MK00"});
  CHECK(Rank(*tp, "MK00").origin == V{"M", "K"});
  const RankUse& k0 = Rank(*z.operand("B"), "K0");
  CHECK(k0.mode == RankMode::kLookup);
  CHECK(k0.level == z.level_of("MK00"));
  auto sw = z.online_swizzles();
  REQUIRE(sw.size() == 2);
  CHECK(sw[0]->before == V{"K1", "K0", "M"});
  CHECK(sw[0]->after == V{"K1", "M", "K0"});
  CHECK(sw[1] == &z.output.storage_swizzle);
}

TEST_CASE("co-iterator selection") {
  ProblemSpec s = LoadSpec(Fixture("graphicionado.yaml"));
  auto nests = CompileCascade(s);
  CHECK(nests[0].levels[0].coiter == CoIterKind::kIntersect);
  CHECK(nests[2].levels[0].coiter == CoIterKind::kUnion);
  CHECK(nests[3].levels[0].coiter == CoIterKind::kUnion);
  CHECK(nests[4].levels[0].coiter == CoIterKind::kIntersect);
  CHECK(Rank(*nests[2].operand("R"), "V").label == "D");

  ProblemSpec conv = LoadSpec(Fixture("conv_direct.yaml"));
  LoopNest c = Compile(conv, 0);
  CHECK(c.levels[0].coiter == CoIterKind::kDense);
  CHECK(c.levels[1].coiter == CoIterKind::kLookup);
  CHECK(Rank(*c.operand("I"), "(q+s)").mode == RankMode::kLookup);
  CHECK(Rank(*c.operand("I"), "(q+s)").level == 1);
}

TEST_CASE("in-place rewrite is detected") {
  ProblemSpec s = LoadSpec(Fixture("graphicionado_sparse.yaml"));
  auto nests = CompileCascade(s);
  int rewrites = 0;
  for (const auto& n : nests) {
    if (n.output.rewrite) {
      ++rewrites;
      CHECK(n.output.tensor == "P0");
    }
  }
  CHECK(rewrites == 1);
}

TEST_CASE("fusion schedule") {
  CHECK(ScheduleFusion(LoadSpec(Fixture("gamma.yaml"))).blocks.size() == 1);
  auto os = ScheduleFusion(LoadSpec(Fixture("outerspace.yaml")));
  CHECK(os.blocks == std::vector<std::vector<int>>{{0}, {1}});
  CHECK(os.block_of(1) == 1);
  CHECK(ScheduleFusion(LoadSpec(Fixture("extensor.yaml"))).blocks.size() == 1);
  for (const char* f : kFixtures) {
    ProblemSpec s = LoadSpec(Fixture(f));
    CAPTURE(f);
    CHECK(ScheduleFusion(s).blocks == testing::NaiveFusionBlocks(s));
  }
  ProblemSpec os_spec = LoadSpec(Fixture("outerspace.yaml"));
  CHECK(TemporalPrefix(os_spec, os_spec.einsums[0]) == V{"K", "M2"});
  CHECK(ComputeComponents(os_spec, os_spec.einsums[1]) == std::set<std::string>{"Sorter", "ALU"});
}

TEST_CASE("every fixture compiles and renders") {
  for (const char* f : kFixtures) {
    CAPTURE(f);
    ProblemSpec s = LoadSpec(Fixture(f));
    for (const auto& n : CompileCascade(s)) {
      std::string ir = n.str();
      CHECK(ir.find("einsum " + n.decl.output) == 0);
      CHECK(ir == Compile(s, n.einsum).str());
      for (const auto& p : n.operands)
        for (const auto& r : p.ranks)
          if (r.mode != RankMode::kExistential) CHECK(r.level >= 0);
    }
  }
}

TEST_CASE("reading one tensor with two subscripts is rejected") {
  ProblemSpec s = LoadSpec(Fixture("outerspace.yaml"));
  s.einsums[0] = ParseEinsum("T[k, m, n] = A[k, m] * A[k, n]");
  s.einsums[0].output = "T";
  CHECK_THROWS_AS(Compile(s, 0), Error);
}
