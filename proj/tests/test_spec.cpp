#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fibersim/error.hpp"
#include "fibersim/iteration_space.hpp"
#include "fibersim/spec.hpp"

using namespace fibersim;

namespace {

std::string Fixture(const std::string& name) { return std::string(FIBERSIM_SOURCE_DIR) + "/specs/" + name; }

const char* kFixtures[] = {"outerspace.yaml",    "gamma.yaml",     "extensor.yaml",
                           "sigma.yaml",         "graphicionado.yaml", "graphicionado_sparse.yaml",
                           "conv_direct.yaml",   "conv_toeplitz.yaml"};

bool HasViolation(const ValidationReport& r, const std::string& needle) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

std::vector<std::string> Names(const IterationSpace& s) {
  std::vector<std::string> out;
  for (const auto& r : s.ranks) out.push_back(r.name);
  return out;
}

}  // namespace

TEST_CASE("outerspace parses into two einsums with hierarchical occupancy splits") {
  ProblemSpec s = LoadSpec(Fixture("outerspace.yaml"));
  REQUIRE(s.einsums.size() == 2);
  CHECK(s.einsums[0].output == "T");
  CHECK(s.einsums[1].output == "Z");
  const auto& part = s.mapping.partitioning.at("T");
  REQUIRE(part.size() == 1);
  CHECK(part[0].ranks == std::vector<std::string>{"M"});
  REQUIRE(part[0].directives.size() == 2);
  CHECK(part[0].directives[0].kind == PartitionKind::kUniformOccupancy);
  CHECK(part[0].directives[0].leader == "A");
  CHECK(part[0].directives[0].size == 256);
  CHECK(part[0].directives[1].size == 16);
  CHECK(s.mapping.spacetime.at("T").space == std::vector<std::string>{"M1", "M0"});
  CHECK(s.mapping.rank_order.at("T") == std::vector<std::string>{"M", "K", "N"});
}

TEST_CASE("minimal spec gets default mapping") {
  ProblemSpec s = ParseSpec(R"(
einsum:
  declaration:
    A: [M]
    Z: [M]
  expressions:
    - Z[m] = A[m]
)");
  CHECK(s.mapping.loop_order.at("Z") == std::vector<std::string>{"M"});
  CHECK(s.mapping.spacetime.at("Z").space.empty());
  CHECK(s.mapping.spacetime.at("Z").time == std::vector<std::string>{"M"});
  CHECK(s.mapping.rank_order.at("A") == std::vector<std::string>{"M"});
  CHECK(Validate(s).ok());
}

TEST_CASE("default loop order puts output ranks first then the rest alphabetically") {
  ProblemSpec s = ParseSpec(R"(
einsum:
  declaration:
    A: [M, K, J]
    Z: [M]
  expressions:
    - Z[m] = A[m, k, j]
mapping:
  partitioning:
    Z:
      K: [uniform_shape(4)]
)");
  CHECK(s.mapping.loop_order.at("Z") == std::vector<std::string>{"M", "J", "K1", "K0"});
}

TEST_CASE("sigma parses flatten tuple and occupancy on flattened rank") {
  ProblemSpec s = LoadSpec(Fixture("sigma.yaml"));
  const auto& part = s.mapping.partitioning.at("Z");
  REQUIRE(part.size() == 3);
  CHECK(part[1].ranks == std::vector<std::string>{"M", "K0"});
  CHECK(part[1].directives[0].kind == PartitionKind::kFlatten);
  CHECK(part[2].ranks == std::vector<std::string>{"MK0"});
  CHECK(part[2].directives[0].leader == "T");
  CHECK(part[2].directives[0].size == 16384);

  IterationSpace z = PlanIterationSpace(s, s.einsums[1]);
  auto names = Names(z);
  std::set<std::string> got(names.begin(), names.end());
  CHECK(got == std::set<std::string>{"K1", "MK01", "MK00", "N"});
  CHECK(z.find("MK00")->vars == std::vector<std::string>{"m", "k"});
  CHECK(z.find("MK01")->upper);
  CHECK(z.value_rank("k")->name == "MK00");
  CHECK(s.einsums[0].existential_vars() == std::vector<std::string>{"n"});
}

TEST_CASE("extensor iteration space has three pieces per rank") {
  ProblemSpec s = LoadSpec(Fixture("extensor.yaml"));
  auto names = Names(PlanIterationSpace(s, s.einsums[0]));
  std::set<std::string> got(names.begin(), names.end());
  CHECK(got == std::set<std::string>{"N2", "K2", "M2", "M1", "N1", "K1", "M0", "N0", "K0"});
  IterationSpace space = PlanIterationSpace(s, s.einsums[0]);
  CHECK(space.steps[0].size == 64);
  CHECK(space.steps[1].size == 8);
}

TEST_CASE("no partitioning gives identity plan") {
  ProblemSpec s = LoadSpec(Fixture("conv_direct.yaml"));
  IterationSpace space = PlanIterationSpace(s, s.einsums[0]);
  CHECK(space.steps.empty());
  CHECK(Names(space) == std::vector<std::string>{"Q", "S"});
}

TEST_CASE("all fixtures validate cleanly and round-trip through the printer") {
  for (const char* f : kFixtures) {
    CAPTURE(f);
    ProblemSpec s = LoadSpec(Fixture(f));
    ValidationReport r = Validate(s);
    for (const auto& v : r.violations) MESSAGE(v);
    CHECK(r.ok());
    std::string printed = PrintSpec(s);
    ProblemSpec again = ParseSpec(printed);
    CHECK(again == s);
    CHECK(PrintSpec(again) == printed);
  }
}

TEST_CASE("unscheduled rank is a violation") {
  ProblemSpec s = ParseSpec(R"(
einsum:
  declaration:
    A: [K, M]
    B: [K, N]
    Z: [M, N]
  expressions:
    - Z[m, n] = A[k, m] * B[k, n]
mapping:
  loop-order:
    Z: [M, N, K]
  spacetime:
    Z:
      space: [M]
      time: [K]
)");
  ValidationReport r = Validate(s);
  CHECK(HasViolation(r, "rank N unscheduled"));
}

TEST_CASE("buffet binding without evict-on is a violation naming the component") {
  ProblemSpec s = LoadSpec(Fixture("outerspace.yaml"));
  auto& comps = s.binding.at("Z").components;
  auto it = std::find_if(comps.begin(), comps.end(), [](const ComponentBinding& c) { return c.component == "L0"; });
  REQUIRE(it != comps.end());
  it->storage[0].evict_on.clear();
  ValidationReport r = Validate(s);
  CHECK(HasViolation(r, "component L0: buffet binding of T lacks evict-on"));
}

TEST_CASE("other constructed violations") {
  ProblemSpec base = LoadSpec(Fixture("gamma.yaml"));
  SUBCASE("loop order not matching partitioned ranks") {
    ProblemSpec s = base;
    s.mapping.loop_order["T"] = {"M", "K", "N"};
    ValidationReport r = Validate(s);
    CHECK(HasViolation(r, "names M, which is not an iteration rank"));
    CHECK(HasViolation(r, "missing rank M1"));
  }
  SUBCASE("leader that is not an input") {
    ProblemSpec s = base;
    s.mapping.partitioning["T"][0].directives[0].leader = "Z";
    CHECK(HasViolation(Validate(s), "leader Z is not an input"));
  }
  SUBCASE("unknown topology") {
    ProblemSpec s = base;
    s.binding["T"].topology = "Nope";
    CHECK(HasViolation(Validate(s), "unknown topology Nope"));
  }
  SUBCASE("format rank without entry") {
    ProblemSpec s = base;
    s.format["A"][0].ranks.erase("K");
    CHECK(HasViolation(Validate(s), "format A.CSR: rank K has no entry"));
  }
  SUBCASE("duplicate component names") {
    ProblemSpec s = base;
    auto& pe = s.architecture.topologies[0].root.subtree[0].subtree[0];
    pe.local.push_back(pe.local[0]);
    CHECK(HasViolation(Validate(s), "component name Intersect is not unique"));
  }
  SUBCASE("non-positive cache depth") {
    ProblemSpec s = base;
    s.architecture.topologies[0].root.subtree[0].local[0].attributes["depth"] = "0";
    CHECK(HasViolation(Validate(s), "depth must be positive"));
  }
}

TEST_CASE("take may not reduce over its copied operand") {
  ProblemSpec s = ParseSpec(R"y(
einsum:
  declaration: {A: [M, K], B: [K], Z: [M]}
  expressions: ["Z[m] = take(A[m, k], B[k], 0)"]
)y");
  CHECK(HasViolation(Validate(s), "take reduces over variable k of the copied operand"));
}

TEST_CASE("parse errors carry position and reason") {
  SUBCASE("yaml syntax") {
    try {
      ParseSpec("einsum:\n  declaration: [\n");
      FAIL("expected SpecError");
    } catch (const SpecError& e) {
      CHECK(e.line() > 0);
    }
  }
  SUBCASE("unknown directive") {
    try {
      ParseSpec(R"(
einsum:
  declaration: {A: [M], Z: [M]}
  expressions: ["Z[m] = A[m]"]
mapping:
  partitioning:
    Z:
      M: [uniform_tiles(4)]
)");
      FAIL("expected SpecError");
    } catch (const SpecError& e) {
      CHECK(std::string(e.what()).find("unknown directive 'uniform_tiles'") != std::string::npos);
      CHECK(e.line() == 8);
    }
  }
  SUBCASE("undeclared tensor") {
    CHECK_THROWS_WITH_AS(ParseSpec(R"(
einsum:
  declaration: {Z: [M]}
  expressions: ["Z[m] = Q[m]"]
)"),
                         doctest::Contains("undeclared tensor Q"), SpecError);
  }
  SUBCASE("partition of a rank absent at that stage") {
    CHECK_THROWS_WITH_AS(ParseSpec(R"(
einsum:
  declaration: {A: [M], Z: [M]}
  expressions: ["Z[m] = A[m]"]
mapping:
  partitioning:
    Z:
      K: [uniform_shape(4)]
)"),
                         doctest::Contains("rank K is absent"), SpecError);
  }
  SUBCASE("product of index variables") {
    CHECK_THROWS_AS(ParseEinsum("O[q] = I[q*s]"), SpecError);
  }
}

TEST_CASE("expression parser") {
  EinsumDecl e = ParseEinsum("T[k,m,n] = take(A[k,m], B[k,n], 1)");
  CHECK(e.output == "T");
  CHECK(e.expr.kind == Expr::Kind::kTake);
  CHECK(e.expr.take_arg == 1);
  CHECK(e.inputs() == std::vector<std::string>{"A", "B"});

  EinsumDecl c = ParseEinsum("O[q] = I[q+s] * F[s]");
  CHECK(c.expr.args[0].indices[0].vars == std::vector<std::string>{"q", "s"});
  CHECK(c.variables() == std::vector<std::string>{"q", "s"});

  EinsumDecl p = ParseEinsum("X[i] = (A[i] + B[i]) * C[i] - D[i]");
  CHECK(p.expr.kind == Expr::Kind::kSub);
  CHECK(p.expr.args[0].kind == Expr::Kind::kMul);
  CHECK(ParseEinsum(p.str()) == p);
}

TEST_CASE("build_cascade") {
  SUBCASE("outerspace edge T->Z") {
    CascadeDAG d = BuildCascade(LoadSpec(Fixture("outerspace.yaml")));
    CHECK(d.edges == std::vector<std::pair<int, int>>{{0, 1}});
    CHECK(d.topo_order == std::vector<int>{0, 1});
  }
  SUBCASE("graphicionado chain with external P0") {
    ProblemSpec s = LoadSpec(Fixture("graphicionado.yaml"));
    CascadeDAG d = BuildCascade(s);
    CHECK(d.nodes == std::vector<std::string>{"SO", "R", "P1", "M", "A1"});
    std::set<std::pair<int, int>> e(d.edges.begin(), d.edges.end());
    CHECK(e == std::set<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {2, 4}, {3, 4}});
    // P1 reads P0 (input 1) from outside the cascade.
    CHECK(d.producers[2] == std::vector<int>{1, -1});
  }
  SUBCASE("single einsum") {
    CascadeDAG d = BuildCascade(LoadSpec(Fixture("conv_direct.yaml")));
    CHECK(d.nodes.size() == 1);
    CHECK(d.edges.empty());
  }
  SUBCASE("edges equal producer/consumer pairs on every fixture") {
    for (const char* f : kFixtures) {
      CAPTURE(f);
      ProblemSpec s = LoadSpec(Fixture(f));
      CascadeDAG d = BuildCascade(s);
      std::set<std::pair<int, int>> expect;
      for (std::size_t j = 0; j < s.einsums.size(); ++j)
        for (const auto& in : s.einsums[j].inputs()) {
          int latest = -1;
          for (std::size_t i = 0; i < j; ++i)
            if (s.einsums[i].output == in) latest = static_cast<int>(i);
          if (latest >= 0) expect.insert({latest, static_cast<int>(j)});
        }
      CHECK(std::set<std::pair<int, int>>(d.edges.begin(), d.edges.end()) == expect);
      CHECK(d.topo_order.size() == s.einsums.size());
    }
  }
}

TEST_CASE("semiring operators") {
  Semiring arith;
  CHECK(arith.zero() == 0);
  CHECK(arith.Mul(3, 4) == 12);
  CHECK(arith.Sub(3, 5) == -2);

  Semiring minplus{ScalarOp::kMin, ScalarOp::kPlus};
  CHECK(std::isinf(minplus.zero()));
  CHECK(minplus.Add(3, 5) == 3);
  CHECK(minplus.Mul(3, 5) == 8);
  CHECK(std::isinf(minplus.Mul(minplus.zero(), 5)));
  CHECK(minplus.Sub(2, 2) == minplus.zero());
  CHECK(minplus.Sub(1, 2) == 1);
  CHECK(minplus.Add(minplus.zero(), 7) == 7);

  ProblemSpec s = LoadSpec(Fixture("graphicionado.yaml"));
  CHECK(s.semiring == minplus);
}
