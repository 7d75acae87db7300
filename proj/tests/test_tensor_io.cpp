#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fibersim/error.hpp"
#include "fibersim/tensor_io.hpp"
#include "test_util.hpp"

using namespace fibersim;

namespace {

std::string Source(const std::string& rel) { return std::string(FIBERSIM_SOURCE_DIR) + "/" + rel; }

constexpr Value kInf = std::numeric_limits<Value>::infinity();

std::set<std::vector<std::int64_t>> Support(const Tensor& t) {
  std::set<std::vector<std::int64_t>> s;
  for (const auto& p : t.points()) {
    std::vector<std::int64_t> c;
    for (const auto& x : p.coords) c.push_back(x.scalar());
    s.insert(c);
  }
  return s;
}

// Naive 1-D convolution with clipping at the end of the input.
std::vector<Value> Convolve(const std::vector<Value>& in, const std::vector<Value>& f) {
  std::vector<Value> out(in.size(), 0);
  for (std::size_t q = 0; q < in.size(); ++q)
    for (std::size_t s = 0; s < f.size(); ++s)
      if (q + s < in.size()) out[q] += in[q + s] * f[s];
  return out;
}

}  // namespace

TEST_CASE("generator reproduces the cross-language fixture") {
  std::ifstream f(Source("fixtures/generator.txt"));
  REQUIRE(f);
  std::string line;
  int cases = 0;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream in(line);
    std::uint64_t seed;
    std::string shape, density, sum;
    std::size_t nnz;
    in >> seed >> shape >> density >> nnz >> sum;
    GenSpec g = ParseGenSpec("shape=" + shape + ",density=" + density + ",seed=" + std::to_string(seed));
    std::vector<std::string> ranks;
    for (std::size_t i = 0; i < g.shape.size(); ++i) ranks.push_back("R" + std::to_string(i));
    Tensor t = Generate(g, "X", ranks);
    CAPTURE(line);
    CHECK(t.nnz() == nnz);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(Checksum(t)));
    CHECK(std::string(hex) == sum);
    ++cases;
  }
  CHECK(cases >= 8);
}

TEST_CASE("generate") {
  SUBCASE("density 1 gives a full tensor") {
    Tensor t = Generate(ParseGenSpec("shape=4x3,density=1,seed=5"), "A", {"M", "K"});
    CHECK(t.nnz() == 12);
  }
  SUBCASE("tiny density rounds to the target count") {
    CHECK(Generate(ParseGenSpec("shape=3x3,density=0.01,seed=5"), "A", {"M", "K"}).nnz() == 0);
    CHECK(Generate(ParseGenSpec("shape=3x3,density=0.06,seed=5"), "A", {"M", "K"}).nnz() == 1);
  }
  SUBCASE("same seed, same tensor; different seed, different tensor") {
    GenSpec g = ParseGenSpec("shape=16x16,density=0.2,seed=11");
    Tensor a = Generate(g, "A", {"M", "K"}), b = Generate(g, "A", {"M", "K"});
    CHECK(a == b);
    g.seed = 12;
    CHECK(!(Generate(g, "A", {"M", "K"}) == a));
  }
  SUBCASE("exact count across densities") {
    for (double d : {0.01, 0.05, 0.3, 0.77, 1.0}) {
      GenSpec g;
      g.shape = {13, 7};
      g.density = d;
      g.seed = 3;
      CHECK(Generate(g, "A", {"M", "K"}).nnz() == static_cast<std::size_t>(std::llround(d * 91)));
    }
  }
  SUBCASE("values stay in range and are never zero") {
    GenSpec g = ParseGenSpec("shape=10x10,density=0.5,seed=1,values=int:-3:-1");
    for (const auto& p : Generate(g, "A", {"M", "K"}).points()) {
      CHECK(p.value >= -3);
      CHECK(p.value <= -1);
    }
    g.values = GenSpec::Values::kFloat;
    for (const auto& p : Generate(g, "A", {"M", "K"}).points()) {
      CHECK(p.value > 0);
      CHECK(p.value <= 1);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(Generate(ParseGenSpec("shape=2x2,density=1.5"), "A", {"M", "K"}), Error);
    CHECK_THROWS_AS(ParseGenSpec("shape=2x2,colour=red"), Error);
    CHECK_THROWS_AS(Generate(ParseGenSpec("shape=2x2"), "A", {"M"}), Error);
  }
}

TEST_CASE("matrix market loading") {
  SUBCASE("index shift") {
    Tensor t = ParseMatrixMarket("%%MatrixMarket matrix coordinate real general\n% comment\n3 3 2\n1 1 2\n3 2 5\n");
    CHECK(t.shape() == std::vector<std::int64_t>{3, 3});
    CHECK(t.ranks() == std::vector<std::string>{"R", "C"});
    auto pts = t.points();
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].coords[0] == Coord(0));
    CHECK(pts[0].coords[1] == Coord(0));
    CHECK(pts[0].value == 2);
    CHECK(pts[1].coords[0] == Coord(2));
    CHECK(pts[1].coords[1] == Coord(1));
    CHECK(pts[1].value == 5);
  }
  SUBCASE("pattern entries are 1") {
    Tensor t = ParseMatrixMarket("%%MatrixMarket matrix coordinate pattern general\n2 4 3\n1 1\n2 4\n1 3\n");
    for (const auto& p : t.points()) CHECK(p.value == 1);
    CHECK(t.nnz() == 3);
  }
  SUBCASE("symmetric files are mirrored") {
    Tensor t = ParseMatrixMarket(
        "%%MatrixMarket matrix coordinate integer symmetric\n4 4 4\n1 1 3\n2 1 7\n4 2 -1\n3 3 2\n");
    Dense d = ToDense(t);
    CHECK(d == testing::PermuteAxes(d, {1, 0}));
    CHECK(t.nnz() == 6);
  }
  SUBCASE("duplicates are summed") {
    Tensor t = ParseMatrixMarket("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 2 1.5\n1 2 2\n2 1 1\n");
    CHECK(ToDense(t).data == std::vector<Value>{0, 3.5, 1, 0});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ParseMatrixMarket("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n"), Error);
    CHECK_THROWS_AS(ParseMatrixMarket("MatrixMarket matrix coordinate real general\n1 1 0\n"), Error);
    CHECK_THROWS_AS(ParseMatrixMarket("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"), Error);
    CHECK_THROWS_AS(ParseMatrixMarket("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"), Error);
    CHECK_THROWS_AS(LoadMatrixMarket("/nonexistent/file.mtx"), Error);
  }
  SUBCASE("save then load is content identity") {
    auto dir = std::filesystem::temp_directory_path() / "fibersim_mm_test";
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(17);
    for (int i = 0; i < 10; ++i) {
      Tensor t = FromDense(testing::RandomDense(rng, {9, 13}, 0.3), "A", {"R", "C"});
      auto path = (dir / ("m" + std::to_string(i) + ".mtx")).string();
      SaveMatrixMarket(t, path);
      CHECK(LoadMatrixMarket(path, "A") == t);
    }
    Tensor real = Tensor::FromPoints("A", {"R", "C"}, {2, 2}, {Point{{Coord(1), Coord(0)}, 0.1}});
    SaveMatrixMarket(real, (dir / "real.mtx").string());
    CHECK(LoadMatrixMarket((dir / "real.mtx").string(), "A") == real);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("shape inference") {
  ProblemSpec s = LoadSpec(Source("specs/outerspace.yaml"));
  ShapeMap shapes = InferShapes(s, {{"A", {5, 3}}, {"B", {5, 4}}});
  CHECK(shapes.at("T") == std::vector<std::int64_t>{5, 3, 4});
  CHECK(shapes.at("Z") == std::vector<std::int64_t>{3, 4});
  CHECK_THROWS_AS(InferShapes(s, {{"A", {5, 3}}}), Error);

  ProblemSpec conv = LoadSpec(Source("specs/conv_toeplitz.yaml"));
  ShapeMap cs = InferShapes(conv, {{"I", {7}}, {"F", {3}}});
  CHECK(cs.at("T") == std::vector<std::int64_t>{7, 3});
  CHECK(cs.at("O") == std::vector<std::int64_t>{7});
}

TEST_CASE("dense oracle") {
  SUBCASE("matmul of identities") {
    ProblemSpec s = ParseSpec(R"(
einsum:
  declaration: {A: [M, K], B: [K, N], Z: [M, N]}
  expressions: ["Z[m, n] = A[m, k] * B[k, n]"]
)");
    Dense eye({2, 2}, 0);
    eye.data = {1, 0, 0, 1};
    auto out = DenseEinsumOracle(s, {{"A", eye}, {"B", eye}});
    CHECK(out.at("Z") == eye);
  }
  SUBCASE("matvec reduces over k") {
    ProblemSpec s = ParseSpec(R"(
einsum:
  declaration: {A: [M, K], B: [K], Z: [M]}
  expressions: ["Z[m] = A[m, k] * B[k]"]
)");
    Dense a({2, 3}, 0), b({3}, 0);
    a.data = {1, 2, 3, 4, 5, 6};
    b.data = {1, 0, 2};
    CHECK(DenseEinsumOracle(s, {{"A", a}, {"B", b}}).at("Z").data == std::vector<Value>{7, 16});
  }
  SUBCASE("min-plus relaxation on a triangle graph") {
    ProblemSpec s = LoadSpec(Source("specs/graphicionado.yaml"));
    Dense g({3, 3}, kInf);  // G[d, s]
    auto edge = [&](int a, int b, Value w) {
      g.data[a * 3 + b] = w;
      g.data[b * 3 + a] = w;
    };
    edge(0, 1, 4);
    edge(0, 2, 1);
    edge(1, 2, 2);
    Dense a0({3}, kInf), p0({3}, kInf);
    a0.data[0] = 0;
    p0.data[0] = 0;
    auto out = DenseEinsumOracle(s, {{"G", g}, {"A0", a0}, {"P0", p0}});
    // One relaxation from vertex 0: d(1) = 4, d(2) = 1.
    CHECK(out.at("R").data == std::vector<Value>{kInf, 4, 1});
    CHECK(out.at("P1").data == std::vector<Value>{0, 4, 1});
    CHECK(out.at("M").data == std::vector<Value>{kInf, 4, 1});
    CHECK(out.at("A1").data == std::vector<Value>{kInf, 4, 1});
  }
  SUBCASE("bfs on a path graph from vertex 0") {
    for (const char* f : {"specs/graphicionado.yaml", "specs/graphicionado_sparse.yaml"}) {
      CAPTURE(f);
      ProblemSpec s = LoadSpec(Source(f));
      Dense g({4, 4}, kInf);
      for (int v = 0; v + 1 < 4; ++v) g.data[v * 4 + v + 1] = g.data[(v + 1) * 4 + v] = 1;
      Dense a0({4}, kInf), p0({4}, kInf);
      a0.data[0] = 0;
      p0.data[0] = 0;
      auto out = DenseEinsumOracle(s, {{"G", g}, {"A0", a0}, {"P0", p0}});
      CHECK(out.at("A1").data == std::vector<Value>{kInf, 1, kInf, kInf});
      CHECK(out.at("P1").data == std::vector<Value>{0, 1, kInf, kInf});
    }
  }
  SUBCASE("direct convolution example") {
    ProblemSpec s = LoadSpec(Source("specs/conv_direct.yaml"));
    Dense i({3}, 0), f({2}, 0);
    i.data = {1, 2, 3};
    f.data = {1, 1};
    CHECK(DenseEinsumOracle(s, {{"I", i}, {"F", f}}).at("O").data == std::vector<Value>{3, 5, 3});
  }
  SUBCASE("direct and toeplitz convolution agree with a naive loop") {
    ProblemSpec direct = LoadSpec(Source("specs/conv_direct.yaml"));
    ProblemSpec toeplitz = LoadSpec(Source("specs/conv_toeplitz.yaml"));
    std::mt19937_64 rng(8);
    for (int n = 0; n < 20; ++n) {
      std::int64_t w = 3 + n % 10, sz = 1 + n % 4;
      Dense i = testing::RandomDense(rng, {w}, 0.7), f = testing::RandomDense(rng, {sz}, 0.8);
      auto a = DenseEinsumOracle(direct, {{"I", i}, {"F", f}}).at("O");
      auto b = DenseEinsumOracle(toeplitz, {{"I", i}, {"F", f}}).at("O");
      CHECK(a == b);
      CHECK(a.data == Convolve(i.data, f.data));
    }
  }
  SUBCASE("oversize inputs are refused") {
    ProblemSpec s = LoadSpec(Source("specs/conv_direct.yaml"));
    CHECK_THROWS_AS(DenseEinsumOracle(s, {{"I", Dense({33}, 0)}, {"F", Dense({2}, 0)}}), Error);
  }
}

TEST_CASE("generated tensors agree with their dense form") {
  Tensor t = Generate(ParseGenSpec("shape=6x5x4,density=0.3,seed=9"), "X", {"A", "B", "C"});
  CHECK(FromDense(ToDense(t), "X", {"A", "B", "C"}) == t);
  CHECK(Support(t).size() == 36);
}
