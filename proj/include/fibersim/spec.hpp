#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fibersim/semiring.hpp"

namespace fibersim {

// ---------------------------------------------------------------- einsum

// One subscript position: a single variable, or the sum of two (q+s).
struct IndexExpr {
  std::vector<std::string> vars;

  bool affine() const { return vars.size() > 1; }
  std::string str() const;
  friend bool operator==(const IndexExpr&, const IndexExpr&) = default;
};

struct Expr {
  enum class Kind { kAccess, kMul, kAdd, kSub, kTake };

  Kind kind = Kind::kAccess;
  std::string tensor;                // kAccess
  std::vector<IndexExpr> indices;    // kAccess
  std::vector<Expr> args;            // operators
  int take_arg = 0;                  // kTake

  std::string str() const;
  friend bool operator==(const Expr&, const Expr&) = default;
};

struct EinsumDecl {
  std::string output;
  std::vector<std::string> output_vars;
  Expr expr;
  int line = 0;

  std::string str() const;
  // Distinct input tensor names in first-appearance order.
  std::vector<std::string> inputs() const;
  // All iteration variables: output variables first, then the rest in
  // first-appearance order.
  std::vector<std::string> variables() const;
  // Variables that appear only inside non-copied `take` operands and not in
  // the output. Loop orders may omit them; such operands are then matched on
  // existence of their remaining subtree.
  std::vector<std::string> existential_vars() const;

  friend bool operator==(const EinsumDecl& a, const EinsumDecl& b) {
    return a.output == b.output && a.output_vars == b.output_vars && a.expr == b.expr;
  }
};

struct TensorDecl {
  std::string name;
  std::vector<std::string> ranks;
  friend bool operator==(const TensorDecl&, const TensorDecl&) = default;
};

// Loop rank name of an iteration variable.
std::string RankOf(const std::string& var);
std::string VarOf(const std::string& rank);

// ---------------------------------------------------------------- mapping

enum class PartitionKind { kUniformShape, kUniformOccupancy, kFlatten };

struct PartitionDirective {
  PartitionKind kind = PartitionKind::kUniformShape;
  std::int64_t size = 0;     // numeric size, or 0 when `symbol` names it
  std::string symbol;        // symbolic size resolved through einsum.shape
  std::string leader;        // kUniformOccupancy

  std::string str() const;
  friend bool operator==(const PartitionDirective&, const PartitionDirective&) = default;
};

struct PartitionEntry {
  std::vector<std::string> ranks;   // one rank, or a tuple for flatten
  std::vector<PartitionDirective> directives;

  std::string key() const;
  friend bool operator==(const PartitionEntry&, const PartitionEntry&) = default;
};

struct SpacetimeDecl {
  std::vector<std::string> space;
  std::vector<std::string> time;
  friend bool operator==(const SpacetimeDecl&, const SpacetimeDecl&) = default;
};

struct MappingDecl {
  std::map<std::string, std::vector<std::string>> rank_order;
  std::map<std::string, std::vector<PartitionEntry>> partitioning;
  std::map<std::string, std::vector<std::string>> loop_order;
  std::map<std::string, SpacetimeDecl> spacetime;
  friend bool operator==(const MappingDecl&, const MappingDecl&) = default;
};

// ---------------------------------------------------------------- format

enum class FormatType { kU, kC, kB };
enum class Layout { kSoA, kAoS };

struct RankFormat {
  FormatType type = FormatType::kC;
  Layout layout = Layout::kSoA;
  std::int64_t cbits = 0;
  std::int64_t pbits = 0;
  std::int64_t fhbits = 0;
  friend bool operator==(const RankFormat&, const RankFormat&) = default;
};

struct FormatConfig {
  std::string name;
  std::vector<std::string> rank_order;
  std::map<std::string, RankFormat> ranks;

  const RankFormat* find(const std::string& rank) const;
  friend bool operator==(const FormatConfig&, const FormatConfig&) = default;
};

// Tensor name -> configurations in listing order.
using FormatDecl = std::map<std::string, std::vector<FormatConfig>>;

// ---------------------------------------------------------------- architecture

enum class ComponentClass { kDram, kBuffer, kIntersection, kMerger, kCompute };

ComponentClass ParseComponentClass(const std::string& text);
std::string ToString(ComponentClass c);

struct Component {
  std::string name;
  ComponentClass cls = ComponentClass::kCompute;
  std::map<std::string, std::string> attributes;

  bool has(const std::string& key) const { return attributes.count(key) != 0; }
  std::string str(const std::string& key, const std::string& fallback = "") const;
  double num(const std::string& key, double fallback = 0) const;
  friend bool operator==(const Component&, const Component&) = default;
};

struct ArchLevel {
  std::string name;
  std::int64_t num = 1;
  std::vector<Component> local;
  std::vector<ArchLevel> subtree;
  friend bool operator==(const ArchLevel&, const ArchLevel&) = default;
};

struct Topology {
  std::string name;
  double clock = 1e9;
  ArchLevel root;
  friend bool operator==(const Topology&, const Topology&) = default;
};

// A component with its position in the topology tree.
struct PlacedComponent {
  const Component* component = nullptr;
  std::string level;
  int depth = 0;               // root level is 0
  std::int64_t instances = 1;  // product of `num` from the root down
};

std::vector<PlacedComponent> PlaceComponents(const Topology& t);

struct ArchDecl {
  std::vector<Topology> topologies;

  const Topology* find(const std::string& name) const;
  friend bool operator==(const ArchDecl&, const ArchDecl&) = default;
};

// ---------------------------------------------------------------- binding

enum class DatumType { kCoord, kPayload, kElem };

DatumType ParseDatumType(const std::string& text);
std::string ToString(DatumType t);

struct StorageBinding {
  std::string tensor;
  std::string config;
  std::string rank;
  DatumType type = DatumType::kElem;
  std::string evict_on;
  friend bool operator==(const StorageBinding&, const StorageBinding&) = default;
};

// Operation serviced by a compute, intersection, or merger component:
// op is one of mul, add, intersect, swizzle.
struct OpBinding {
  std::string op;
  std::string tensor;
  std::string rank;
  friend bool operator==(const OpBinding&, const OpBinding&) = default;
};

struct ComponentBinding {
  std::string component;
  std::vector<StorageBinding> storage;
  std::vector<OpBinding> ops;
  friend bool operator==(const ComponentBinding&, const ComponentBinding&) = default;
};

struct EinsumBinding {
  std::string topology;
  std::vector<ComponentBinding> components;
  friend bool operator==(const EinsumBinding&, const EinsumBinding&) = default;
};

// Einsum output name -> binding.
using BindingDecl = std::map<std::string, EinsumBinding>;

// ---------------------------------------------------------------- problem

struct ProblemSpec {
  std::vector<TensorDecl> declaration;
  std::vector<EinsumDecl> einsums;
  std::map<std::string, std::int64_t> shape;
  MappingDecl mapping;
  FormatDecl format;
  ArchDecl architecture;
  BindingDecl binding;
  Semiring semiring;

  const TensorDecl* tensor(const std::string& name) const;
  const EinsumDecl* einsum(const std::string& output) const;
  // Declared rank order of a tensor after the mapping's rank-order.
  std::vector<std::string> rank_order(const std::string& tensor) const;

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

// Parses the YAML spec document. Optional mapping entries are filled with
// defaults so that the returned spec is complete. Throws SpecError.
ProblemSpec ParseSpec(const std::string& text);
ProblemSpec LoadSpec(const std::string& path);

// Renders a spec in the same concrete syntax; ParseSpec(PrintSpec(s)) == s.
std::string PrintSpec(const ProblemSpec& spec);

// Expression-only parser, exposed for tests and tools.
EinsumDecl ParseEinsum(const std::string& text);

// ---------------------------------------------------------------- validation

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport Validate(const ProblemSpec& spec);

// ---------------------------------------------------------------- cascade

struct CascadeDAG {
  std::vector<std::string> nodes;                  // Einsum outputs, listing order
  std::vector<std::pair<int, int>> edges;          // producer -> consumer
  std::vector<int> topo_order;
  // Per Einsum and input position: index of the producing Einsum, or -1 when
  // the tensor is an external input at that point of the cascade.
  std::vector<std::vector<int>> producers;
};

// Edges connect each input to the latest Einsum listed before the consumer
// that writes that tensor. Throws SpecError on a cycle.
CascadeDAG BuildCascade(const ProblemSpec& spec);

}  // namespace fibersim
