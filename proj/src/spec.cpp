#include "fibersim/spec.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "fibersim/error.hpp"

namespace fibersim {

std::string RankOf(const std::string& var) {
  std::string r = var;
  for (auto& ch : r) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return r;
}

std::string VarOf(const std::string& rank) {
  std::string v = rank;
  for (auto& ch : v) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return v;
}

// ---------------------------------------------------------------- printing

std::string IndexExpr::str() const {
  std::string s;
  for (std::size_t i = 0; i < vars.size(); ++i) s += (i ? "+" : "") + vars[i];
  return s;
}

namespace {

int Precedence(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::kAdd:
    case Expr::Kind::kSub: return 1;
    case Expr::Kind::kMul: return 2;
    default: return 3;
  }
}

std::string Wrap(const Expr& e, int min_prec) {
  std::string s = e.str();
  return Precedence(e.kind) < min_prec ? "(" + s + ")" : s;
}

}  // namespace

std::string Expr::str() const {
  switch (kind) {
    case Kind::kAccess: {
      std::string s = tensor;
      if (!indices.empty()) {
        s += "[";
        for (std::size_t i = 0; i < indices.size(); ++i) s += (i ? ", " : "") + indices[i].str();
        s += "]";
      }
      return s;
    }
    case Kind::kTake:
      return "take(" + args[0].str() + ", " + args[1].str() + ", " + std::to_string(take_arg) + ")";
    case Kind::kMul:
      return Wrap(args[0], 2) + " * " + Wrap(args[1], 3);
    case Kind::kAdd:
      return Wrap(args[0], 1) + " + " + Wrap(args[1], 2);
    case Kind::kSub:
      return Wrap(args[0], 1) + " - " + Wrap(args[1], 2);
  }
  return {};
}

std::string EinsumDecl::str() const {
  std::string s = output;
  if (!output_vars.empty()) {
    s += "[";
    for (std::size_t i = 0; i < output_vars.size(); ++i) s += (i ? ", " : "") + output_vars[i];
    s += "]";
  }
  return s + " = " + expr.str();
}

// ---------------------------------------------------------------- queries

namespace {

void CollectInputs(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::kAccess) {
    if (std::find(out.begin(), out.end(), e.tensor) == out.end()) out.push_back(e.tensor);
    return;
  }
  for (const auto& a : e.args) CollectInputs(a, out);
}

void CollectVars(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::kAccess) {
    for (const auto& ix : e.indices)
      for (const auto& v : ix.vars)
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    return;
  }
  for (const auto& a : e.args) CollectVars(a, out);
}

void CollectCopiedVars(const Expr& e, bool copied, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::kAccess) {
    if (copied)
      for (const auto& ix : e.indices) out.insert(ix.vars.begin(), ix.vars.end());
    return;
  }
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    bool c = copied && (e.kind != Expr::Kind::kTake || static_cast<int>(i) == e.take_arg);
    CollectCopiedVars(e.args[i], c, out);
  }
}

}  // namespace

std::vector<std::string> EinsumDecl::inputs() const {
  std::vector<std::string> out;
  CollectInputs(expr, out);
  return out;
}

std::vector<std::string> EinsumDecl::variables() const {
  std::vector<std::string> out = output_vars;
  CollectVars(expr, out);
  return out;
}

std::vector<std::string> EinsumDecl::existential_vars() const {
  std::set<std::string> copied(output_vars.begin(), output_vars.end());
  CollectCopiedVars(expr, true, copied);
  std::vector<std::string> out;
  for (const auto& v : variables())
    if (!copied.count(v)) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------- expression parser

namespace {

class ExprParser {
 public:
  explicit ExprParser(const std::string& text) : s_(text) {}

  EinsumDecl Einsum() {
    EinsumDecl e;
    Skip();
    e.output = Ident("output tensor");
    Skip();
    if (Peek() == '[') {
      ++pos_;
      Skip();
      if (Peek() != ']') {
        for (;;) {
          e.output_vars.push_back(Ident("output variable"));
          Skip();
          if (Peek() == ',') {
            ++pos_;
            continue;
          }
          break;
        }
      }
      Expect(']');
    }
    Expect('=');
    e.expr = Sum();
    Skip();
    if (pos_ != s_.size()) Fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  Expr Sum() {
    Expr lhs = Product();
    for (;;) {
      Skip();
      char c = Peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      Expr node;
      node.kind = c == '+' ? Expr::Kind::kAdd : Expr::Kind::kSub;
      node.args.push_back(std::move(lhs));
      node.args.push_back(Product());
      lhs = std::move(node);
    }
  }

  Expr Product() {
    Expr lhs = Factor();
    for (;;) {
      Skip();
      if (Peek() != '*') return lhs;
      ++pos_;
      Expr node;
      node.kind = Expr::Kind::kMul;
      node.args.push_back(std::move(lhs));
      node.args.push_back(Factor());
      lhs = std::move(node);
    }
  }

  Expr Factor() {
    Skip();
    if (Peek() == '(') {
      ++pos_;
      Expr e = Sum();
      Expect(')');
      return e;
    }
    std::string name = Ident("tensor");
    Skip();
    if (name == "take" && Peek() == '(') {
      ++pos_;
      Expr e;
      e.kind = Expr::Kind::kTake;
      e.args.push_back(Sum());
      Expect(',');
      e.args.push_back(Sum());
      Expect(',');
      Skip();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) Fail("expected take operand index");
      e.take_arg = std::stoi(s_.substr(start, pos_ - start));
      Expect(')');
      return e;
    }
    Expr e;
    e.tensor = name;
    if (Peek() == '[') {
      ++pos_;
      Skip();
      if (Peek() != ']') {
        for (;;) {
          IndexExpr ix;
          ix.vars.push_back(Ident("index variable"));
          Skip();
          while (Peek() == '+') {
            ++pos_;
            ix.vars.push_back(Ident("index variable"));
            Skip();
          }
          if (Peek() == '*') Fail("products of index variables are not supported");
          e.indices.push_back(std::move(ix));
          if (Peek() == ',') {
            ++pos_;
            continue;
          }
          break;
        }
      }
      Expect(']');
    }
    return e;
  }

  std::string Ident(const char* what) {
    Skip();
    std::size_t start = pos_;
    if (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
    }
    if (start == pos_) Fail(std::string("expected ") + what);
    return s_.substr(start, pos_ - start);
  }

  void Expect(char c) {
    Skip();
    if (Peek() != c) Fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void Skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  char Peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  [[noreturn]] void Fail(const std::string& msg) const {
    throw SpecError("in expression '" + s_ + "': " + msg, 0, static_cast<int>(pos_) + 1);
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

EinsumDecl ParseEinsum(const std::string& text) { return ExprParser(text).Einsum(); }

// ---------------------------------------------------------------- mapping

std::string PartitionDirective::str() const {
  switch (kind) {
    case PartitionKind::kFlatten: return "flatten()";
    case PartitionKind::kUniformShape:
      return "uniform_shape(" + (symbol.empty() ? std::to_string(size) : symbol) + ")";
    case PartitionKind::kUniformOccupancy:
      return "uniform_occupancy(" + leader + "." + (symbol.empty() ? std::to_string(size) : symbol) + ")";
  }
  return {};
}

std::string PartitionEntry::key() const {
  if (ranks.size() == 1) return ranks[0];
  std::string s = "(";
  for (std::size_t i = 0; i < ranks.size(); ++i) s += (i ? ", " : "") + ranks[i];
  return s + ")";
}

// ---------------------------------------------------------------- format

const RankFormat* FormatConfig::find(const std::string& rank) const {
  auto it = ranks.find(rank);
  return it == ranks.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------- architecture

ComponentClass ParseComponentClass(const std::string& text) {
  if (text == "DRAM") return ComponentClass::kDram;
  if (text == "Buffer") return ComponentClass::kBuffer;
  if (text == "Intersection" || text == "Intersector") return ComponentClass::kIntersection;
  if (text == "Merger") return ComponentClass::kMerger;
  if (text == "Compute") return ComponentClass::kCompute;
  throw SpecError("unknown component class '" + text + "'");
}

std::string ToString(ComponentClass c) {
  switch (c) {
    case ComponentClass::kDram: return "DRAM";
    case ComponentClass::kBuffer: return "Buffer";
    case ComponentClass::kIntersection: return "Intersection";
    case ComponentClass::kMerger: return "Merger";
    case ComponentClass::kCompute: return "Compute";
  }
  return "?";
}

std::string Component::str(const std::string& key, const std::string& fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second;
}

double Component::num(const std::string& key, double fallback) const {
  auto it = attributes.find(key);
  if (it == attributes.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw SpecError("component " + name + ": attribute " + key + " is not a number: '" + it->second + "'");
}

namespace {

void Place(const ArchLevel& level, int depth, std::int64_t instances,
           std::vector<PlacedComponent>& out) {
  instances *= level.num;
  for (const auto& c : level.local) out.push_back({&c, level.name, depth, instances});
  for (const auto& sub : level.subtree) Place(sub, depth + 1, instances, out);
}

}  // namespace

std::vector<PlacedComponent> PlaceComponents(const Topology& t) {
  std::vector<PlacedComponent> out;
  Place(t.root, 0, 1, out);
  return out;
}

const Topology* ArchDecl::find(const std::string& name) const {
  for (const auto& t : topologies)
    if (t.name == name) return &t;
  return nullptr;
}

// ---------------------------------------------------------------- binding

DatumType ParseDatumType(const std::string& text) {
  if (text == "coord") return DatumType::kCoord;
  if (text == "payload") return DatumType::kPayload;
  if (text == "elem") return DatumType::kElem;
  throw SpecError("unknown binding type '" + text + "'");
}

std::string ToString(DatumType t) {
  switch (t) {
    case DatumType::kCoord: return "coord";
    case DatumType::kPayload: return "payload";
    case DatumType::kElem: return "elem";
  }
  return "?";
}

// ---------------------------------------------------------------- problem

const TensorDecl* ProblemSpec::tensor(const std::string& name) const {
  for (const auto& t : declaration)
    if (t.name == name) return &t;
  return nullptr;
}

const EinsumDecl* ProblemSpec::einsum(const std::string& output) const {
  for (const auto& e : einsums)
    if (e.output == output) return &e;
  return nullptr;
}

std::vector<std::string> ProblemSpec::rank_order(const std::string& name) const {
  auto it = mapping.rank_order.find(name);
  if (it != mapping.rank_order.end()) return it->second;
  const TensorDecl* t = tensor(name);
  return t ? t->ranks : std::vector<std::string>{};
}

}  // namespace fibersim
