#include "fibersim/semiring.hpp"

#include <algorithm>
#include <limits>

#include "fibersim/error.hpp"

namespace fibersim {

ScalarOp ParseScalarOp(const std::string& text) {
  if (text == "+" || text == "plus" || text == "add") return ScalarOp::kPlus;
  if (text == "*" || text == "times" || text == "mul" || text == "·") return ScalarOp::kTimes;
  if (text == "min") return ScalarOp::kMin;
  if (text == "max") return ScalarOp::kMax;
  if (text == "or" || text == "logical-or") return ScalarOp::kOr;
  if (text == "and" || text == "logical-and") return ScalarOp::kAnd;
  throw SpecError("unknown operator '" + text + "'");
}

std::string ToString(ScalarOp op) {
  switch (op) {
    case ScalarOp::kPlus: return "plus";
    case ScalarOp::kTimes: return "times";
    case ScalarOp::kMin: return "min";
    case ScalarOp::kMax: return "max";
    case ScalarOp::kOr: return "or";
    case ScalarOp::kAnd: return "and";
  }
  return "?";
}

namespace {

Value Apply(ScalarOp op, Value a, Value b) {
  switch (op) {
    case ScalarOp::kPlus: return a + b;
    case ScalarOp::kTimes: return a * b;
    case ScalarOp::kMin: return std::min(a, b);
    case ScalarOp::kMax: return std::max(a, b);
    case ScalarOp::kOr: return (a != 0 || b != 0) ? 1 : 0;
    case ScalarOp::kAnd: return (a != 0 && b != 0) ? 1 : 0;
  }
  return 0;
}

}  // namespace

Value Semiring::zero() const {
  switch (add) {
    case ScalarOp::kMin: return std::numeric_limits<Value>::infinity();
    case ScalarOp::kMax: return -std::numeric_limits<Value>::infinity();
    case ScalarOp::kAnd: return 1;
    default: return 0;
  }
}

Value Semiring::Add(Value a, Value b) const { return Apply(add, a, b); }

Value Semiring::Mul(Value a, Value b) const {
  const Value z = zero();
  if (a == z || b == z) return z;
  return Apply(mul, a, b);
}

Value Semiring::Sub(Value a, Value b) const {
  if (arithmetic()) return a - b;
  return a == b ? zero() : a;
}

}  // namespace fibersim
