#pragma once

#include <string>

#include "fibersim/fibertree.hpp"

namespace fibersim {

// Scalar operators an `operators:` section may assign to add and mul.
enum class ScalarOp { kPlus, kTimes, kMin, kMax, kOr, kAnd };

ScalarOp ParseScalarOp(const std::string& text);
std::string ToString(ScalarOp op);

// The (add, mul) pair every Einsum of a cascade evaluates under. `zero` is
// the additive identity; absent fibertree elements stand for it.
struct Semiring {
  ScalarOp add = ScalarOp::kPlus;
  ScalarOp mul = ScalarOp::kTimes;

  Value zero() const;
  bool arithmetic() const { return add == ScalarOp::kPlus; }

  Value Add(Value a, Value b) const;
  // Zero annihilates: Mul(zero, x) == zero.
  Value Mul(Value a, Value b) const;
  // Ordinary subtraction under arithmetic add; otherwise `a` where it differs
  // from `b`, else zero.
  Value Sub(Value a, Value b) const;

  friend bool operator==(const Semiring&, const Semiring&) = default;
};

}  // namespace fibersim
