#pragma once

#include <stdexcept>
#include <string>

namespace fibersim {

// All library failures are reported as Error; `module()` names the module of
// origin so the CLI can prefix messages ("spec: ...", "executor: ...").
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

// Syntax / reference errors in a spec document, with 1-based position when
// known (0 = unknown).
class SpecError : public Error {
 public:
  SpecError(const std::string& what, int line = 0, int column = 0)
      : Error("spec", Format(what, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string Format(const std::string& what, int line, int column) {
    if (line <= 0) return what;
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
  }

  int line_;
  int column_;
};

}  // namespace fibersim
