#include "fibersim/iteration_space.hpp"

#include <algorithm>

#include "fibersim/error.hpp"

namespace fibersim {

std::string RewriteStep::str() const {
  if (kind == PartitionKind::kFlatten) {
    std::string s = "flatten(";
    for (std::size_t i = 0; i < inputs.size(); ++i) s += (i ? ", " : "") + inputs[i];
    return s + ") -> " + upper;
  }
  std::string how = kind == PartitionKind::kUniformShape
                        ? "uniform_shape(" + std::to_string(size) + ")"
                        : "uniform_occupancy(" + leader + "." + std::to_string(size) + ")";
  return how + " " + inputs[0] + " -> " + upper + ", " + lower;
}

const LoopRank* IterationSpace::find(const std::string& name) const {
  for (const auto& r : ranks)
    if (r.name == name) return &r;
  return nullptr;
}

const LoopRank* IterationSpace::value_rank(const std::string& var) const {
  for (const auto& r : ranks)
    if (!r.upper && std::find(r.vars.begin(), r.vars.end(), var) != r.vars.end()) return &r;
  return nullptr;
}

namespace {

std::vector<std::string> DefaultVarOrder(const EinsumDecl& e) {
  std::vector<std::string> order = e.output_vars;
  std::vector<std::string> rest;
  for (const auto& v : e.variables())
    if (std::find(order.begin(), order.end(), v) == order.end()) rest.push_back(v);
  std::sort(rest.begin(), rest.end());
  order.insert(order.end(), rest.begin(), rest.end());
  return order;
}

}  // namespace

IterationSpace PlanIterationSpace(const ProblemSpec& spec, const EinsumDecl& e) {
  IterationSpace space;
  for (const auto& v : DefaultVarOrder(e)) space.ranks.push_back(LoopRank{RankOf(v), {v}, false, -1});

  auto locate = [&](const std::string& name) {
    auto it = std::find_if(space.ranks.begin(), space.ranks.end(),
                           [&](const LoopRank& r) { return r.name == name; });
    if (it == space.ranks.end())
      throw SpecError("partitioning of " + e.output + ": rank " + name + " is absent at this stage", e.line);
    return it;
  };

  auto pit = spec.mapping.partitioning.find(e.output);
  if (pit == spec.mapping.partitioning.end()) return space;

  for (const auto& entry : pit->second) {
    std::size_t d = 0;
    std::string current;
    if (entry.ranks.size() > 1) {
      if (entry.directives.empty() || entry.directives[0].kind != PartitionKind::kFlatten)
        throw SpecError("partitioning of " + e.output + ": rank tuple " + entry.key() + " must start with flatten()",
                        e.line);
      RewriteStep step;
      step.kind = PartitionKind::kFlatten;
      step.inputs = entry.ranks;
      LoopRank merged;
      for (const auto& r : entry.ranks) {
        auto it = locate(r);
        if (it->upper)
          throw SpecError("partitioning of " + e.output + ": cannot flatten partition rank " + r, e.line);
        merged.name += r;
        merged.vars.insert(merged.vars.end(), it->vars.begin(), it->vars.end());
      }
      merged.step = static_cast<int>(space.steps.size());
      step.upper = merged.name;
      auto first = locate(entry.ranks[0]);
      *first = merged;
      for (std::size_t i = 1; i < entry.ranks.size(); ++i) space.ranks.erase(locate(entry.ranks[i]));
      space.steps.push_back(step);
      current = merged.name;
      d = 1;
    } else {
      current = entry.ranks[0];
      locate(current);
    }

    std::size_t splits = 0;
    for (std::size_t i = d; i < entry.directives.size(); ++i) {
      if (entry.directives[i].kind == PartitionKind::kFlatten)
        throw SpecError("partitioning of " + e.output + ": flatten() must come first for " + entry.key(), e.line);
      ++splits;
    }
    const std::string base = current;
    for (std::size_t j = 0; j < splits; ++j) {
      const PartitionDirective& dir = entry.directives[d + j];
      RewriteStep step;
      step.kind = dir.kind;
      step.inputs = {current};
      step.upper = base + std::to_string(splits - j);
      step.lower = base + std::to_string(splits - j - 1);
      step.leader = dir.leader;
      step.size = dir.size;
      if (!dir.symbol.empty()) {
        auto s = spec.shape.find(dir.symbol);
        if (s == spec.shape.end())
          throw SpecError("partitioning of " + e.output + ": size " + dir.symbol + " is not given in einsum.shape",
                          e.line);
        step.size = s->second;
      }
      if (step.size < 1)
        throw SpecError("partitioning of " + e.output + ": size must be positive in " + dir.str(), e.line);
      auto it = locate(current);
      if (it->upper)
        throw SpecError("partitioning of " + e.output + ": cannot split partition rank " + current, e.line);
      LoopRank up{step.upper, it->vars, true, static_cast<int>(space.steps.size())};
      LoopRank low{step.lower, it->vars, false, static_cast<int>(space.steps.size())};
      it = space.ranks.erase(it);
      it = space.ranks.insert(it, low);
      space.ranks.insert(it, up);
      space.steps.push_back(step);
      current = step.lower;
    }
  }
  return space;
}

std::vector<std::string> DefaultLoopOrder(const ProblemSpec& spec, const EinsumDecl& e) {
  std::vector<std::string> out;
  for (const auto& r : PlanIterationSpace(spec, e).ranks) out.push_back(r.name);
  return out;
}

}  // namespace fibersim
