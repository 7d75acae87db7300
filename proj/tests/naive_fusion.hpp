#pragma once

// Straight-line fusion grouping used to cross-check the compiler's schedule.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fibersim/spec.hpp"

namespace fibersim::testing {

inline void CollectClasses(const ArchLevel& level, std::map<std::string, ComponentClass>& out) {
  for (const auto& c : level.local) out[c.name] = c.cls;
  for (const auto& sub : level.subtree) CollectClasses(sub, out);
}

struct NaiveKey {
  std::string topology;
  std::vector<std::string> prefix;
  std::set<std::string> busy;
};

inline NaiveKey NaiveFusionKey(const ProblemSpec& spec, const EinsumDecl& e) {
  NaiveKey k;
  auto b = spec.binding.find(e.output);
  if (b != spec.binding.end()) {
    k.topology = b->second.topology;
    std::map<std::string, ComponentClass> classes;
    for (const auto& t : spec.architecture.topologies)
      if (t.name == k.topology) CollectClasses(t.root, classes);
    for (const auto& cb : b->second.components) {
      auto c = classes.find(cb.component);
      if (c != classes.end() && c->second != ComponentClass::kDram && c->second != ComponentClass::kBuffer)
        k.busy.insert(cb.component);
    }
  }
  const auto& space = spec.mapping.spacetime.at(e.output).space;
  for (const auto& r : spec.mapping.loop_order.at(e.output)) {
    bool spatial = false;
    for (const auto& s : space) spatial = spatial || s == r;
    if (spatial) break;
    k.prefix.push_back(r);
  }
  return k;
}

// Einsums in listing order; a new block starts whenever the next Einsum
// conflicts with any member of the open block.
inline std::vector<std::vector<int>> NaiveFusionBlocks(const ProblemSpec& spec) {
  std::vector<std::vector<int>> blocks;
  std::vector<NaiveKey> keys;
  for (const auto& e : spec.einsums) keys.push_back(NaiveFusionKey(spec, e));
  for (int i = 0; i < static_cast<int>(keys.size()); ++i) {
    bool join = !blocks.empty();
    if (join)
      for (int m : blocks.back()) {
        const auto& a = keys[static_cast<std::size_t>(m)];
        const auto& b = keys[static_cast<std::size_t>(i)];
        if (a.topology != b.topology || a.prefix != b.prefix) join = false;
        for (const auto& c : a.busy)
          if (b.busy.count(c)) join = false;
      }
    if (join)
      blocks.back().push_back(i);
    else
      blocks.push_back({i});
  }
  return blocks;
}

}  // namespace fibersim::testing
