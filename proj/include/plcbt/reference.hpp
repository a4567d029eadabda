/**
 * @file reference.hpp
 * @brief Status algebra of the four node types and the classical recursive
 *        tick interpreter. The interpreter is the correctness oracle for the
 *        cyclic and event engines.
 */

#ifndef PLCBT_REFERENCE_HPP_
#define PLCBT_REFERENCE_HPP_

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plcbt/status.hpp"
#include "plcbt/tree.hpp"

namespace plcbt {

/// Failure at the first non-Success child, Running likewise, Success if all
/// succeed. Elements after the deciding one are ignored.
inline NodeStatus CombineSequence(std::span<const NodeStatus> children) {
  if (children.empty()) throw std::invalid_argument("CombineSequence: empty child list");
  for (NodeStatus s : children) {
    if (s != NodeStatus::kSuccess) return s;
  }
  return NodeStatus::kSuccess;
}

/// Dual of CombineSequence.
inline NodeStatus CombineFallback(std::span<const NodeStatus> children) {
  if (children.empty()) throw std::invalid_argument("CombineFallback: empty child list");
  for (NodeStatus s : children) {
    if (s != NodeStatus::kFailure) return s;
  }
  return NodeStatus::kFailure;
}

inline NodeStatus Combine(NodeKind kind, std::span<const NodeStatus> children) {
  if (kind == NodeKind::kSequence) return CombineSequence(children);
  if (kind == NodeKind::kFallback) return CombineFallback(children);
  throw std::invalid_argument("Combine: not a control node kind");
}

struct TickResult {
  NodeStatus root;
  std::vector<std::string> visited;
};

using LeafStates = std::map<std::string, NodeStatus>;

namespace detail {

inline NodeStatus TickNode(const IndexedTree& tree, std::size_t i, const LeafStates& leaves,
                           std::vector<std::string>& visited) {
  visited.push_back(tree.id(i));
  const NodeKind kind = tree.kind(i);
  if (IsLeaf(kind)) {
    auto it = leaves.find(tree.id(i));
    if (it == leaves.end()) {
      throw std::invalid_argument("ReferenceTick: no state for leaf '" + tree.id(i) + "'");
    }
    return it->second;
  }
  // Stop value: Failure for Sequence, Success for Fallback; Running always stops.
  const NodeStatus pass = kind == NodeKind::kSequence ? NodeStatus::kSuccess : NodeStatus::kFailure;
  for (std::size_t c : tree.children(i)) {
    NodeStatus s = TickNode(tree, c, leaves, visited);
    if (s != pass) return s;
  }
  return pass;
}

}  // namespace detail

/// One depth-first tick from the root. `visited` lists ticked nodes in order.
inline TickResult ReferenceTick(const IndexedTree& tree, const LeafStates& leaves) {
  TickResult r;
  r.root = detail::TickNode(tree, 0, leaves, r.visited);
  return r;
}

inline TickResult ReferenceTick(const TreeSpec& spec, const LeafStates& leaves) {
  return ReferenceTick(IndexedTree(spec), leaves);
}

// ============================================================================
// Leaf scripts
// ============================================================================

/// Per-leaf list of statuses returned on successive cycles (cycle t reads
/// element min(t, size-1)).
class LeafScript {
 public:
  LeafScript() = default;
  explicit LeafScript(std::vector<NodeStatus> steps) : steps_(std::move(steps)) {
    if (steps_.empty()) throw std::invalid_argument("LeafScript: empty script");
  }

  /// Parses a string of R/S/F letters.
  static LeafScript Parse(std::string_view letters) {
    std::vector<NodeStatus> steps;
    for (char c : letters) {
      auto s = FromLetter(c);
      if (!s) throw std::invalid_argument("LeafScript: bad letter '" + std::string(1, c) + "'");
      steps.push_back(*s);
    }
    return LeafScript(std::move(steps));
  }

  NodeStatus At(long long t) const {
    if (steps_.empty()) throw std::logic_error("LeafScript: empty script");
    if (t < 0) t = 0;
    auto i = static_cast<std::size_t>(t);
    return i < steps_.size() ? steps_[i] : steps_.back();
  }

  /// Outcome once the script has run out: the last element.
  NodeStatus Final() const { return At(static_cast<long long>(steps_.size())); }

  std::size_t size() const noexcept { return steps_.size(); }
  bool ContainsRunning() const {
    for (auto s : steps_) {
      if (s == NodeStatus::kRunning) return true;
    }
    return false;
  }

  std::string ToString() const {
    std::string out;
    for (auto s : steps_) out.push_back(ToLetter(s));
    return out;
  }

 private:
  std::vector<NodeStatus> steps_;
};

using ScriptMap = std::map<std::string, LeafScript>;

/// Extracts `script` parameters from every leaf of the tree.
inline ScriptMap ScriptsOf(const TreeSpec& spec) {
  ScriptMap out;
  for (const auto& n : spec.nodes) {
    if (!IsLeaf(n.kind)) continue;
    auto it = n.binding.params.find("script");
    if (it == n.binding.params.end()) continue;
    if (const auto* s = std::get_if<std::string>(&it->second)) out.emplace(n.id, LeafScript::Parse(*s));
  }
  return out;
}

inline LeafStates StatesAt(const ScriptMap& scripts, long long t) {
  LeafStates out;
  for (const auto& [id, script] : scripts) out.emplace(id, script.At(t));
  return out;
}

inline LeafStates FinalStates(const ScriptMap& scripts) {
  LeafStates out;
  for (const auto& [id, script] : scripts) out.emplace(id, script.Final());
  return out;
}

}  // namespace plcbt

#endif  // PLCBT_REFERENCE_HPP_
