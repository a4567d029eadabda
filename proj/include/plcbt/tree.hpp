/**
 * @file tree.hpp
 * @brief Immutable tree description, structural validation and pre-order
 *        indexing shared by both engines.
 */

#ifndef PLCBT_TREE_HPP_
#define PLCBT_TREE_HPP_

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "plcbt/status.hpp"

namespace plcbt {

using ParamValue = std::variant<double, std::string, bool>;
using ParamMap = std::map<std::string, ParamValue>;

/// Leaf behavior name plus its parameters. Empty for control nodes.
struct Binding {
  std::string name;
  ParamMap params;

  friend bool operator==(const Binding&, const Binding&) = default;
};

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::kAction;
  std::vector<std::string> children;
  Binding binding;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct TreeSpec {
  std::string name;
  std::vector<NodeSpec> nodes;
  std::string root;

  const NodeSpec* Find(const std::string& id) const {
    for (const auto& n : nodes) {
      if (n.id == id) return &n;
    }
    return nullptr;
  }

  friend bool operator==(const TreeSpec&, const TreeSpec&) = default;
};

// ============================================================================
// Validation
// ============================================================================

struct Violation {
  std::string node_id;
  std::string rule;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

inline constexpr const char* kRuleControlNeedsChild = "control node needs ≥1 child";
inline constexpr const char* kRuleLeafHasChildren = "execution node must not have children";
inline constexpr const char* kRuleDuplicateId = "duplicate node id";
inline constexpr const char* kRuleUnknownChild = "child id does not name a node";
inline constexpr const char* kRuleMultipleParents = "node has more than one parent";
inline constexpr const char* kRuleUnreachable = "node not reachable from root";
inline constexpr const char* kRuleRootMissing = "root id does not name a node";
inline constexpr const char* kRuleRootHasParent = "root must not have a parent";
inline constexpr const char* kRuleConditionRunning = "condition script must not contain Running";
inline constexpr const char* kRuleBadScript = "script letters must be R, S or F";

/// Checks every structural invariant of a TreeSpec. Violations are data.
inline ValidationReport ValidateTree(const TreeSpec& spec) {
  ValidationReport report;
  auto add = [&](const std::string& id, const char* rule) {
    report.violations.push_back({id, rule});
  };

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    if (!index.emplace(spec.nodes[i].id, i).second) {
      add(spec.nodes[i].id, kRuleDuplicateId);
    }
  }

  std::unordered_map<std::string, int> parents;
  for (const auto& n : spec.nodes) {
    if (IsControl(n.kind) && n.children.empty()) add(n.id, kRuleControlNeedsChild);
    if (IsLeaf(n.kind) && !n.children.empty()) add(n.id, kRuleLeafHasChildren);
    for (const auto& c : n.children) {
      if (!index.contains(c)) {
        add(n.id, kRuleUnknownChild);
        continue;
      }
      if (++parents[c] == 2) add(c, kRuleMultipleParents);
    }
    if (IsLeaf(n.kind)) {
      auto it = n.binding.params.find("script");
      if (it != n.binding.params.end()) {
        if (const auto* s = std::get_if<std::string>(&it->second)) {
          for (char ch : *s) {
            auto st = FromLetter(ch);
            if (!st) {
              add(n.id, kRuleBadScript);
              break;
            }
            if (n.kind == NodeKind::kCondition && *st == NodeStatus::kRunning) {
              add(n.id, kRuleConditionRunning);
              break;
            }
          }
        } else {
          add(n.id, kRuleBadScript);
        }
      }
    }
  }

  if (!index.contains(spec.root)) {
    add(spec.root, kRuleRootMissing);
    return report;
  }
  if (parents.contains(spec.root)) add(spec.root, kRuleRootHasParent);

  // Reachability walk; the visited set also stops cycles.
  std::set<std::string> seen;
  std::vector<std::string> stack{spec.root};
  while (!stack.empty()) {
    std::string id = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    for (const auto& c : spec.nodes[index.at(id)].children) {
      if (index.contains(c)) stack.push_back(c);
    }
  }
  for (const auto& n : spec.nodes) {
    if (!seen.contains(n.id)) add(n.id, kRuleUnreachable);
  }
  return report;
}

// ============================================================================
// Pre-order index
// ============================================================================

/// Flattened pre-order view of a valid tree. Index 0 is the root; children of
/// a node are listed in declaration order.
class IndexedTree {
 public:
  static constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

  explicit IndexedTree(TreeSpec spec_in) : spec_(std::make_shared<const TreeSpec>(std::move(spec_in))) {
    const TreeSpec& spec = *spec_;
    auto report = ValidateTree(spec);
    if (!report.ok()) {
      const auto& v = report.violations.front();
      throw std::invalid_argument("invalid tree: node '" + v.node_id + "': " + v.rule);
    }
    std::unordered_map<std::string, const NodeSpec*> by_id;
    for (const auto& n : spec.nodes) by_id.emplace(n.id, &n);

    // Explicit stack: (spec node, parent index).
    std::vector<std::pair<const NodeSpec*, std::size_t>> stack{{by_id.at(spec.root), kNoParent}};
    while (!stack.empty()) {
      auto [node, parent] = stack.back();
      stack.pop_back();
      std::size_t idx = nodes_.size();
      nodes_.push_back(node);
      parent_.push_back(parent);
      children_.emplace_back();
      depth_.push_back(parent == kNoParent ? 0 : depth_[parent] + 1);
      if (parent != kNoParent) children_[parent].push_back(idx);
      for (auto it = node->children.rbegin(); it != node->children.rend(); ++it) {
        stack.emplace_back(by_id.at(*it), idx);
      }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) position_.emplace(nodes_[i]->id, i);
  }

  const TreeSpec& spec() const noexcept { return *spec_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const NodeSpec& node(std::size_t i) const { return *nodes_.at(i); }
  const std::string& id(std::size_t i) const { return nodes_.at(i)->id; }
  NodeKind kind(std::size_t i) const { return nodes_.at(i)->kind; }
  std::size_t parent(std::size_t i) const { return parent_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  std::size_t depth(std::size_t i) const { return depth_.at(i); }

  std::size_t IndexOf(const std::string& id) const {
    auto it = position_.find(id);
    if (it == position_.end()) throw std::out_of_range("unknown node id '" + id + "'");
    return it->second;
  }

  std::optional<std::size_t> Find(const std::string& id) const {
    auto it = position_.find(id);
    if (it == position_.end()) return std::nullopt;
    return it->second;
  }

  /// True if `ancestor` lies on the path from the root to `node` (exclusive).
  bool IsAncestor(std::size_t ancestor, std::size_t node) const {
    for (std::size_t p = parent_.at(node); p != kNoParent; p = parent_[p]) {
      if (p == ancestor) return true;
    }
    return false;
  }

  std::size_t MaxDepth() const {
    std::size_t d = 0;
    for (auto x : depth_) d = std::max(d, x);
    return d;
  }

 private:
  std::shared_ptr<const TreeSpec> spec_;  // nodes_ point into it
  std::vector<const NodeSpec*> nodes_;
  std::vector<std::size_t> parent_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> depth_;
  std::unordered_map<std::string, std::size_t> position_;
};

// ============================================================================
// Construction helpers
// ============================================================================

/// Nested node expression, flattened by BuildTree. Handy in tests and for the
/// built-in scenarios.
struct NodeExpr {
  std::string id;
  NodeKind kind;
  std::vector<NodeExpr> children;
  Binding binding;
};

inline NodeExpr Sequence(std::string id, std::vector<NodeExpr> children) {
  return {std::move(id), NodeKind::kSequence, std::move(children), {}};
}

inline NodeExpr Fallback(std::string id, std::vector<NodeExpr> children) {
  return {std::move(id), NodeKind::kFallback, std::move(children), {}};
}

inline NodeExpr Action(std::string id, ParamMap params = {}) {
  Binding b{id, std::move(params)};
  return {std::move(id), NodeKind::kAction, {}, std::move(b)};
}

inline NodeExpr Condition(std::string id, ParamMap params = {}) {
  Binding b{id, std::move(params)};
  return {std::move(id), NodeKind::kCondition, {}, std::move(b)};
}

inline TreeSpec BuildTree(std::string name, const NodeExpr& root) {
  TreeSpec spec;
  spec.name = std::move(name);
  spec.root = root.id;
  std::vector<const NodeExpr*> stack{&root};
  while (!stack.empty()) {
    const NodeExpr* e = stack.back();
    stack.pop_back();
    NodeSpec n;
    n.id = e->id;
    n.kind = e->kind;
    n.binding = e->binding;
    for (const auto& c : e->children) n.children.push_back(c.id);
    spec.nodes.push_back(std::move(n));
    for (auto it = e->children.rbegin(); it != e->children.rend(); ++it) stack.push_back(&*it);
  }
  return spec;
}

}  // namespace plcbt

#endif  // PLCBT_TREE_HPP_
