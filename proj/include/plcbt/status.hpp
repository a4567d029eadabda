/**
 * @file status.hpp
 * @brief Three-valued behavior tree status and node kinds.
 */

#ifndef PLCBT_STATUS_HPP_
#define PLCBT_STATUS_HPP_

#include <cstdint>
#include <optional>
#include <string_view>

namespace plcbt {

enum class NodeStatus : std::uint8_t { kRunning, kSuccess, kFailure };

enum class NodeKind : std::uint8_t { kSequence, kFallback, kAction, kCondition };

inline constexpr std::string_view ToString(NodeStatus s) noexcept {
  switch (s) {
    case NodeStatus::kRunning: return "RUNNING";
    case NodeStatus::kSuccess: return "SUCCESS";
    case NodeStatus::kFailure: return "FAILURE";
  }
  return "UNKNOWN";
}

inline constexpr std::string_view ToString(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::kSequence: return "sequence";
    case NodeKind::kFallback: return "fallback";
    case NodeKind::kAction: return "action";
    case NodeKind::kCondition: return "condition";
  }
  return "unknown";
}

inline constexpr bool IsControl(NodeKind k) noexcept {
  return k == NodeKind::kSequence || k == NodeKind::kFallback;
}

inline constexpr bool IsLeaf(NodeKind k) noexcept { return !IsControl(k); }

/// Success <-> Failure, Running unchanged.
inline constexpr NodeStatus Swap(NodeStatus s) noexcept {
  if (s == NodeStatus::kSuccess) return NodeStatus::kFailure;
  if (s == NodeStatus::kFailure) return NodeStatus::kSuccess;
  return s;
}

/// Script letter: R, S or F.
inline constexpr char ToLetter(NodeStatus s) noexcept {
  return s == NodeStatus::kRunning ? 'R' : (s == NodeStatus::kSuccess ? 'S' : 'F');
}

inline constexpr std::optional<NodeStatus> FromLetter(char c) noexcept {
  switch (c) {
    case 'R': return NodeStatus::kRunning;
    case 'S': return NodeStatus::kSuccess;
    case 'F': return NodeStatus::kFailure;
    default: return std::nullopt;
  }
}

}  // namespace plcbt

#endif  // PLCBT_STATUS_HPP_
