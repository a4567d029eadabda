/**
 * @file cyclic_check.hpp
 * @brief Cycle-by-cycle comparison of the cyclic engine with ReferenceTick,
 *        plus the per-scan invariants of the engine.
 */

#ifndef PLCBT_CYCLIC_CHECK_HPP_
#define PLCBT_CYCLIC_CHECK_HPP_

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "plcbt/cyclic_engine.hpp"
#include "plcbt/reference.hpp"

namespace plcbt {

/// Cycle offset between a cyclic scan and the oracle tick it corresponds to.
/// Leaf work starts in the cycle of the rising edge, so no shift is needed.
inline constexpr long long kStartEdgeOffset = 0;

struct CheckResult {
  bool ok = true;
  std::string detail;     ///< first divergence, empty when ok
  long long at = -1;      ///< cycle or round of the divergence
  long long steps = 0;    ///< cycles or rounds executed
};

inline std::optional<NodeStatus> RootStatusOf(ExecState s) {
  if (s == ExecState::kIdle) return std::nullopt;
  return ToNodeStatus(s);
}

/// Runs the cyclic engine on a scripted tree and compares the root status of
/// every cycle with ReferenceTick over the scripts at that cycle. Also checks
/// single invocation, output exclusivity, the prefix counter, and abort
/// soundness.
template <class Rules = StandardControlRules>
CheckResult CheckCyclic(const TreeSpec& spec, long long max_cycles) {
  CheckResult res;
  BasicCyclicEngine<Rules> engine(spec);
  const IndexedTree& tree = engine.tree();
  const ScriptMap scripts = ScriptsOf(spec);

  auto fail = [&](long long cycle, std::string what) {
    res.ok = false;
    res.at = cycle;
    res.detail = std::move(what);
    return res;
  };

  std::vector<CycleTrace> trace;
  for (long long c = 0; c < max_cycles; ++c) {
    trace.push_back(engine.Scan());
    ++res.steps;
    const CycleTrace& now = trace.back();

    for (std::size_t i = 0; i < tree.size(); ++i) {
      if (engine.invocations()[i] != 1) return fail(c, "node '" + tree.id(i) + "' invoked " +
                                                            std::to_string(engine.invocations()[i]) + " times");
      const EtrigOutputs o = OutputsOf(now.entries[i].state);
      if (int(o.done) + int(o.error) + int(o.aborted) > 1 || (o.busy && (o.done || o.error || o.aborted))) {
        return fail(c, "output exclusivity broken at '" + tree.id(i) + "'");
      }
    }

    // Succeeded/failed prefix equals the leading run of latched children.
    for (std::size_t i = 0; i < tree.size(); ++i) {
      if (!IsControl(tree.kind(i)) || now.entries[i].state == ExecState::kIdle ||
          now.entries[i].state == ExecState::kAborted) {
        continue;
      }
      const ExecState latch = tree.kind(i) == NodeKind::kSequence ? ExecState::kDone : ExecState::kError;
      std::size_t lead = 0;
      for (auto ch : tree.children(i)) {
        if (now.entries[ch].state != latch) break;
        ++lead;
      }
      if (engine.prefix(i) != lead) {
        return fail(c, "prefix counter of '" + tree.id(i) + "' is " + std::to_string(engine.prefix(i)) +
                           ", leading latched children " + std::to_string(lead));
      }
    }

    // Abort soundness: no busy descendant under a terminal node, and every
    // descendant that was busy before got xAbort in this scan.
    for (std::size_t p = 0; p < tree.size(); ++p) {
      if (!IsTerminal(now.entries[p].state) || IsLeaf(tree.kind(p))) continue;
      for (std::size_t d = p + 1; d < tree.size(); ++d) {
        if (!tree.IsAncestor(p, d)) continue;
        if (now.entries[d].state == ExecState::kBusy) {
          return fail(c, "'" + tree.id(d) + "' still busy under terminal '" + tree.id(p) + "'");
        }
        if (c > 0 && trace[c - 1].entries[d].state == ExecState::kBusy && !IsTerminal(now.entries[d].state) &&
            !now.entries[d].inputs.abort) {
          return fail(c, "'" + tree.id(d) + "' not aborted under terminal '" + tree.id(p) + "'");
        }
      }
    }
    if (c >= 2) {
      for (std::size_t d = 0; d < tree.size(); ++d) {
        if (trace[c - 2].entries[d].state == ExecState::kAborting && now.entries[d].state == ExecState::kAborting) {
          return fail(c, "'" + tree.id(d) + "' still aborting after 2 cycles");
        }
      }
    }

    auto expected = ReferenceTick(tree, StatesAt(scripts, c - kStartEdgeOffset)).root;
    auto got = RootStatusOf(now.entries[0].state);
    if (!got || *got != expected) {
      std::ostringstream os;
      os << "cycle " << c << ": root " << ToString(now.entries[0].state) << ", oracle " << ToString(expected);
      return fail(c, os.str());
    }
    if (expected != NodeStatus::kRunning) break;
  }
  return res;
}

}  // namespace plcbt

#endif  // PLCBT_CYCLIC_CHECK_HPP_
