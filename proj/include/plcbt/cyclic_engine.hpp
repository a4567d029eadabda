/**
 * @file cyclic_engine.hpp
 * @brief Scan-cycle execution of a behavior tree built entirely from
 *        edge-triggered function blocks.
 *
 * Every scan invokes each node exactly once, in pre-order (parent entered
 * before its children, children in declaration order). Control nodes run the
 * non-blocking Sequence rule (and its Fallback dual) incrementally: child i is
 * invoked, its fresh outputs are classified, and the scan either moves on to
 * child i+1 within the same cycle or stops. Children right of the stop point
 * are invoked with xExecute low, plus xAbort when they are busy. The traversal
 * uses an explicit stack bounded by the tree depth; there is no recursion.
 *
 * Control nodes stay evaluated while their xExecute is high, so a
 * condition that flips on the active path is seen in the very cycle it flips.
 */

#ifndef PLCBT_CYCLIC_ENGINE_HPP_
#define PLCBT_CYCLIC_ENGINE_HPP_

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "plcbt/function_block.hpp"
#include "plcbt/reference.hpp"
#include "plcbt/status.hpp"
#include "plcbt/tree.hpp"

namespace plcbt {

class BindingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ============================================================================
// Control rule (one child at a time)
// ============================================================================

struct ChildVerdict {
  bool stop = false;
  ExecState node_state = ExecState::kBusy;
  bool start_child = false;  ///< child was Idle and gets xExecute
};

/// Non-blocking Sequence rule applied to child `i` of `n` whose outputs are
/// `child`. `k` is the succeeded-prefix counter of the current activation.
inline ChildVerdict SequenceVisit(std::size_t i, std::size_t n, ExecState child, std::size_t& k) {
  switch (child) {
    case ExecState::kBusy:
    case ExecState::kAborting:
      k = std::min(k, i);
      return {true, ExecState::kBusy, false};
    case ExecState::kDone:
      if (i >= k) k = i + 1;
      if (i + 1 == n) return {true, ExecState::kDone, false};
      return {false, ExecState::kBusy, false};
    case ExecState::kError:
      k = std::min(k, i);
      return {true, ExecState::kError, false};
    case ExecState::kIdle:
      k = std::min(k, i);
      return {true, ExecState::kBusy, true};
    case ExecState::kAborted:
      break;
  }
  throw EngineFault("child in Aborted without node-level abort pending");
}

/// Dual rule: Error advances the failed-prefix counter, Done decides.
inline ChildVerdict FallbackVisit(std::size_t i, std::size_t n, ExecState child, std::size_t& k) {
  switch (child) {
    case ExecState::kBusy:
    case ExecState::kAborting:
      k = std::min(k, i);
      return {true, ExecState::kBusy, false};
    case ExecState::kError:
      if (i >= k) k = i + 1;
      if (i + 1 == n) return {true, ExecState::kError, false};
      return {false, ExecState::kBusy, false};
    case ExecState::kDone:
      k = std::min(k, i);
      return {true, ExecState::kDone, false};
    case ExecState::kIdle:
      k = std::min(k, i);
      return {true, ExecState::kBusy, true};
    case ExecState::kAborted:
      break;
  }
  throw EngineFault("child in Aborted without node-level abort pending");
}

struct StandardControlRules {
  static ChildVerdict Visit(NodeKind kind, std::size_t i, std::size_t n, ExecState child, std::size_t& k) {
    return kind == NodeKind::kSequence ? SequenceVisit(i, n, child, k) : FallbackVisit(i, n, child, k);
  }
};

struct ControlDecision {
  ExecState node_state = ExecState::kBusy;
  std::size_t stop_index = 0;
  std::optional<std::size_t> start;  ///< child that receives xExecute
  std::vector<std::size_t> abort;    ///< busy children past the stop point
};

/// Whole-node view of one cycle over children outputs that are already known.
template <class Rules = StandardControlRules>
ControlDecision ControlCycle(NodeKind kind, std::span<const ExecState> children, std::size_t& k) {
  if (children.empty()) throw std::invalid_argument("ControlCycle: no children");
  ControlDecision d;
  const std::size_t n = children.size();
  for (std::size_t i = 0; i < n; ++i) {
    ChildVerdict v = Rules::Visit(kind, i, n, children[i], k);
    if (v.stop) {
      d.node_state = v.node_state;
      d.stop_index = i;
      if (v.start_child) d.start = i;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (IsBusy(children[j])) d.abort.push_back(j);
      }
      return d;
    }
  }
  throw EngineFault("control rule did not decide");
}

inline ControlDecision SequenceCycle(std::span<const ExecState> children, std::size_t& k) {
  return ControlCycle(NodeKind::kSequence, children, k);
}

inline ControlDecision FallbackCycle(std::span<const ExecState> children, std::size_t& k) {
  return ControlCycle(NodeKind::kFallback, children, k);
}

// ============================================================================
// Scripted leaves
// ============================================================================

/// Action whose outcome on cycle t is script[t]. Aborts are acknowledged at
/// once unless `abort_delay` cycles are configured.
class ScriptedAction : public EtrigA {
 public:
  explicit ScriptedAction(LeafScript script, int abort_delay = 0)
      : script_(std::move(script)), abort_delay_(abort_delay) {}

  int starts() const noexcept { return starts_; }
  int aborts() const noexcept { return aborts_; }

 protected:
  void OnStart(long long) override { ++starts_; }
  NodeStatus OnStep(long long cycle) override { return script_.At(cycle); }
  bool OnAbort(long long) override {
    if (abort_pending_ < 0) {
      ++aborts_;
      abort_pending_ = abort_delay_;
    }
    if (abort_pending_-- == 0) {
      abort_pending_ = -1;
      return true;
    }
    return false;
  }

 private:
  LeafScript script_;
  int abort_delay_ = 0;
  int abort_pending_ = -1;
  int starts_ = 0;
  int aborts_ = 0;
};

class ScriptedCondition : public LevelCondition {
 public:
  explicit ScriptedCondition(LeafScript script) : script_(std::move(script)) {
    if (script_.ContainsRunning()) throw std::invalid_argument("condition script contains Running");
  }

 protected:
  bool Evaluate(long long cycle) override { return script_.At(cycle) == NodeStatus::kSuccess; }

 private:
  LeafScript script_;
};

using LeafFactory = std::function<std::unique_ptr<FunctionBlock>(const NodeSpec&)>;

/// Builds scripted leaves from a `script` parameter.
inline std::unique_ptr<FunctionBlock> MakeScriptedLeaf(const NodeSpec& n) {
  auto it = n.binding.params.find("script");
  if (it == n.binding.params.end() || !std::holds_alternative<std::string>(it->second)) {
    throw BindingError("unknown leaf binding '" + n.binding.name + "' for node '" + n.id + "'");
  }
  auto script = LeafScript::Parse(std::get<std::string>(it->second));
  if (n.kind == NodeKind::kCondition) return std::make_unique<ScriptedCondition>(std::move(script));
  int delay = 0;
  if (auto d = n.binding.params.find("abort_delay"); d != n.binding.params.end()) {
    if (const auto* v = std::get_if<double>(&d->second)) delay = static_cast<int>(*v);
  }
  return std::make_unique<ScriptedAction>(std::move(script), delay);
}

// ============================================================================
// Trace
// ============================================================================

struct TraceEntry {
  std::string node;
  ExecState state;
  EtrigInputs inputs;
};

struct CycleTrace {
  long long cycle = 0;
  std::vector<TraceEntry> entries;       ///< invocation order
  std::vector<std::string> telemetry;    ///< plant lines, already formatted
};

/// Plant co-simulated with the scan; updated once after every BT scan.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual void Cycle(long long cycle) = 0;
  virtual std::vector<std::string> Telemetry(long long /*cycle*/) const { return {}; }
};

inline void WriteCyclicTraceHeader(std::ostream& os) { os << "cycle;node;state\n"; }

inline void WriteCycle(std::ostream& os, const CycleTrace& c) {
  for (const auto& e : c.entries) os << c.cycle << ';' << e.node << ';' << ToString(e.state) << '\n';
  for (const auto& t : c.telemetry) os << t << '\n';
}

enum class RunOutcome { kRootDone, kRootError, kBudgetExhausted };

inline std::string_view ToString(RunOutcome o) {
  switch (o) {
    case RunOutcome::kRootDone: return "root done";
    case RunOutcome::kRootError: return "root error";
    case RunOutcome::kBudgetExhausted: return "budget exhausted";
  }
  return "unknown";
}

struct RunResult {
  RunOutcome outcome = RunOutcome::kBudgetExhausted;
  ExecState root = ExecState::kIdle;
  long long cycles = 0;
  std::vector<CycleTrace> trace;

  std::string TraceText() const {
    std::ostringstream os;
    WriteCyclicTraceHeader(os);
    for (const auto& c : trace) WriteCycle(os, c);
    return os.str();
  }
};

// ============================================================================
// Engine
// ============================================================================

template <class Rules = StandardControlRules>
class BasicCyclicEngine {
 public:
  BasicCyclicEngine(TreeSpec spec, LeafFactory factory = MakeScriptedLeaf)
      : tree_(std::move(spec)), nodes_(tree_.size()) {
    for (std::size_t i = 0; i < tree_.size(); ++i) {
      if (IsLeaf(tree_.kind(i))) {
        nodes_[i].leaf = factory(tree_.node(i));
        if (!nodes_[i].leaf) throw BindingError("leaf factory returned nothing for '" + tree_.id(i) + "'");
      }
    }
  }

  void SetPlant(Plant* plant) noexcept { plant_ = plant; }

  const IndexedTree& tree() const noexcept { return tree_; }
  long long cycle() const noexcept { return cycle_; }

  ExecState state(std::size_t i) const {
    const auto& n = nodes_.at(i);
    return n.leaf ? n.leaf->state() : n.state;
  }
  ExecState state(const std::string& id) const { return state(tree_.IndexOf(id)); }
  ExecState root_state() const { return state(0); }

  /// Inputs the node received in the latest scan.
  EtrigInputs inputs(std::size_t i) const { return nodes_.at(i).inputs; }
  EtrigInputs inputs(const std::string& id) const { return inputs(tree_.IndexOf(id)); }

  /// Succeeded (Sequence) or failed (Fallback) prefix counter.
  std::size_t prefix(std::size_t i) const { return nodes_.at(i).k; }

  /// Number of node invocations in the latest scan, per node.
  const std::vector<int>& invocations() const noexcept { return invocations_; }

  FunctionBlock* leaf(const std::string& id) { return nodes_.at(tree_.IndexOf(id)).leaf.get(); }

  /// One scan cycle with the given root command, followed by the plant update.
  CycleTrace Scan(EtrigInputs root_cmd = {true, false}) {
    const long long cycle = cycle_;
    invocations_.assign(tree_.size(), 0);

    std::vector<Frame> stack;
    stack.reserve(tree_.MaxDepth() + 1);
    stack.push_back(Enter(0, root_cmd, cycle));

    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto& kids = tree_.children(f.node);
      if (IsLeaf(tree_.kind(f.node)) || f.next == kids.size()) {
        const std::size_t done = f.node;
        Finish(f);
        stack.pop_back();
        if (!stack.empty()) AfterChild(stack.back(), done);
        continue;
      }
      const std::size_t child = kids[f.next];
      EtrigInputs cmd{false, false};
      if (f.active && !f.decided) {
        if (state(child) == ExecState::kAborting) {
          // Leftover abort from an earlier activation: let it finish, re-arm next cycle.
          f.decided = true;
          f.result = ExecState::kBusy;
        } else {
          cmd.execute = true;
        }
      } else {
        cmd.abort = IsBusy(state(child));
      }
      stack.push_back(Enter(child, cmd, cycle));
    }

    if (plant_) plant_->Cycle(cycle);

    CycleTrace out;
    out.cycle = cycle;
    out.entries.reserve(tree_.size());
    for (std::size_t i = 0; i < tree_.size(); ++i) {
      out.entries.push_back({tree_.id(i), state(i), nodes_[i].inputs});
    }
    if (plant_) out.telemetry = plant_->Telemetry(cycle);
    ++cycle_;
    return out;
  }

  /// Scans with root xExecute held high until the root is terminal or the
  /// budget is spent.
  RunResult Run(long long max_cycles) {
    if (max_cycles < 1) throw std::invalid_argument("Run: max_cycles must be >= 1");
    RunResult r;
    for (long long c = 0; c < max_cycles; ++c) {
      r.trace.push_back(Scan());
      ++r.cycles;
      ExecState root = root_state();
      if (root == ExecState::kDone) {
        r.outcome = RunOutcome::kRootDone;
        break;
      }
      if (root == ExecState::kError || root == ExecState::kAborted) {
        r.outcome = RunOutcome::kRootError;
        break;
      }
    }
    r.root = root_state();
    return r;
  }

 private:
  struct NodeRt {
    std::unique_ptr<FunctionBlock> leaf;
    ExecState state = ExecState::kIdle;  // control nodes only
    bool prev_execute = false;
    std::size_t k = 0;
    EtrigInputs inputs;
    long long last_cycle = -1;
  };

  struct Frame {
    std::size_t node = 0;
    std::size_t next = 0;     ///< next child to invoke
    bool active = false;      ///< commanded and evaluating children
    bool decided = false;
    ExecState result = ExecState::kBusy;
  };

  Frame Enter(std::size_t i, EtrigInputs cmd, long long cycle) {
    ++invocations_[i];
    NodeRt& n = nodes_[i];
    n.inputs = cmd;
    Frame f;
    f.node = i;
    if (n.leaf) {
      n.leaf->Cycle(cmd, cycle);
      return f;
    }
    if (n.last_cycle == cycle) throw EngineFault("node '" + tree_.id(i) + "' invoked twice in one cycle");
    n.last_cycle = cycle;

    const bool rising = cmd.execute && !n.prev_execute;
    n.prev_execute = cmd.execute;
    if (cmd.execute && !cmd.abort) {
      if (rising) {
        n.k = 0;
        f.active = true;
      } else {
        // Held high: keep evaluating unless an abort is still settling.
        f.active = n.state != ExecState::kAborting && n.state != ExecState::kAborted && n.state != ExecState::kIdle;
        if (n.state == ExecState::kAborted || n.state == ExecState::kIdle) {
          throw EngineFault("node '" + tree_.id(i) + "' commanded without a rising edge while " +
                            std::string(ToString(n.state)));
        }
      }
      if (f.active) n.state = ExecState::kBusy;
    } else {
      if (n.state == ExecState::kBusy) n.state = ExecState::kAborting;
      if (IsTerminal(n.state) && !cmd.execute) {
        n.state = ExecState::kIdle;
        n.k = 0;
      }
    }
    return f;
  }

  void AfterChild(Frame& f, std::size_t child) {
    const auto& kids = tree_.children(f.node);
    if (f.active && !f.decided) {
      ChildVerdict v = Rules::Visit(tree_.kind(f.node), f.next, kids.size(), state(child), nodes_[f.node].k);
      if (v.stop) {
        f.decided = true;
        f.result = v.node_state;
      }
    }
    ++f.next;
  }

  void Finish(Frame& f) {
    NodeRt& n = nodes_[f.node];
    if (n.leaf) return;
    if (f.active) {
      if (!f.decided) throw EngineFault("control node '" + tree_.id(f.node) + "' did not decide");
      n.state = f.result;
      return;
    }
    if (n.state == ExecState::kAborting) {
      bool settled = true;
      for (std::size_t c : tree_.children(f.node)) settled = settled && !IsBusy(state(c));
      if (settled) {
        n.state = ExecState::kAborted;
        n.k = 0;
      }
    }
  }

  IndexedTree tree_;
  std::vector<NodeRt> nodes_;
  std::vector<int> invocations_;
  Plant* plant_ = nullptr;
  long long cycle_ = 0;
};

using CyclicEngine = BasicCyclicEngine<>;

}  // namespace plcbt

#endif  // PLCBT_CYCLIC_ENGINE_HPP_
