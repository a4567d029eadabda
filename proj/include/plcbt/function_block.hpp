/**
 * @file function_block.hpp
 * @brief Edge-triggered function block with abort (ETrigA) and the
 *        level-evaluated condition block used for BT conditions.
 *
 * State machine of the edge-triggered block, one transition step per call:
 *
 *   Idle      --rising xExecute-->              Busy (work starts same call)
 *   Busy      --work completes-->               Done
 *   Busy      --work fails-->                   Error
 *   Busy      --xAbort-->                       Aborting --acknowledged--> Aborted
 *   Done/Error/Aborted --xExecute low-->        Idle
 *   Done/Error/Aborted --rising xExecute-->     Busy (new activation)
 *
 * A rising edge while aborting is ignored; the caller has to re-arm.
 */

#ifndef PLCBT_FUNCTION_BLOCK_HPP_
#define PLCBT_FUNCTION_BLOCK_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "plcbt/status.hpp"

namespace plcbt {

/// Harness-level fault: broken determinism or an internal invariant. Never a
/// normal BT failure.
class EngineFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExecState : std::uint8_t { kIdle, kBusy, kDone, kError, kAborting, kAborted };

inline constexpr std::string_view ToString(ExecState s) noexcept {
  switch (s) {
    case ExecState::kIdle: return "IDLE";
    case ExecState::kBusy: return "BUSY";
    case ExecState::kDone: return "DONE";
    case ExecState::kError: return "ERROR";
    case ExecState::kAborting: return "ABORTING";
    case ExecState::kAborted: return "ABORTED";
  }
  return "UNKNOWN";
}

inline constexpr bool IsTerminal(ExecState s) noexcept {
  return s == ExecState::kDone || s == ExecState::kError || s == ExecState::kAborted;
}

inline constexpr bool IsBusy(ExecState s) noexcept {
  return s == ExecState::kBusy || s == ExecState::kAborting;
}

/// Done -> Success, Error/Aborted -> Failure, Busy/Aborting -> Running.
inline constexpr std::optional<NodeStatus> ToNodeStatus(ExecState s) noexcept {
  switch (s) {
    case ExecState::kDone: return NodeStatus::kSuccess;
    case ExecState::kError:
    case ExecState::kAborted: return NodeStatus::kFailure;
    case ExecState::kBusy:
    case ExecState::kAborting: return NodeStatus::kRunning;
    case ExecState::kIdle: return std::nullopt;
  }
  return std::nullopt;
}

struct EtrigInputs {
  bool execute = false;
  bool abort = false;

  friend bool operator==(const EtrigInputs&, const EtrigInputs&) = default;
};

struct EtrigOutputs {
  bool busy = false;
  bool done = false;
  bool error = false;
  bool aborted = false;

  friend bool operator==(const EtrigOutputs&, const EtrigOutputs&) = default;
};

inline constexpr EtrigOutputs OutputsOf(ExecState s) noexcept {
  return {IsBusy(s), s == ExecState::kDone, s == ExecState::kError, s == ExecState::kAborted};
}

/// Rebuilds the state from raw output flags; throws on a flag combination no
/// conforming block can produce.
inline ExecState StateFromOutputs(const EtrigOutputs& o) {
  int terminal = int(o.done) + int(o.error) + int(o.aborted);
  if (terminal > 1) throw EngineFault("function block conformance: more than one of xDone/xError/xAborted set");
  if (terminal == 1 && o.busy) throw EngineFault("function block conformance: xBusy set together with a terminal flag");
  if (o.done) return ExecState::kDone;
  if (o.error) return ExecState::kError;
  if (o.aborted) return ExecState::kAborted;
  return o.busy ? ExecState::kBusy : ExecState::kIdle;
}

// ============================================================================
// FunctionBlock
// ============================================================================

/// Common surface: exactly one Cycle() call per scan cycle.
class FunctionBlock {
 public:
  virtual ~FunctionBlock() = default;

  ExecState Cycle(EtrigInputs in, long long cycle) {
    if (cycle == last_cycle_) {
      throw EngineFault("function block invoked twice in cycle " + std::to_string(cycle));
    }
    last_cycle_ = cycle;
    inputs_ = in;
    DoCycle(in, cycle);
    return state_;
  }

  ExecState state() const noexcept { return state_; }
  EtrigOutputs outputs() const noexcept { return OutputsOf(state_); }
  const EtrigInputs& last_inputs() const noexcept { return inputs_; }
  long long last_cycle() const noexcept { return last_cycle_; }

 protected:
  virtual void DoCycle(EtrigInputs in, long long cycle) = 0;

  ExecState state_ = ExecState::kIdle;

 private:
  EtrigInputs inputs_;
  long long last_cycle_ = -1;
};

/// Edge-triggered block with abort. Subclasses supply the work.
class EtrigA : public FunctionBlock {
 protected:
  virtual void OnStart(long long /*cycle*/) {}
  /// Running keeps the block Busy; Success/Failure complete it.
  virtual NodeStatus OnStep(long long cycle) = 0;
  /// Called on the abort request and each following call while Aborting.
  /// Returns true once the work has stopped.
  virtual bool OnAbort(long long /*cycle*/) { return true; }
  virtual void OnReset() {}

  void DoCycle(EtrigInputs in, long long cycle) final {
    const bool rising = in.execute && !prev_execute_;
    prev_execute_ = in.execute;
    switch (state_) {
      case ExecState::kIdle:
        if (rising && !in.abort) Start(cycle);
        break;
      case ExecState::kBusy:
        if (in.abort) {
          state_ = ExecState::kAborting;
          if (OnAbort(cycle)) state_ = ExecState::kAborted;
        } else {
          Step(cycle);
        }
        break;
      case ExecState::kAborting:
        if (OnAbort(cycle)) state_ = ExecState::kAborted;
        break;
      case ExecState::kDone:
      case ExecState::kError:
      case ExecState::kAborted:
        if (rising && !in.abort) {
          OnReset();
          Start(cycle);
        } else if (!in.execute) {
          state_ = ExecState::kIdle;
          OnReset();
        }
        break;
    }
  }

 private:
  void Start(long long cycle) {
    state_ = ExecState::kBusy;
    OnStart(cycle);
    Step(cycle);
  }

  void Step(long long cycle) {
    switch (OnStep(cycle)) {
      case NodeStatus::kRunning: state_ = ExecState::kBusy; break;
      case NodeStatus::kSuccess: state_ = ExecState::kDone; break;
      case NodeStatus::kFailure: state_ = ExecState::kError; break;
    }
  }

  bool prev_execute_ = false;
};

/// Condition block: re-evaluated on every call while xExecute is high,
/// Idle otherwise. Never Busy.
class LevelCondition : public FunctionBlock {
 protected:
  virtual bool Evaluate(long long cycle) = 0;

  void DoCycle(EtrigInputs in, long long cycle) final {
    if (!in.execute) {
      state_ = ExecState::kIdle;
      return;
    }
    state_ = Evaluate(cycle) ? ExecState::kDone : ExecState::kError;
  }
};

}  // namespace plcbt

#endif  // PLCBT_FUNCTION_BLOCK_HPP_
