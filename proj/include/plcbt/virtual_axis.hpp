/**
 * @file virtual_axis.hpp
 * @brief Simulated motion axis with PLCopen-style function blocks (Power,
 *        Reset, MoveAbsolute, ReadStatus) and the BT leaf bindings that
 *        drive it from either engine.
 *
 * Per plant cycle, after the BT scan:
 *   1. axis step: fault injection first, then constant-velocity kinematics
 *   2. MC_ReadStatus samples the axis state
 *   3. MC_Power (level) with Enable = power latch or the Power request
 *   4. the Power, Reset and MoveAbsolute FBs, each behind an adapter port
 *
 * BT actions talk to the edge-triggered FBs through FbPort adapters, so the
 * same bindings serve the cyclic engine and the event engine.
 */

#ifndef PLCBT_VIRTUAL_AXIS_HPP_
#define PLCBT_VIRTUAL_AXIS_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plcbt/adapter.hpp"
#include "plcbt/cyclic_engine.hpp"
#include "plcbt/event_engine.hpp"
#include "plcbt/function_block.hpp"
#include "plcbt/tree.hpp"

namespace plcbt {

enum class AxisState : std::uint8_t { kDisabled, kStandstill, kDiscreteMotion, kErrorStop };

inline constexpr std::array<AxisState, 4> kAxisStates{AxisState::kDisabled, AxisState::kStandstill,
                                                      AxisState::kDiscreteMotion, AxisState::kErrorStop};

inline constexpr std::string_view ToString(AxisState s) noexcept {
  switch (s) {
    case AxisState::kDisabled: return "DISABLED";
    case AxisState::kStandstill: return "STANDSTILL";
    case AxisState::kDiscreteMotion: return "DISCRETE_MOTION";
    case AxisState::kErrorStop: return "ERROR_STOP";
  }
  return "UNKNOWN";
}

/// Position in mm, velocity in mm/s, cycle time in s.
struct AxisModel {
  double position = 0.0;
  double velocity = 0.0;
  double target = 0.0;
  double cycle_time = 0.01;
  std::optional<long long> fault_at_cycle;
  AxisState state = AxisState::kDisabled;

  /// One scan cycle of kinematics. Returns true when the fault fires.
  bool Step(long long cycle) {
    if (fault_at_cycle && cycle == *fault_at_cycle) {
      state = AxisState::kErrorStop;
      return true;
    }
    if (state != AxisState::kDiscreteMotion) return false;
    const double step = velocity * cycle_time;
    const double remaining = target - position;
    // Tolerance absorbs accumulated rounding of non-representable steps.
    if (std::abs(remaining) <= step * (1.0 + 1e-9)) {
      position = target;
      state = AxisState::kStandstill;
    } else {
      position += remaining > 0 ? step : -step;
    }
    return false;
  }
};

/// "cycle;axis;STATE;position" with 3 decimals.
inline std::string AxisTelemetry(long long cycle, const AxisModel& m) {
  char pos[64];
  std::snprintf(pos, sizeof pos, "%.3f", m.position);
  return std::to_string(cycle) + ";axis;" + std::string(ToString(m.state)) + ";" + pos;
}

// ============================================================================
// Motion-control function blocks
// ============================================================================

/// Level-controlled: Enable true powers a disabled axis, false disables it.
/// Reports Done while Status is true.
class McPower : public FunctionBlock {
 public:
  explicit McPower(AxisModel& axis) : axis_(axis) {}
  bool status() const noexcept { return state_ == ExecState::kDone; }

 protected:
  void DoCycle(EtrigInputs in, long long) override {
    if (in.execute) {
      if (axis_.state == AxisState::kDisabled) axis_.state = AxisState::kStandstill;
    } else if (axis_.state != AxisState::kErrorStop) {
      axis_.state = AxisState::kDisabled;
    }
    state_ = axis_.state == AxisState::kDisabled ? ExecState::kIdle : ExecState::kDone;
  }

 private:
  AxisModel& axis_;
};

/// Level-controlled: one flag per axis state, exactly one set.
class McReadStatus : public FunctionBlock {
 public:
  explicit McReadStatus(const AxisModel& axis) : axis_(axis) {}

  const std::array<bool, 4>& flags() const noexcept { return flags_; }
  bool Is(AxisState s) const noexcept { return flags_[static_cast<std::size_t>(s)]; }

 protected:
  void DoCycle(EtrigInputs in, long long) override {
    flags_.fill(false);
    flags_[static_cast<std::size_t>(axis_.state)] = true;
    state_ = in.execute ? ExecState::kDone : ExecState::kIdle;
  }

 private:
  const AxisModel& axis_;
  std::array<bool, 4> flags_{true, false, false, false};
};

/// Edge: accepted in ErrorStop only; Busy on the edge, Standstill and Done on
/// the next cycle.
class McReset : public EtrigA {
 public:
  explicit McReset(AxisModel& axis) : axis_(axis) {}

 protected:
  void OnStart(long long cycle) override {
    started_ = cycle;
    accepted_ = axis_.state == AxisState::kErrorStop;
  }
  NodeStatus OnStep(long long cycle) override {
    if (!accepted_) return NodeStatus::kFailure;
    if (cycle == started_) return NodeStatus::kRunning;
    axis_.state = AxisState::kStandstill;
    return NodeStatus::kSuccess;
  }

 private:
  AxisModel& axis_;
  long long started_ = -1;
  bool accepted_ = false;
};

/// Edge: accepted in Standstill only; Busy while moving, Done once the axis
/// stands still at the target. A fault during the move fails it; an abort
/// stops the axis where it is.
class McMoveAbsolute : public EtrigA {
 public:
  explicit McMoveAbsolute(AxisModel& axis) : axis_(axis) {}

  void SetParams(double target, double velocity) {
    target_ = target;
    velocity_ = velocity;
  }

 protected:
  void OnStart(long long) override {
    accepted_ = axis_.state == AxisState::kStandstill && velocity_ > 0.0 && std::isfinite(target_);
    if (!accepted_) return;
    axis_.state = AxisState::kDiscreteMotion;
    axis_.target = target_;
    axis_.velocity = velocity_;
  }
  NodeStatus OnStep(long long) override {
    if (!accepted_ || axis_.state == AxisState::kErrorStop) return NodeStatus::kFailure;
    if (axis_.state == AxisState::kStandstill && axis_.position == target_) return NodeStatus::kSuccess;
    if (axis_.state != AxisState::kDiscreteMotion) return NodeStatus::kFailure;
    return NodeStatus::kRunning;
  }
  bool OnAbort(long long) override {
    if (axis_.state == AxisState::kDiscreteMotion) axis_.state = AxisState::kStandstill;
    return true;
  }

 private:
  AxisModel& axis_;
  double target_ = 0.0;
  double velocity_ = 0.0;
  bool accepted_ = false;
};

/// Edge-triggered front of MC_Power: latches the Enable request and is Done
/// once the axis reports powered.
class PowerRequest : public EtrigA {
 public:
  PowerRequest(bool& latch, const McPower& power) : latch_(latch), power_(power) {}

 protected:
  void OnStart(long long) override { latch_ = true; }
  NodeStatus OnStep(long long) override { return power_.status() ? NodeStatus::kSuccess : NodeStatus::kRunning; }

 private:
  bool& latch_;
  const McPower& power_;
};

// ============================================================================
// Plant
// ============================================================================

struct AxisConfig {
  double cycle_time = 0.01;
  std::optional<long long> fault_at_cycle;
  double start_position = 0.0;
};

class AxisPlant : public Plant {
 public:
  explicit AxisPlant(AxisConfig cfg = {})
      : power_(axis_), read_status_(axis_), reset_(axis_), move_(axis_), power_request_(power_latch_, power_) {
    if (!(cfg.cycle_time > 0.0)) throw std::invalid_argument("cycle time must be > 0");
    axis_.cycle_time = cfg.cycle_time;
    axis_.fault_at_cycle = cfg.fault_at_cycle;
    axis_.position = cfg.start_position;
  }

  AxisPlant(const AxisPlant&) = delete;
  AxisPlant& operator=(const AxisPlant&) = delete;

  void Cycle(long long cycle) override {
    axis_.Step(cycle);
    read_status_.Cycle({true, false}, cycle);
    // Enable follows the request in the same cycle it is raised.
    while (auto m = power_port_.to_fb.Receive()) power_port_.adapter.OnBt(*m);
    power_.Cycle({power_latch_ || power_port_.adapter.command().execute, false}, cycle);
    power_port_.Scan(power_request_, cycle);
    reset_port_.Scan(reset_, cycle);
    move_port_.Scan(move_, cycle);
    samples_.push_back(axis_.position);
  }

  std::vector<std::string> Telemetry(long long cycle) const override { return {AxisTelemetry(cycle, axis_)}; }

  const AxisModel& axis() const noexcept { return axis_; }
  const McReadStatus& read_status() const noexcept { return read_status_; }
  const McMoveAbsolute& move() const noexcept { return move_; }
  const McReset& reset() const noexcept { return reset_; }

  FbPort& power_port() noexcept { return power_port_; }
  FbPort& reset_port() noexcept { return reset_port_; }
  FbPort& move_port() noexcept { return move_port_; }
  void SetMoveParams(double target, double velocity) { move_.SetParams(target, velocity); }

  /// Axis position after every plant cycle so far.
  const std::vector<double>& samples() const noexcept { return samples_; }

 private:
  AxisModel axis_;
  bool power_latch_ = false;
  McPower power_;
  McReadStatus read_status_;
  McReset reset_;
  McMoveAbsolute move_;
  PowerRequest power_request_;
  FbPort power_port_, reset_port_, move_port_;
  std::vector<double> samples_;
};

// ============================================================================
// Bindings
// ============================================================================

enum class ParamType { kNumber, kString, kBool };

struct ParamSchema {
  std::string name;
  ParamType type;
  bool required = true;
};

/// Checks `params` against the binding's schema. Unknown or mistyped
/// parameters are load-time binding errors.
inline void CheckParams(const NodeSpec& n, const std::vector<ParamSchema>& schema) {
  for (const auto& [key, value] : n.binding.params) {
    const ParamSchema* s = nullptr;
    for (const auto& x : schema) {
      if (x.name == key) s = &x;
    }
    if (!s) throw BindingError("binding '" + n.binding.name + "' of node '" + n.id + "' has no parameter '" + key + "'");
    const bool ok = (s->type == ParamType::kNumber && std::holds_alternative<double>(value)) ||
                    (s->type == ParamType::kString && std::holds_alternative<std::string>(value)) ||
                    (s->type == ParamType::kBool && std::holds_alternative<bool>(value));
    if (!ok) throw BindingError("parameter '" + key + "' of node '" + n.id + "' has the wrong type");
  }
  for (const auto& s : schema) {
    if (s.required && !n.binding.params.contains(s.name)) {
      throw BindingError("node '" + n.id + "' misses parameter '" + s.name + "'");
    }
  }
}

/// Cyclic-engine action talking to an FB through its port.
class PortAction : public EtrigA {
 public:
  PortAction(FbPort& port, std::function<void()> before_run = {})
      : port_(port), before_run_(std::move(before_run)) {}

 protected:
  void OnStart(long long) override {
    verdict_.reset();
    if (before_run_) before_run_();
    port_.to_fb.Send(client_.Run());
  }
  NodeStatus OnStep(long long) override {
    Drain();
    return verdict_.value_or(NodeStatus::kRunning);
  }
  bool OnAbort(long long) override {
    if (auto h = client_.Halt()) port_.to_fb.Send(*h);
    Drain();
    return !client_.halting();
  }

 private:
  void Drain() {
    while (auto m = port_.to_bt.Receive()) {
      if (auto v = client_.Accept(*m)) verdict_ = v;
    }
  }

  FbPort& port_;
  std::function<void()> before_run_;
  SyncClient client_;
  std::optional<NodeStatus> verdict_;
};

class StatusCondition : public LevelCondition {
 public:
  StatusCondition(const McReadStatus& status, std::function<bool(const McReadStatus&)> pred)
      : status_(status), pred_(std::move(pred)) {}

 protected:
  bool Evaluate(long long) override { return pred_(status_); }

 private:
  const McReadStatus& status_;
  std::function<bool(const McReadStatus&)> pred_;
};

/// Event-engine action: same protocol, answered whenever the FB finishes.
class PortEventLeaf : public EventLeaf {
 public:
  PortEventLeaf(FbPort& port, std::function<void()> before_run = {})
      : port_(port), before_run_(std::move(before_run)) {}

  void OnRun(long long) override {
    if (before_run_) before_run_();
    port_.to_fb.Send(client_.Run());
  }
  void OnHalt(long long) override {
    if (auto h = client_.Halt()) port_.to_fb.Send(*h);
  }
  std::optional<NodeStatus> Poll(long long) override {
    std::optional<NodeStatus> v;
    while (auto m = port_.to_bt.Receive()) {
      if (auto x = client_.Accept(*m)) v = x;
    }
    return v;
  }
  bool Pending() const override { return client_.active(); }

 private:
  FbPort& port_;
  std::function<void()> before_run_;
  SyncClient client_;
};

/// Event-engine condition: samples ReadStatus in the round after run.
class StatusEventLeaf : public EventLeaf {
 public:
  StatusEventLeaf(const McReadStatus& status, std::function<bool(const McReadStatus&)> pred)
      : status_(status), pred_(std::move(pred)) {}

  void OnRun(long long round) override { due_ = round + 1; }
  void OnHalt(long long) override { due_ = -1; }
  std::optional<NodeStatus> Poll(long long round) override {
    if (due_ < 0 || round < due_) return std::nullopt;
    due_ = -1;
    return pred_(status_) ? NodeStatus::kSuccess : NodeStatus::kFailure;
  }
  bool Pending() const override { return due_ >= 0; }

 private:
  const McReadStatus& status_;
  std::function<bool(const McReadStatus&)> pred_;
  long long due_ = -1;
};

/// Names of the axis bindings: actions Power, Reset, MoveTo(pos, vel);
/// conditions AxisPowered, NoAxisError.
inline bool IsAxisBinding(const std::string& name) {
  return name == "Power" || name == "Reset" || name == "MoveTo" || name == "AxisPowered" || name == "NoAxisError";
}

namespace detail {

inline std::function<bool(const McReadStatus&)> AxisPredicate(const NodeSpec& n) {
  const bool known = n.binding.name == "AxisPowered" || n.binding.name == "NoAxisError";
  if (n.kind != NodeKind::kCondition || !known) {
    throw BindingError("'" + n.binding.name + "' is " + (known ? "a condition" : "an action") + " binding");
  }
  CheckParams(n, {});
  if (n.binding.name == "AxisPowered") return [](const McReadStatus& s) { return !s.Is(AxisState::kDisabled); };
  return [](const McReadStatus& s) { return !s.Is(AxisState::kErrorStop); };
}

struct AxisActionParts {
  FbPort* port;
  std::function<void()> before_run;
};

inline AxisActionParts AxisAction(AxisPlant& plant, const NodeSpec& n) {
  if (n.kind != NodeKind::kAction || n.binding.name == "AxisPowered" || n.binding.name == "NoAxisError") {
    throw BindingError("'" + n.binding.name + "' is " + (n.kind == NodeKind::kAction ? "a condition" : "an action") +
                       " binding");
  }
  if (n.binding.name == "Power") {
    CheckParams(n, {});
    return {&plant.power_port(), {}};
  }
  if (n.binding.name == "Reset") {
    CheckParams(n, {});
    return {&plant.reset_port(), {}};
  }
  CheckParams(n, {{"pos", ParamType::kNumber}, {"vel", ParamType::kNumber}});
  const double pos = std::get<double>(n.binding.params.at("pos"));
  const double vel = std::get<double>(n.binding.params.at("vel"));
  return {&plant.move_port(), [&plant, pos, vel] { plant.SetMoveParams(pos, vel); }};
}

}  // namespace detail

/// Cyclic-engine leaves: axis bindings first, scripted leaves otherwise.
inline LeafFactory AxisLeafFactory(AxisPlant& plant) {
  return [&plant](const NodeSpec& n) -> std::unique_ptr<FunctionBlock> {
    if (!IsAxisBinding(n.binding.name)) return MakeScriptedLeaf(n);
    if (n.kind == NodeKind::kCondition) {
      return std::make_unique<StatusCondition>(plant.read_status(), detail::AxisPredicate(n));
    }
    auto parts = detail::AxisAction(plant, n);
    return std::make_unique<PortAction>(*parts.port, std::move(parts.before_run));
  };
}

/// Event-engine leaves: axis bindings first, scripted leaves otherwise.
inline EventLeafFactory AxisEventLeafFactory(AxisPlant& plant) {
  return [&plant](const NodeSpec& n) -> std::unique_ptr<EventLeaf> {
    if (!IsAxisBinding(n.binding.name)) return MakeScriptedEventLeaf(n);
    if (n.kind == NodeKind::kCondition) {
      return std::make_unique<StatusEventLeaf>(plant.read_status(), detail::AxisPredicate(n));
    }
    auto parts = detail::AxisAction(plant, n);
    return std::make_unique<PortEventLeaf>(*parts.port, std::move(parts.before_run));
  };
}

}  // namespace plcbt

#endif  // PLCBT_VIRTUAL_AXIS_HPP_
