/**
 * @file adapter.hpp
 * @brief Adapter between the asynchronous BT action protocol
 *        ({run, halt} / {succ, fail}) and an edge-triggered function block
 *        ({xExecute, xAbort} / {xDone, xError, xAborted}).
 *
 * The BT side talks SyncMessages carrying an activation sequence number; the
 * FB side is cycle-synchronous: the adapter's command is written to the FB on
 * its next scan and the FB outputs are handed back after that scan.
 */

#ifndef PLCBT_ADAPTER_HPP_
#define PLCBT_ADAPTER_HPP_

#include <charconv>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "plcbt/function_block.hpp"
#include "plcbt/lts.hpp"
#include "plcbt/status.hpp"

namespace plcbt {

// ============================================================================
// State machines for composition
// ============================================================================

/// BT node state machine seen by its parent. The self-loops are the ignore
/// set: halt at rest, and a late fail answering an activation halted before.
inline Lts ProcessLts() {
  Lts m;
  m.name = "bt";
  m.states = {"Idle", "Running", "Success", "Failure"};
  m.initial = "Idle";
  m.inputs = {"run", "halt"};
  m.outputs = {"succ", "fail"};
  m.transitions = {
      {"Idle", "run", "Running"},      {"Success", "run", "Running"},   {"Failure", "run", "Running"},
      {"Running", "succ", "Success"},  {"Running", "fail", "Failure"},  {"Running", "halt", "Idle"},
      {"Idle", "halt", "Idle"},        {"Success", "halt", "Success"},  {"Failure", "halt", "Failure"},
      {"Idle", "fail", "Idle"},
  };
  return m;
}

/// Edge-triggered FB with abort. `xExecute` is a rising edge and `reset` is
/// xExecute going low; xAbort outside Busy is ignored.
inline Lts EtrigLts() {
  Lts m;
  m.name = "fb";
  m.states = {"Idle", "Busy", "Done", "Error", "Aborting", "Aborted"};
  m.initial = "Idle";
  m.inputs = {"xExecute", "xAbort", "reset"};
  m.outputs = {"xDone", "xError", "xAborted"};
  m.transitions = {
      {"Idle", "xExecute", "Busy"},    {"Busy", "xDone", "Done"},         {"Busy", "xError", "Error"},
      {"Busy", "xAbort", "Aborting"},  {"Aborting", "xAborted", "Aborted"}, {"Done", "reset", "Idle"},
      {"Error", "reset", "Idle"},      {"Aborted", "reset", "Idle"},      {"Idle", "xAbort", "Idle"},
      {"Done", "xAbort", "Done"},      {"Error", "xAbort", "Error"},      {"Aborted", "xAbort", "Aborted"},
  };
  return m;
}

inline std::vector<SyncPair> AdapterSyncMap() {
  return {{"run", "xExecute"}, {"halt", "xAbort"}, {"succ", "xDone"}, {"fail", "xError"}, {"fail", "xAborted"}};
}

inline Lts AdapterLts() { return Compose(ProcessLts(), EtrigLts(), AdapterSyncMap()); }

/// BT-side inputs that only the parent can issue; excluded when following
/// the autonomous continuation of a halt.
inline std::set<std::string> AdapterEnvironmentEvents() { return {"run/xExecute", "halt/xAbort"}; }

// ============================================================================
// Wire messages
// ============================================================================

enum class SyncKind : std::uint8_t { kRun, kHalt, kSucc, kFail };

inline constexpr std::string_view ToString(SyncKind k) noexcept {
  switch (k) {
    case SyncKind::kRun: return "RUN";
    case SyncKind::kHalt: return "HALT";
    case SyncKind::kSucc: return "SUCC";
    case SyncKind::kFail: return "FAIL";
  }
  return "UNKNOWN";
}

struct SyncMessage {
  SyncKind kind = SyncKind::kRun;
  std::uint64_t seq = 0;

  /// "<seq>:<RUN|HALT|SUCC|FAIL>"
  std::string Encode() const { return std::to_string(seq) + ":" + std::string(ToString(kind)); }

  static SyncMessage Decode(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) throw std::invalid_argument("sync message without sequence");
    SyncMessage m;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + colon, m.seq);
    if (ec != std::errc() || ptr != line.data() + colon) throw std::invalid_argument("bad sequence number");
    const std::string_view k = line.substr(colon + 1);
    for (SyncKind c : {SyncKind::kRun, SyncKind::kHalt, SyncKind::kSucc, SyncKind::kFail}) {
      if (k == ToString(c)) {
        m.kind = c;
        return m;
      }
    }
    throw std::invalid_argument("unknown sync message kind '" + std::string(k) + "'");
  }

  friend bool operator==(const SyncMessage&, const SyncMessage&) = default;
};

/// In-process loopback link carrying encoded lines.
class LoopbackChannel {
 public:
  void Send(const SyncMessage& m) { lines_.push_back(m.Encode() + "\n"); }
  std::optional<SyncMessage> Receive() {
    if (lines_.empty()) return std::nullopt;
    std::string l = std::move(lines_.front());
    lines_.pop_front();
    return SyncMessage::Decode(l);
  }
  bool empty() const noexcept { return lines_.empty(); }

 private:
  std::deque<std::string> lines_;
};

// ============================================================================
// Runtime adapter (FB side) and client (BT side)
// ============================================================================

/// Every RUN is answered exactly once: SUCC/FAIL from the FB outcome, or
/// FAIL when the activation is withdrawn before the FB saw it.
class EtrigAdapter {
 public:
  /// BT request; returns the FB command for the next FB scan.
  EtrigInputs OnBt(const SyncMessage& m) {
    switch (m.kind) {
      case SyncKind::kRun:
        if (queued_) outbox_.push_back({SyncKind::kFail, seq_});  // superseded before it started
        seq_ = m.seq;
        if (active_ && IsBusy(fb_)) {
          // Previous activation still running: stop it, start afterwards.
          cmd_.abort = true;
          queued_ = true;
        } else if (active_) {
          // Previous activation commanded but not yet scanned: replace it.
          outbox_.push_back({SyncKind::kFail, active_seq_});
          Begin();
        } else if (fb_ == ExecState::kIdle) {
          Begin();
        } else {
          // Latched or finalizing: force the FB back to Idle first.
          queued_ = true;
          if (!IsBusy(fb_)) cmd_ = {false, false};
        }
        break;
      case SyncKind::kHalt:
        if (m.seq != seq_) break;  // stale
        if (queued_) {
          queued_ = false;
          outbox_.push_back({SyncKind::kFail, seq_});
        } else if (active_ && IsBusy(fb_)) {
          cmd_.abort = true;
        } else if (active_) {
          // Commanded but not yet scanned: withdraw the edge.
          active_ = false;
          cmd_ = {false, false};
          outbox_.push_back({SyncKind::kFail, active_seq_});
        } else if (!IsBusy(fb_)) {
          cmd_.execute = false;
        }
        break;
      default:
        throw std::invalid_argument("adapter: BT side sent " + std::string(ToString(m.kind)));
    }
    return cmd_;
  }

  /// FB outputs after its scan; returns the answer for the BT, if any.
  /// Throws EngineFault on a flag combination no conforming FB produces.
  std::optional<SyncMessage> OnFb(const EtrigOutputs& o) {
    fb_ = StateFromOutputs(o);
    std::optional<SyncMessage> answer;
    if (active_) {
      if (fb_ == ExecState::kDone) answer = SyncMessage{SyncKind::kSucc, active_seq_};
      if (fb_ == ExecState::kError || fb_ == ExecState::kAborted) answer = SyncMessage{SyncKind::kFail, active_seq_};
      if (answer) {
        active_ = false;
        cmd_ = {false, false};
      }
    }
    if (queued_ && !active_) {
      if (fb_ == ExecState::kIdle) {
        Begin();
      } else if (!IsBusy(fb_)) {
        cmd_ = {false, false};
      }
    }
    return answer;
  }

  /// Answers produced by BT requests alone (withdrawn activations).
  std::vector<SyncMessage> TakeOutbox() {
    std::vector<SyncMessage> out(outbox_.begin(), outbox_.end());
    outbox_.clear();
    return out;
  }

  EtrigInputs command() const noexcept { return cmd_; }
  ExecState fb_state() const noexcept { return fb_; }
  bool active() const noexcept { return active_; }
  bool queued() const noexcept { return queued_; }
  std::uint64_t seq() const noexcept { return seq_; }

  friend bool operator==(const EtrigAdapter&, const EtrigAdapter&) = default;

 private:
  void Begin() {
    active_ = true;
    queued_ = false;
    active_seq_ = seq_;
    cmd_ = {true, false};
  }

  EtrigInputs cmd_;
  ExecState fb_ = ExecState::kIdle;
  std::uint64_t seq_ = 0;
  std::uint64_t active_seq_ = 0;
  bool active_ = false;
  bool queued_ = false;
  std::deque<SyncMessage> outbox_;
};

/// BT-side endpoint: numbers activations and drops answers to older ones.
/// After Halt() the answer to the halted activation is the acknowledgment
/// that the FB has stopped.
class SyncClient {
 public:
  SyncMessage Run() {
    active_ = true;
    halting_ = false;
    return {SyncKind::kRun, ++seq_};
  }

  /// Halt of the current activation; nothing to send when it already ended.
  std::optional<SyncMessage> Halt() {
    if (!active_) return std::nullopt;
    active_ = false;
    halting_ = true;
    return SyncMessage{SyncKind::kHalt, seq_};
  }

  /// Verdict for the current activation, or nothing for a stale answer or a
  /// halt acknowledgment.
  std::optional<NodeStatus> Accept(const SyncMessage& m) {
    const bool answer = m.kind == SyncKind::kSucc || m.kind == SyncKind::kFail;
    if (answer && halting_ && m.seq == seq_) {
      halting_ = false;
      return std::nullopt;
    }
    if (!answer || !active_ || m.seq != seq_) {
      ++discarded_;
      return std::nullopt;
    }
    active_ = false;
    return m.kind == SyncKind::kSucc ? NodeStatus::kSuccess : NodeStatus::kFailure;
  }

  bool active() const noexcept { return active_; }
  bool halting() const noexcept { return halting_; }
  std::uint64_t seq() const noexcept { return seq_; }
  int discarded() const noexcept { return discarded_; }

  friend bool operator==(const SyncClient&, const SyncClient&) = default;

 private:
  std::uint64_t seq_ = 0;
  bool active_ = false;
  bool halting_ = false;
  int discarded_ = 0;
};

/// One FB behind an adapter, with the BT-side client and both link
/// directions. The FB owner calls Scan once per cycle.
struct FbPort {
  EtrigAdapter adapter;
  LoopbackChannel to_fb;
  LoopbackChannel to_bt;

  /// Applies BT requests, scans the FB with the adapter command, and sends
  /// the answers back.
  void Scan(FunctionBlock& fb, long long cycle) {
    while (auto m = to_fb.Receive()) adapter.OnBt(*m);
    for (const auto& a : adapter.TakeOutbox()) to_bt.Send(a);
    fb.Cycle(adapter.command(), cycle);
    if (auto a = adapter.OnFb(fb.outputs())) to_bt.Send(*a);
  }
};

}  // namespace plcbt

#endif  // PLCBT_ADAPTER_HPP_
