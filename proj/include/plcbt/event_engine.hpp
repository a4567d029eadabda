/**
 * @file event_engine.hpp
 * @brief Event-driven execution of a behavior tree as a network of
 *        asynchronous node processes exchanging run/halt/succ/fail signals.
 *
 * Leaves are ProcessSMs {Idle, Running, Success, Failure}. Control nodes are
 * binary execution control charts (ECCs): an n-ary Sequence or Fallback is
 * decomposed into a right-leaning chain of 2-child ECCs. Processes live in
 * runtimes, each with one FIFO queue; runtimes are connected by reliable FIFO
 * channels with a delivery latency counted in rounds.
 *
 * One round: channel arrivals are enqueued, then every runtime in turn polls
 * its leaves and drains its queue one signal at a time (run-to-completion).
 * A signal crossing runtimes in round r is delivered in round r + 1 + latency.
 */

#ifndef PLCBT_EVENT_ENGINE_HPP_
#define PLCBT_EVENT_ENGINE_HPP_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plcbt/cyclic_engine.hpp"
#include "plcbt/reference.hpp"
#include "plcbt/status.hpp"
#include "plcbt/tree.hpp"

namespace plcbt {

// ============================================================================
// Signals and ports
// ============================================================================

enum class SignalKind : std::uint8_t { kRun, kHalt, kSucc, kFail };

inline constexpr std::string_view ToString(SignalKind k) noexcept {
  switch (k) {
    case SignalKind::kRun: return "run";
    case SignalKind::kHalt: return "halt";
    case SignalKind::kSucc: return "succ";
    case SignalKind::kFail: return "fail";
  }
  return "unknown";
}

inline constexpr bool IsCommand(SignalKind k) noexcept { return k == SignalKind::kRun || k == SignalKind::kHalt; }

inline constexpr std::string_view kParentPort = "PARENT";
inline constexpr std::string_view kEnvProcess = "env";

inline std::string ChildPort(std::size_t i) { return "CHILD_" + std::to_string(i + 1); }

struct PortRef {
  std::string process;
  std::string port;

  std::string ToString() const { return process + "." + port; }
  friend bool operator==(const PortRef&, const PortRef&) = default;
};

struct Signal {
  SignalKind kind = SignalKind::kRun;
  PortRef src;
  PortRef dst;

  friend bool operator==(const Signal&, const Signal&) = default;
};

// ============================================================================
// Processes
// ============================================================================

enum class ProcState : std::uint8_t { kIdle, kRunning, kSuccess, kFailure, kRunningChild1, kRunningChild2 };

inline constexpr std::string_view ToString(ProcState s) noexcept {
  switch (s) {
    case ProcState::kIdle: return "IDLE";
    case ProcState::kRunning: return "RUNNING";
    case ProcState::kSuccess: return "SUCCESS";
    case ProcState::kFailure: return "FAILURE";
    case ProcState::kRunningChild1: return "RUNNING_CHILD1";
    case ProcState::kRunningChild2: return "RUNNING_CHILD2";
  }
  return "UNKNOWN";
}

inline constexpr bool IsRunning(ProcState s) noexcept {
  return s == ProcState::kRunning || s == ProcState::kRunningChild1 || s == ProcState::kRunningChild2;
}

inline constexpr std::optional<NodeStatus> ToNodeStatus(ProcState s) noexcept {
  if (IsRunning(s)) return NodeStatus::kRunning;
  if (s == ProcState::kSuccess) return NodeStatus::kSuccess;
  if (s == ProcState::kFailure) return NodeStatus::kFailure;
  return std::nullopt;
}

struct DeliverResult {
  std::vector<Signal> emitted;
  std::optional<std::string> fault;  ///< conformance fault; state unchanged
  bool ignored = false;              ///< in the ignore set (duplicate, stale, halt at rest)
};

class Process {
 public:
  Process(std::string id, PortRef parent) : id_(std::move(id)), parent_(std::move(parent)) {}
  virtual ~Process() = default;

  const std::string& id() const noexcept { return id_; }
  const PortRef& parent() const noexcept { return parent_; }
  ProcState state() const noexcept { return state_; }

  /// Transitions into Success/Failure and succ/fail emissions, over the
  /// lifetime of the process. Equal for a conforming process.
  int terminal_entries() const noexcept { return terminal_entries_; }
  int verdicts_emitted() const noexcept { return verdicts_emitted_; }

  /// Consumes one signal: at most one transition, all its emissions returned.
  DeliverResult Deliver(const Signal& s, long long round) {
    if (s.dst.process != id_) return Fault("signal for '" + s.dst.process + "' delivered to '" + id_ + "'");
    const bool on_parent = s.dst.port == kParentPort;
    if (IsCommand(s.kind) != on_parent) {
      return Fault(std::string(ToString(s.kind)) + " on port " + s.dst.ToString());
    }
    DeliverResult r = DoDeliver(s, round);
    Count(r);
    return r;
  }

 protected:
  virtual DeliverResult DoDeliver(const Signal& s, long long round) = 0;

  Signal Up(SignalKind k) const { return {k, {id_, std::string(kParentPort)}, parent_}; }

  /// Moves to `next` and, for a terminal state, emits the verdict upward.
  void Enter(ProcState next, DeliverResult& r) {
    state_ = next;
    if (next == ProcState::kSuccess) r.emitted.push_back(Up(SignalKind::kSucc));
    if (next == ProcState::kFailure) r.emitted.push_back(Up(SignalKind::kFail));
    if (next == ProcState::kSuccess || next == ProcState::kFailure) ++terminal_entries_;
  }

  void Count(const DeliverResult& r) {
    for (const auto& e : r.emitted) {
      if (e.kind == SignalKind::kSucc || e.kind == SignalKind::kFail) ++verdicts_emitted_;
    }
  }

  static DeliverResult Fault(std::string what) {
    DeliverResult r;
    r.fault = std::move(what);
    return r;
  }

  static DeliverResult Ignored() {
    DeliverResult r;
    r.ignored = true;
    return r;
  }

  ProcState state_ = ProcState::kIdle;

 private:
  std::string id_;
  PortRef parent_;
  int terminal_entries_ = 0;
  int verdicts_emitted_ = 0;
};

/// Leaf behavior attached to a ProcessSM.
class EventLeaf {
 public:
  virtual ~EventLeaf() = default;
  virtual void OnRun(long long round) = 0;
  virtual void OnHalt(long long /*round*/) {}
  /// Verdict available in this round, if any. Consumes it.
  virtual std::optional<NodeStatus> Poll(long long round) = 0;
  /// True while a verdict is still to come.
  virtual bool Pending() const = 0;
};

using EventLeafFactory = std::function<std::unique_ptr<EventLeaf>(const NodeSpec&)>;

/// Replies with the final script value in the round after run arrives. A
/// script that never leaves Running never replies.
class ScriptedEventLeaf : public EventLeaf {
 public:
  explicit ScriptedEventLeaf(LeafScript script) : final_(script.Final()) {}

  void OnRun(long long round) override { due_ = final_ == NodeStatus::kRunning ? -1 : round + 1; }
  void OnHalt(long long) override { due_ = -1; }
  std::optional<NodeStatus> Poll(long long round) override {
    if (due_ < 0 || round < due_) return std::nullopt;
    due_ = -1;
    return final_;
  }
  bool Pending() const override { return due_ >= 0; }

 private:
  NodeStatus final_;
  long long due_ = -1;
};

inline std::unique_ptr<EventLeaf> MakeScriptedEventLeaf(const NodeSpec& n) {
  auto it = n.binding.params.find("script");
  if (it == n.binding.params.end() || !std::holds_alternative<std::string>(it->second)) {
    throw BindingError("unknown leaf binding '" + n.binding.name + "' for node '" + n.id + "'");
  }
  return std::make_unique<ScriptedEventLeaf>(LeafScript::Parse(std::get<std::string>(it->second)));
}

/// ProcessSM of an action or condition.
class LeafProcess : public Process {
 public:
  LeafProcess(std::string id, PortRef parent, std::unique_ptr<EventLeaf> leaf)
      : Process(std::move(id), std::move(parent)), leaf_(std::move(leaf)) {}

  EventLeaf& leaf() noexcept { return *leaf_; }
  const EventLeaf& leaf() const noexcept { return *leaf_; }

  /// Leaf verdict; only effective while Running.
  DeliverResult Complete(NodeStatus verdict) {
    if (state_ != ProcState::kRunning || verdict == NodeStatus::kRunning) return Ignored();
    DeliverResult r;
    Enter(verdict == NodeStatus::kSuccess ? ProcState::kSuccess : ProcState::kFailure, r);
    Count(r);
    return r;
  }

 protected:
  DeliverResult DoDeliver(const Signal& s, long long round) override {
    if (s.kind == SignalKind::kRun) {
      if (state_ == ProcState::kRunning) return Ignored();
      state_ = ProcState::kRunning;
      leaf_->OnRun(round);
      return {};
    }
    if (state_ != ProcState::kRunning) return Ignored();
    state_ = ProcState::kIdle;
    leaf_->OnHalt(round);
    return {};
  }

 private:
  std::unique_ptr<EventLeaf> leaf_;
};

/// Binary Sequence/Fallback ECC (one or two children).
///
///   Idle|Success|Failure --run-->   RunningChild1, run -> child 1
///   RunningChildX --pass verdict--> RunningChild(X+1), run -> next child
///   RunningChildX --pass verdict, last child--> Success|Failure upward
///   RunningChildX --deciding verdict--> Success|Failure upward
///   RunningChildX --halt-->         Idle, halt -> child X
///
/// Pass verdict is succ for Sequence, fail for Fallback. Verdicts from a
/// child that is not the running one are stale and ignored.
class ControlEcc : public Process {
 public:
  ControlEcc(std::string id, NodeKind kind, PortRef parent, std::vector<PortRef> children)
      : Process(std::move(id), std::move(parent)), kind_(kind), children_(std::move(children)) {
    if (!IsControl(kind_)) throw std::invalid_argument("ControlEcc: not a control kind");
    if (children_.empty() || children_.size() > 2) throw std::invalid_argument("ControlEcc: needs 1 or 2 children");
  }

  NodeKind kind() const noexcept { return kind_; }
  const std::vector<PortRef>& children() const noexcept { return children_; }

 protected:
  DeliverResult DoDeliver(const Signal& s, long long) override {
    DeliverResult r;
    const auto active = ActiveChild();
    switch (s.kind) {
      case SignalKind::kRun:
        if (active) return Ignored();
        state_ = ProcState::kRunningChild1;
        r.emitted.push_back(Down(SignalKind::kRun, 0));
        return r;
      case SignalKind::kHalt:
        if (!active) return Ignored();
        state_ = ProcState::kIdle;
        r.emitted.push_back(Down(SignalKind::kHalt, *active));
        return r;
      case SignalKind::kSucc:
      case SignalKind::kFail: {
        const auto from = ChildIndex(s.dst.port);
        if (!from) return Fault("unknown port " + s.dst.ToString());
        if (!active || *active != *from) return Ignored();
        const SignalKind pass = kind_ == NodeKind::kSequence ? SignalKind::kSucc : SignalKind::kFail;
        if (s.kind == pass && *from + 1 < children_.size()) {
          state_ = ProcState::kRunningChild2;
          r.emitted.push_back(Down(SignalKind::kRun, *from + 1));
        } else {
          Enter(s.kind == SignalKind::kSucc ? ProcState::kSuccess : ProcState::kFailure, r);
        }
        return r;
      }
    }
    return r;
  }

 private:
  std::optional<std::size_t> ActiveChild() const {
    if (state_ == ProcState::kRunningChild1) return 0;
    if (state_ == ProcState::kRunningChild2) return 1;
    return std::nullopt;
  }

  std::optional<std::size_t> ChildIndex(const std::string& port) const {
    for (std::size_t i = 0; i < children_.size(); ++i) {
      if (port == ChildPort(i)) return i;
    }
    return std::nullopt;
  }

  Signal Down(SignalKind k, std::size_t child) const { return {k, {id(), ChildPort(child)}, children_[child]}; }

  NodeKind kind_;
  std::vector<PortRef> children_;
};

// ============================================================================
// n-ary decomposition
// ============================================================================

struct BinaryNode {
  std::string id;
  NodeKind kind;
  std::vector<std::string> children;  ///< 1 or 2 process ids

  friend bool operator==(const BinaryNode&, const BinaryNode&) = default;
};

/// Right-leaning chain: K(c1..cn) -> K(c1, K(c2, ... K(c(n-1), cn))). The head
/// keeps `id`; inner links are named <id>/1, <id>/2, ...
inline std::vector<BinaryNode> ComposeNary(NodeKind kind, const std::string& id,
                                           const std::vector<std::string>& children) {
  if (!IsControl(kind)) throw std::invalid_argument("ComposeNary: not a control kind");
  if (children.size() < 2) throw std::invalid_argument("ComposeNary: needs n >= 2 children");
  std::vector<BinaryNode> out;
  std::string current = id;
  for (std::size_t i = 0; i + 2 < children.size(); ++i) {
    std::string next = id + "/" + std::to_string(i + 1);
    out.push_back({current, kind, {children[i], next}});
    current = std::move(next);
  }
  out.push_back({current, kind, {children[children.size() - 2], children.back()}});
  return out;
}

// ============================================================================
// Runtimes and channels
// ============================================================================

struct Placement {
  std::vector<std::string> runtimes{"rt0"};
  std::map<std::string, std::size_t> node_runtime;  ///< tree node id -> runtime; unlisted -> 0
};

/// Spreads nodes over `k` runtimes by pre-order index, so most links cross.
inline Placement SplitPlacement(const TreeSpec& spec, std::size_t k) {
  Placement p;
  p.runtimes.clear();
  for (std::size_t i = 0; i < std::max<std::size_t>(k, 1); ++i) p.runtimes.push_back("rt" + std::to_string(i));
  IndexedTree t(spec);
  for (std::size_t i = 0; i < t.size(); ++i) p.node_runtime[t.id(i)] = i % p.runtimes.size();
  return p;
}

struct QuiescenceResult {
  bool quiescent = false;
  long long rounds = 0;      ///< rounds executed in total
  long long signals = 0;     ///< signals delivered in total
  std::string snapshot;      ///< queues and channels when not quiescent
};

class EventSystem {
 public:
  /// `latency`: rounds added to every cross-runtime hop; `overrides` set it
  /// per (from, to) runtime pair.
  static EventSystem Build(const TreeSpec& spec, const EventLeafFactory& factory, Placement placement,
                           int latency = 0, std::map<std::pair<std::size_t, std::size_t>, int> overrides = {}) {
    if (latency < 0) throw std::invalid_argument("latency must be >= 0");
    for (const auto& [pair, l] : overrides) {
      if (l < 0) throw std::invalid_argument("latency must be >= 0");
    }
    EventSystem sys;
    IndexedTree tree(spec);
    sys.placement_ = std::move(placement);
    if (sys.placement_.runtimes.empty()) throw std::invalid_argument("placement needs at least one runtime");
    sys.latency_ = latency;
    sys.overrides_ = std::move(overrides);
    sys.queues_.resize(sys.placement_.runtimes.size());
    sys.leaves_by_rt_.resize(sys.placement_.runtimes.size());

    // Parent port of every tree node, filled in pre-order.
    std::vector<PortRef> parent_of(tree.size());
    parent_of[0] = {std::string(kEnvProcess), "ROOT"};
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const std::size_t rt = sys.RuntimeOfNode(tree.id(i));
      if (IsLeaf(tree.kind(i))) {
        auto leaf = factory(tree.node(i));
        if (!leaf) throw BindingError("leaf factory returned nothing for '" + tree.id(i) + "'");
        sys.Add(std::make_unique<LeafProcess>(tree.id(i), parent_of[i], std::move(leaf)), rt, tree.depth(i));
        sys.leaves_by_rt_[rt].push_back(sys.processes_.size() - 1);
        continue;
      }
      const auto& kids = tree.children(i);
      std::vector<std::string> kid_ids;
      for (auto c : kids) kid_ids.push_back(tree.id(c));
      std::vector<BinaryNode> chain =
          kid_ids.size() == 1 ? std::vector<BinaryNode>{{tree.id(i), tree.kind(i), kid_ids}}
                              : ComposeNary(tree.kind(i), tree.id(i), kid_ids);
      PortRef up = parent_of[i];
      std::size_t depth = tree.depth(i);
      for (const auto& b : chain) {
        std::vector<PortRef> ports;
        for (std::size_t j = 0; j < b.children.size(); ++j) {
          ports.push_back({b.children[j], std::string(kParentPort)});
          // Children that are tree nodes learn their parent port here.
          if (auto idx = tree.Find(b.children[j])) parent_of[*idx] = {b.id, ChildPort(j)};
        }
        sys.Add(std::make_unique<ControlEcc>(b.id, b.kind, up, std::move(ports)), rt, depth);
        up = {b.id, ChildPort(1)};
        ++depth;
      }
    }
    return sys;
  }

  EventSystem(EventSystem&&) noexcept = default;
  EventSystem& operator=(EventSystem&&) noexcept = default;

  /// Called at the end of every round (plant co-simulation hook).
  void SetRoundHook(std::function<void(long long)> hook) { round_hook_ = std::move(hook); }

  /// Sends run from the environment to the root.
  void Start() {
    started_ = true;
    Inject({SignalKind::kRun, {std::string(kEnvProcess), "ROOT"}, {processes_[0]->id(), std::string(kParentPort)}});
  }

  /// Enqueues a signal directly on the destination's runtime.
  void Inject(const Signal& s) { queues_[RuntimeOf(s.dst.process)].push_back(s); }

  /// Lets the leaves of runtime `rt` report verdicts due in this round.
  void PollLeaves(std::size_t rt) {
    for (std::size_t p : leaves_by_rt_.at(rt)) {
      auto& leaf = static_cast<LeafProcess&>(*processes_[p]);
      if (auto v = leaf.leaf().Poll(round_)) Apply(rt, p, leaf.Complete(*v));
    }
  }

  /// Dequeues one signal of runtime `rt` and delivers it. Returns the number
  /// of signals delivered (0 on an empty queue).
  std::size_t Step(std::size_t rt) {
    if (queues_.at(rt).empty()) return 0;
    Signal s = queues_[rt].front();
    queues_[rt].pop_front();
    trace_.push_back(Line(rt, {std::string(ToString(s.kind)), s.src.ToString(), s.dst.ToString()}));
    ++signals_;
    auto it = index_.find(s.dst.process);
    if (it == index_.end()) {
      faults_.push_back("round " + std::to_string(round_) + ": no process '" + s.dst.process + "'");
      return 1;
    }
    Apply(rt, it->second, processes_[it->second]->Deliver(s, round_));
    return 1;
  }

  /// One round: channel arrivals, then each runtime in turn polls its leaves
  /// and drains its queue (intra-runtime delivery takes no time). Returns the
  /// number of signals delivered.
  std::size_t Round() {
    for (auto& [key, ch] : channels_) {
      while (!ch.empty() && ch.front().first <= round_) {
        queues_[key.second].push_back(ch.front().second);
        ch.pop_front();
      }
    }
    std::size_t n = 0;
    for (std::size_t rt = 0; rt < queues_.size(); ++rt) {
      PollLeaves(rt);
      while (Step(rt) == 1) {
        if (++n > kMaxSignalsPerRound) throw EngineFault("event storm: more than " +
                                                         std::to_string(kMaxSignalsPerRound) + " signals in one round");
      }
    }
    if (round_hook_) round_hook_(round_);
    ++round_;
    return n;
  }

  bool Quiescent() const {
    for (const auto& q : queues_) {
      if (!q.empty()) return false;
    }
    for (const auto& [key, ch] : channels_) {
      if (!ch.empty()) return false;
    }
    for (const auto& rt : leaves_by_rt_) {
      for (std::size_t p : rt) {
        if (static_cast<const LeafProcess&>(*processes_[p]).leaf().Pending()) return false;
      }
    }
    return true;
  }

  /// Starts the tree if needed and runs rounds until quiescent or
  /// `max_rounds` rounds have been executed in this call.
  QuiescenceResult RunUntilQuiescent(long long max_rounds) {
    if (max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
    if (!started_) Start();
    QuiescenceResult r;
    for (long long i = 0; !Quiescent(); ++i) {
      if (i == max_rounds) {
        r.snapshot = Snapshot();
        r.rounds = round_;
        r.signals = signals_;
        return r;
      }
      Round();
    }
    r.quiescent = true;
    r.rounds = round_;
    r.signals = signals_;
    return r;
  }

  std::optional<NodeStatus> RootStatus() const { return ToNodeStatus(processes_[0]->state()); }

  ProcState state(const std::string& id) const { return processes_.at(index_.at(id))->state(); }

  /// (process id, state) for every process, in build order.
  std::vector<std::pair<std::string, std::string>> NodeStates() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : processes_) out.emplace_back(p->id(), std::string(ToString(p->state())));
    return out;
  }

  const std::vector<std::unique_ptr<Process>>& processes() const noexcept { return processes_; }
  std::size_t depth(const std::string& id) const { return depth_.at(index_.at(id)); }
  std::size_t NetworkDepth() const {
    std::size_t d = 0;
    for (auto x : depth_) d = std::max(d, x);
    return d;
  }
  int MaxLatency() const {
    int m = latency_;
    for (const auto& [k, l] : overrides_) m = std::max(m, l);
    return m;
  }
  bool IsDescendant(const std::string& ancestor, const std::string& id) const {
    for (std::size_t p = index_.at(id); p != kNone; p = parent_idx_[p]) {
      if (processes_[p]->id() == ancestor) return true;
    }
    return false;
  }

  long long round() const noexcept { return round_; }
  long long signals() const noexcept { return signals_; }
  const std::vector<std::string>& faults() const noexcept { return faults_; }
  const std::vector<std::string>& trace() const noexcept { return trace_; }
  const Placement& placement() const noexcept { return placement_; }
  std::size_t RuntimeOf(const std::string& process) const { return rt_of_.at(index_.at(process)); }

  /// Appends an external line (plant telemetry) to the trace.
  void Note(std::string line) { trace_.push_back(std::move(line)); }

  std::string TraceText() const {
    std::string out;
    for (const auto& l : trace_) out += l + '\n';
    return out;
  }

  std::string Snapshot() const {
    std::ostringstream os;
    for (std::size_t rt = 0; rt < queues_.size(); ++rt) {
      os << "queue " << placement_.runtimes[rt] << ':';
      for (const auto& s : queues_[rt]) os << ' ' << ToString(s.kind) << "->" << s.dst.ToString();
      os << '\n';
    }
    for (const auto& [key, ch] : channels_) {
      if (ch.empty()) continue;
      os << "channel " << placement_.runtimes[key.first] << "->" << placement_.runtimes[key.second] << ':';
      for (const auto& [at, s] : ch) os << ' ' << ToString(s.kind) << "->" << s.dst.ToString() << '@' << at;
      os << '\n';
    }
    for (const auto& rt : leaves_by_rt_) {
      for (std::size_t p : rt) {
        if (static_cast<const LeafProcess&>(*processes_[p]).leaf().Pending()) {
          os << "pending leaf " << processes_[p]->id() << '\n';
        }
      }
    }
    return os.str();
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  static constexpr std::size_t kMaxSignalsPerRound = 1'000'000;

  EventSystem() = default;

  std::size_t RuntimeOfNode(const std::string& node) const {
    auto it = placement_.node_runtime.find(node);
    if (it == placement_.node_runtime.end()) return 0;
    if (it->second >= placement_.runtimes.size()) {
      throw std::invalid_argument("node '" + node + "' placed on unknown runtime " + std::to_string(it->second));
    }
    return it->second;
  }

  void Add(std::unique_ptr<Process> p, std::size_t rt, std::size_t depth) {
    const std::size_t idx = processes_.size();
    index_[p->id()] = idx;
    auto parent = index_.find(p->parent().process);
    parent_idx_.push_back(parent == index_.end() ? kNone : parent->second);
    rt_of_.push_back(rt);
    depth_.push_back(depth);
    processes_.push_back(std::move(p));
  }

  int LatencyOf(std::size_t from, std::size_t to) const {
    auto it = overrides_.find({from, to});
    return it == overrides_.end() ? latency_ : it->second;
  }

  void Apply(std::size_t rt, std::size_t p, const DeliverResult& r) {
    const Process& proc = *processes_[p];
    if (r.fault) {
      faults_.push_back("round " + std::to_string(round_) + ": " + proc.id() + ": " + *r.fault);
      return;
    }
    if (proc.state() != last_state_[p]) {
      last_state_[p] = proc.state();
      trace_.push_back(Line(rt, {proc.id(), std::string(ToString(proc.state()))}));
    }
    for (const Signal& s : r.emitted) Route(rt, s);
  }

  void Route(std::size_t from, const Signal& s) {
    if (s.dst.process == kEnvProcess) return;
    const std::size_t to = RuntimeOf(s.dst.process);
    if (to == from) {
      queues_[to].push_back(s);
    } else {
      channels_[{from, to}].emplace_back(round_ + 1 + LatencyOf(from, to), s);
    }
  }

  std::string Line(std::size_t rt, std::initializer_list<std::string> fields) const {
    std::string l = std::to_string(round_) + ';' + placement_.runtimes[rt];
    for (const auto& f : fields) l += ';' + f;
    return l;
  }

  Placement placement_;
  int latency_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, int> overrides_;
  std::vector<std::unique_ptr<Process>> processes_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::size_t> parent_idx_;
  std::vector<std::size_t> rt_of_;
  std::vector<std::size_t> depth_;
  std::map<std::size_t, ProcState> last_state_;
  std::vector<std::deque<Signal>> queues_;
  std::vector<std::vector<std::size_t>> leaves_by_rt_;
  std::map<std::pair<std::size_t, std::size_t>, std::deque<std::pair<long long, Signal>>> channels_;
  std::function<void(long long)> round_hook_;
  std::vector<std::string> faults_;
  std::vector<std::string> trace_;
  long long round_ = 0;
  long long signals_ = 0;
  bool started_ = false;
};

}  // namespace plcbt

#endif  // PLCBT_EVENT_ENGINE_HPP_
