/**
 * @file harness.hpp
 * @brief Scenario configuration and the commands behind the plcbt tool: run,
 *        verify, explore-adapter, dist-demo.
 *
 * Exit codes: 0 root Done/Success (or every check passed), 1 harness fault
 * (bad config, unreadable or malformed tree, unknown binding), 2 budget
 * exhausted or not quiescent, 3 root Error/Failure (or a check failed).
 */

#ifndef PLCBT_HARNESS_HPP_
#define PLCBT_HARNESS_HPP_

#include <chrono>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plcbt/adapter.hpp"
#include "plcbt/cyclic_engine.hpp"
#include "plcbt/dsl.hpp"
#include "plcbt/event_engine.hpp"
#include "plcbt/lts.hpp"
#include "plcbt/verify.hpp"
#include "plcbt/virtual_axis.hpp"

namespace plcbt {

enum ExitCode : int { kExitOk = 0, kExitFault = 1, kExitBudget = 2, kExitFailure = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything that determines a run. With the tree text it fixes the trace.
struct ScenarioConfig {
  std::string tree;                 ///< tree file (.bt)
  std::string engine = "cyclic";    ///< cyclic | event
  long long cycles = 1000;          ///< max cycles (cyclic) or rounds (event)
  double cycle_time_ms = 10.0;
  std::optional<long long> fault_at;
  int latency = 0;                                        ///< default cross-runtime latency, rounds
  std::map<std::pair<std::string, std::string>, int> link_latency;  ///< per runtime pair
  std::map<std::string, std::string> place;              ///< node -> runtime (event engine)
  std::uint64_t seed = 42;          ///< verify generator seed; runs are deterministic
  std::string trace;                ///< trace output path; empty for none
  int trees = 500;
  int depth = 4;
  std::vector<int> latencies{0, 1, 5};
  std::string mutant;               ///< verify: "fallback-swap" runs a corrupted Fallback
  std::string machine = "adapter";  ///< explore-adapter: adapter | free | etrig | process
  bool robot_fail = false;          ///< dist-demo: robot-stub pick fails
  int runtimes = 3;                 ///< dist-demo: 3 or 1
};

namespace harness_detail {

template <class T>
T ParseInt(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' needs an integer, got '" + v + "'");
  }
  return out;
}

inline double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' needs a number, got '" + v + "'");
  }
  return out;
}

inline bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' needs true or false, got '" + v + "'");
}

inline std::string Trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read tree file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw ConfigError("cannot read tree file '" + path + "'");
  return ss.str();
}

inline std::string Fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace harness_detail

/// Sets one key; '-' and '_' are interchangeable in names.
inline void SetKey(ScenarioConfig& c, std::string key, const std::string& raw) {
  using namespace harness_detail;
  for (char& ch : key) {
    if (ch == '-') ch = '_';
  }
  const std::string v = Trim(raw);
  if (key == "tree") {
    c.tree = v;
  } else if (key == "engine") {
    if (v != "cyclic" && v != "event") throw ConfigError("engine must be cyclic or event, got '" + v + "'");
    c.engine = v;
  } else if (key == "cycles" || key == "max_cycles" || key == "max_rounds") {
    c.cycles = ParseInt<long long>(key, v);
    if (c.cycles < 1) throw ConfigError("'" + key + "' must be >= 1");
  } else if (key == "cycle_time_ms") {
    c.cycle_time_ms = ParseDouble(key, v);
    if (!(c.cycle_time_ms > 0.0)) throw ConfigError("cycle_time_ms must be > 0");
  } else if (key == "fault_at" || key == "fault_at_cycle") {
    if (v == "none" || v.empty()) {
      c.fault_at.reset();
    } else {
      c.fault_at = ParseInt<long long>(key, v);
      if (*c.fault_at < 0) throw ConfigError("'" + key + "' must be >= 0");
    }
  } else if (key == "latency") {
    c.latency = ParseInt<int>(key, v);
    if (c.latency < 0) throw ConfigError("latency must be >= 0");
  } else if (key.starts_with("latency.")) {
    // latency.<from>.<to> = rounds
    const std::string pair = key.substr(8);
    const auto dot = pair.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == pair.size()) {
      throw ConfigError("expected latency.<from>.<to>, got '" + key + "'");
    }
    const int l = ParseInt<int>(key, v);
    if (l < 0) throw ConfigError("'" + key + "' must be >= 0");
    c.link_latency[{pair.substr(0, dot), pair.substr(dot + 1)}] = l;
  } else if (key.starts_with("place.")) {
    if (key.size() == 6 || v.empty()) throw ConfigError("expected place.<node> = <runtime>");
    c.place[key.substr(6)] = v;
  } else if (key == "seed") {
    c.seed = ParseInt<std::uint64_t>(key, v);
  } else if (key == "trace") {
    c.trace = v;
  } else if (key == "trees") {
    c.trees = ParseInt<int>(key, v);
    if (c.trees < 1) throw ConfigError("trees must be >= 1");
  } else if (key == "depth") {
    c.depth = ParseInt<int>(key, v);
    if (c.depth < 1) throw ConfigError("depth must be >= 1");
  } else if (key == "latencies") {
    c.latencies.clear();
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
      const int l = ParseInt<int>(key, Trim(item));
      if (l < 0) throw ConfigError("latencies must be >= 0");
      c.latencies.push_back(l);
    }
    if (c.latencies.empty()) throw ConfigError("latencies must not be empty");
  } else if (key == "mutant") {
    if (!v.empty() && v != "fallback-swap") throw ConfigError("unknown mutant '" + v + "'");
    c.mutant = v;
  } else if (key == "machine") {
    if (v != "adapter" && v != "free" && v != "etrig" && v != "process") {
      throw ConfigError("machine must be adapter, free, etrig or process, got '" + v + "'");
    }
    c.machine = v;
  } else if (key == "robot_fail") {
    c.robot_fail = ParseBool(key, v);
  } else if (key == "runtimes") {
    c.runtimes = ParseInt<int>(key, v);
    if (c.runtimes != 1 && c.runtimes != 3) throw ConfigError("runtimes must be 1 or 3");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// key=value lines; '#' starts a comment. A relative tree path is taken
/// relative to the config file.
inline void LoadConfigText(const std::string& text, ScenarioConfig& c, const std::string& origin = "config",
                           const std::filesystem::path& base_dir = {}) {
  std::stringstream ss(text);
  int line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = harness_detail::Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = harness_detail::Trim(line.substr(0, eq));
    std::string value = harness_detail::Trim(line.substr(eq + 1));
    try {
      if ((key == "tree") && !value.empty() && std::filesystem::path(value).is_relative() && !base_dir.empty()) {
        value = (base_dir / value).lexically_normal().string();
      }
      SetKey(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void LoadConfigFile(const std::string& path, ScenarioConfig& c) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  LoadConfigText(ss.str(), c, path, std::filesystem::path(path).parent_path());
}

/// Reads and parses a tree file; throws ConfigError with every diagnostic.
inline TreeSpec LoadTree(const std::string& path) {
  if (path.empty()) throw ConfigError("no tree file given");
  DslDocument doc = Parse(harness_detail::ReadText(path));
  if (!doc.ok()) {
    std::string msg;
    for (const auto& d : doc.diagnostics) msg += (msg.empty() ? "" : "\n") + path + ":" + d.ToString();
    throw ConfigError(msg);
  }
  return std::move(doc.spec);
}

inline bool UsesAxis(const TreeSpec& spec) {
  for (const auto& n : spec.nodes) {
    if (IsLeaf(n.kind) && IsAxisBinding(n.binding.name)) return true;
  }
  return false;
}

inline void WriteTraceFile(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write trace file '" + path + "'");
  out << text;
  if (!out) throw ConfigError("cannot write trace file '" + path + "'");
}

/// Runtime list and placement from `place.*` keys. Unplaced nodes go to
/// runtime "main".
inline Placement PlacementOf(const ScenarioConfig& c, const TreeSpec& spec,
                             std::map<std::pair<std::size_t, std::size_t>, int>* overrides) {
  Placement p;
  p.runtimes = {"main"};
  std::map<std::string, std::size_t> index{{"main", 0}};
  for (const auto& [node, rt] : c.place) {
    if (!spec.Find(node)) throw ConfigError("place." + node + ": no such node");
    auto [it, fresh] = index.emplace(rt, p.runtimes.size());
    if (fresh) p.runtimes.push_back(rt);
    p.node_runtime[node] = it->second;
  }
  for (const auto& [pair, l] : c.link_latency) {
    if (!index.contains(pair.first) || !index.contains(pair.second)) {
      throw ConfigError("latency." + pair.first + "." + pair.second + ": unknown runtime");
    }
    (*overrides)[{index.at(pair.first), index.at(pair.second)}] = l;
  }
  return p;
}

// ============================================================================
// run
// ============================================================================

inline int CmdRun(const ScenarioConfig& c, std::ostream& out, std::ostream& err) {
  try {
    const TreeSpec spec = LoadTree(c.tree);
    AxisPlant plant({.cycle_time = c.cycle_time_ms / 1000.0, .fault_at_cycle = c.fault_at});
    const bool axis = UsesAxis(spec);

    if (c.engine == "cyclic") {
      CyclicEngine eng(spec, AxisLeafFactory(plant));
      if (axis) eng.SetPlant(&plant);
      const RunResult r = eng.Run(c.cycles);
      WriteTraceFile(c.trace, r.TraceText());
      out << "engine cyclic: " << ToString(r.outcome) << " after " << r.cycles << " cycles, root "
          << ToString(r.root) << '\n';
      if (axis) {
        out << "axis " << ToString(plant.axis().state) << " at " << harness_detail::Fixed3(plant.axis().position)
            << '\n';
      }
      switch (r.outcome) {
        case RunOutcome::kRootDone: return kExitOk;
        case RunOutcome::kRootError: return kExitFailure;
        case RunOutcome::kBudgetExhausted: return kExitBudget;
      }
      return kExitFault;
    }

    std::map<std::pair<std::size_t, std::size_t>, int> overrides;
    Placement placement = PlacementOf(c, spec, &overrides);
    EventSystem sys = EventSystem::Build(spec, AxisEventLeafFactory(plant), placement, c.latency, overrides);
    if (axis) {
      sys.SetRoundHook([&plant, &sys](long long round) {
        plant.Cycle(round);
        sys.Note(AxisTelemetry(round, plant.axis()));
      });
    }
    const QuiescenceResult q = sys.RunUntilQuiescent(c.cycles);
    WriteTraceFile(c.trace, sys.TraceText());
    const auto root = sys.RootStatus();
    out << "engine event: " << (q.quiescent ? "quiescent" : "not quiescent") << " after " << q.rounds
        << " rounds, " << q.signals << " signals, root " << (root ? ToString(*root) : std::string_view("RUNNING"))
        << '\n';
    if (axis) {
      out << "axis " << ToString(plant.axis().state) << " at " << harness_detail::Fixed3(plant.axis().position)
          << '\n';
    }
    if (!sys.faults().empty()) {
      for (const auto& f : sys.faults()) err << "conformance fault: " << f << '\n';
      return kExitFault;
    }
    if (!q.quiescent) {
      err << "not quiescent within " << c.cycles << " rounds:\n" << q.snapshot;
      return kExitBudget;
    }
    if (!root) return kExitBudget;
    return *root == NodeStatus::kSuccess ? kExitOk : kExitFailure;
  } catch (const BindingError& e) {
    err << e.what() << '\n';
    return kExitFault;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitFault;
  } catch (const std::exception& e) {
    err << "harness fault: " << e.what() << '\n';
    return kExitFault;
  }
}

// ============================================================================
// verify
// ============================================================================

/// Mutant for the verifier's self-check: Fallback follows the Sequence rule,
/// so child verdicts are swapped.
struct SwappedFallbackRules {
  static ChildVerdict Visit(NodeKind kind, std::size_t i, std::size_t n, ExecState child, std::size_t& k) {
    if (kind == NodeKind::kFallback) return SequenceVisit(i, n, child, k);
    return StandardControlRules::Visit(kind, i, n, child, k);
  }
};

inline int CmdVerify(const ScenarioConfig& c, std::ostream& out, std::ostream& err) {
  try {
    VerifyOptions opt;
    opt.trees = c.trees;
    opt.depth = c.depth;
    opt.seed = c.seed;
    opt.latencies = c.latencies;
    const auto t0 = std::chrono::steady_clock::now();
    const VerifyReport r = c.mutant.empty() ? Verify(opt) : Verify<SwappedFallbackRules>(opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    out << "verify: " << opt.trees << " trees, depth " << opt.depth << ", seed " << opt.seed << ", latencies";
    for (int l : opt.latencies) out << ' ' << l;
    if (!c.mutant.empty()) out << ", mutant " << c.mutant;
    out << '\n';
    int shown = 0;
    for (const auto& t : r.trees) {
      if (t.ok) continue;
      if (shown++ < 5) out << t.failure;
    }
    if (shown > 5) out << "(" << shown - 5 << " more failing trees not shown)\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", secs);
    out << "passed " << r.passed << ", failed " << r.failed << " (" << buf << " s)\n";
    return r.failed == 0 ? kExitOk : kExitFailure;
  } catch (const std::exception& e) {
    err << "harness fault: " << e.what() << '\n';
    return kExitFault;
  }
}

// ============================================================================
// explore-adapter
// ============================================================================

inline int CmdExploreAdapter(const ScenarioConfig& c, std::ostream& out, std::ostream& err) {
  try {
    const auto t0 = std::chrono::steady_clock::now();
    Lts m;
    if (c.machine == "adapter") m = AdapterLts();
    if (c.machine == "free") m = Compose(ProcessLts(), EtrigLts(), {});
    if (c.machine == "etrig") m = EtrigLts();
    if (c.machine == "process") m = ProcessLts();
    const ExploreReport r = Explore(m);

    out << "machine: " << m.name << " (" << c.machine << ")\n";
    out << "states: " << r.reachable.size() << " reachable of " << m.states.size() << " declared\n";
    out << "transitions: " << r.transitions << '\n';
    out << "reachable:";
    for (const auto& s : r.reachable) out << ' ' << s;
    out << '\n';
    out << "deadlocks: " << r.deadlocks.size() << '\n';
    for (const auto& d : r.deadlocks) out << "  deadlock " << d << '\n';

    bool ok = r.deadlocks.empty();
    if (c.machine == "adapter") {
      constexpr std::size_t kBound = 6;
      const PathReport p = TriggeredPaths(
          m, [](const std::string& s) { return s.starts_with("(Running,"); }, "halt/xAbort",
          AdapterEnvironmentEvents(), kBound);
      out << "halt paths: " << p.paths << " from " << p.starts << " halt points, longest " << p.max_length
          << " transitions (bound " << kBound << ")\n";
      out << "halt terminals:";
      for (const auto& t : p.terminals) out << ' ' << t;
      out << '\n';
      out << "halt violations: " << p.violations.size() << '\n';
      for (const auto& v : p.violations) out << "  " << v << '\n';
      ok = ok && p.violations.empty() && p.terminals == std::set<std::string>{"(Idle,Idle)"};
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", ms);
    out << "explored in " << buf << " ms\n";
    return ok ? kExitOk : kExitFailure;
  } catch (const std::exception& e) {
    err << "harness fault: " << e.what() << '\n';
    return kExitFault;
  }
}

// ============================================================================
// dist-demo
// ============================================================================

/// Demo cell: the axis sequence plus a robot branch whose controller is a
/// scripted stub. Control nodes run on the coordinator, axis leaves on the
/// drive, robot leaves on the robot stub.
inline constexpr std::string_view kDistDemoTree = R"(tree dist_demo {
  sequence cell {
    fallback power {
      condition AxisPowered
      action Power
    }
    fallback recover {
      condition NoAxisError
      sequence reset {
        action Reset
      }
    }
    action MoveTo (pos=100, vel=50)
    fallback robot {
      action RobotPick (script="RRS")
      action RobotRecover (script="RS")
    }
  }
}
)";

inline Placement DistDemoPlacement(const TreeSpec& spec, int runtimes) {
  Placement p;
  if (runtimes == 1) return p;
  p.runtimes = {"coordinator", "drive", "robot-stub"};
  for (const auto& n : spec.nodes) {
    if (IsControl(n.kind)) {
      p.node_runtime[n.id] = 0;
    } else {
      p.node_runtime[n.id] = IsAxisBinding(n.binding.name) ? 1 : 2;
    }
  }
  return p;
}

struct DistRun {
  QuiescenceResult q;
  std::optional<NodeStatus> root;
  std::vector<std::pair<std::string, std::string>> states;
  std::vector<std::string> faults;
  std::string trace;
};

inline DistRun RunDist(const TreeSpec& spec, const ScenarioConfig& c, int runtimes, int latency) {
  AxisPlant plant({.cycle_time = c.cycle_time_ms / 1000.0, .fault_at_cycle = c.fault_at});
  EventSystem sys = EventSystem::Build(spec, AxisEventLeafFactory(plant), DistDemoPlacement(spec, runtimes), latency);
  sys.SetRoundHook([&plant, &sys](long long round) {
    plant.Cycle(round);
    sys.Note(AxisTelemetry(round, plant.axis()));
  });
  DistRun r;
  r.q = sys.RunUntilQuiescent(c.cycles);
  r.root = sys.RootStatus();
  r.states = sys.NodeStates();
  r.faults = sys.faults();
  r.trace = sys.TraceText();
  return r;
}

inline int CmdDistDemo(const ScenarioConfig& c, std::ostream& out, std::ostream& err) {
  try {
    TreeSpec spec = c.tree.empty() ? ParseOrThrow(kDistDemoTree) : LoadTree(c.tree);
    if (c.robot_fail) {
      bool found = false;
      for (auto& n : spec.nodes) {
        if (n.id == "RobotPick") {
          n.binding.params["script"] = std::string("RRF");
          found = true;
        }
      }
      if (!found) throw ConfigError("robot_fail: tree has no RobotPick leaf");
    }

    const DistRun run = RunDist(spec, c, c.runtimes, c.latency);
    const DistRun ref = RunDist(spec, c, 1, 0);
    WriteTraceFile(c.trace, run.trace);

    out << "dist-demo: " << (c.runtimes == 3 ? "coordinator, drive, robot-stub" : "single runtime") << ", latency "
        << c.latency << (c.robot_fail ? ", robot pick fails" : "") << '\n';
    out << (run.q.quiescent ? "quiescent" : "not quiescent") << " after " << run.q.rounds << " rounds, "
        << run.q.signals << " signals\n";
    for (const auto& [id, st] : run.states) out << "  " << id << ' ' << st << '\n';
    out << "root " << (run.root ? ToString(*run.root) : std::string_view("RUNNING")) << '\n';

    if (!run.faults.empty()) {
      for (const auto& f : run.faults) err << "conformance fault: " << f << '\n';
      return kExitFault;
    }
    if (!run.q.quiescent) {
      err << "not quiescent within " << c.cycles << " rounds:\n" << run.q.snapshot;
      return kExitBudget;
    }
    const bool same = ref.q.quiescent && ref.states == run.states;
    out << "single-runtime reference: " << (same ? "identical final states" : "DIFFERENT final states") << '\n';
    if (!same) return kExitFailure;
    if (!run.root) return kExitBudget;
    return *run.root == NodeStatus::kSuccess ? kExitOk : kExitFailure;
  } catch (const BindingError& e) {
    err << e.what() << '\n';
    return kExitFault;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitFault;
  } catch (const std::exception& e) {
    err << "harness fault: " << e.what() << '\n';
    return kExitFault;
  }
}

}  // namespace plcbt

#endif  // PLCBT_HARNESS_HPP_
