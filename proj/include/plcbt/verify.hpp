/**
 * @file verify.hpp
 * @brief Randomized oracle-equivalence run over both engines.
 */

#ifndef PLCBT_VERIFY_HPP_
#define PLCBT_VERIFY_HPP_

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "plcbt/cyclic_check.hpp"
#include "plcbt/cyclic_engine.hpp"
#include "plcbt/dsl.hpp"
#include "plcbt/event_engine.hpp"
#include "plcbt/random_tree.hpp"
#include "plcbt/reference.hpp"

namespace plcbt {

/// Runs the event engine to quiescence with each leaf answering its final
/// script value and compares the root status with ReferenceTick.
inline CheckResult CheckEvent(const TreeSpec& spec, int latency, long long max_rounds,
                              std::vector<std::pair<std::string, std::string>>* final_states = nullptr) {
  CheckResult res;
  const ScriptMap scripts = ScriptsOf(spec);
  const auto expected = ReferenceTick(spec, FinalStates(scripts)).root;

  EventSystem sys = EventSystem::Build(spec, MakeScriptedEventLeaf, SplitPlacement(spec, latency > 0 ? 2 : 1), latency);
  auto out = sys.RunUntilQuiescent(max_rounds);
  res.steps = out.rounds;
  if (!out.quiescent) {
    res.ok = false;
    res.detail = "not quiescent after " + std::to_string(max_rounds) + " rounds";
    return res;
  }
  if (!sys.faults().empty()) {
    res.ok = false;
    res.detail = "conformance fault: " + sys.faults().front();
    return res;
  }
  auto root = sys.RootStatus();
  if (!root || *root != expected) {
    res.ok = false;
    res.at = out.rounds;
    res.detail = "event root " + std::string(root ? ToString(*root) : "IDLE") + ", oracle " +
                 std::string(ToString(expected));
  }
  if (final_states) *final_states = sys.NodeStates();
  return res;
}

struct VerifyOptions {
  int trees = 500;
  int depth = 4;
  std::uint64_t seed = 42;
  std::vector<int> latencies{0, 1, 5};
};

struct VerifyTreeResult {
  int index = 0;
  bool ok = true;
  std::string failure;  ///< counterexample text when !ok
};

struct VerifyReport {
  int passed = 0;
  int failed = 0;
  std::vector<VerifyTreeResult> trees;
};

/// Generates `trees` random scripted trees and checks both engines against
/// the oracle, the event engine at every latency.
template <class Rules = StandardControlRules>
VerifyReport Verify(const VerifyOptions& opt) {
  VerifyReport report;
  RandomTreeOptions gen_opt;
  gen_opt.max_depth = opt.depth;
  RandomTreeGen gen(opt.seed, gen_opt);
  const long long max_cycles = gen_opt.script_length + 4;

  for (int t = 0; t < opt.trees; ++t) {
    TreeSpec spec = gen.Next("tree" + std::to_string(t));
    VerifyTreeResult tr;
    tr.index = t;
    std::ostringstream why;

    auto cyc = CheckCyclic<Rules>(spec, max_cycles);
    if (!cyc.ok) why << "cyclic engine diverges at cycle " << cyc.at << ": " << cyc.detail << '\n';

    std::vector<std::pair<std::string, std::string>> baseline;
    for (std::size_t li = 0; li < opt.latencies.size(); ++li) {
      std::vector<std::pair<std::string, std::string>> states;
      auto ev = CheckEvent(spec, opt.latencies[li], 10000, &states);
      if (!ev.ok) why << "event engine (latency " << opt.latencies[li] << ") diverges: " << ev.detail << '\n';
      if (li == 0) {
        baseline = states;
      } else if (ev.ok && states != baseline) {
        why << "event engine final states differ between latency " << opt.latencies[0] << " and "
            << opt.latencies[li] << '\n';
      }
    }

    const std::string problems = why.str();
    if (!problems.empty()) {
      tr.ok = false;
      std::ostringstream dump;
      dump << "tree " << t << " FAILED\n" << problems << "--- tree\n" << Serialize(spec) << "--- scripts\n";
      for (const auto& [id, s] : ScriptsOf(spec)) dump << id << ' ' << s.ToString() << '\n';
      tr.failure = dump.str();
      ++report.failed;
    } else {
      ++report.passed;
    }
    report.trees.push_back(std::move(tr));
  }
  return report;
}

}  // namespace plcbt

#endif  // PLCBT_VERIFY_HPP_
