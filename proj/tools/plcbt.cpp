// plcbt: run behavior-tree scenarios, verify both engines against the
// reference semantics, explore the adapter product, run the distributed demo.

#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "plcbt/harness.hpp"

namespace {

// Raw flag values by config key; applied over the --config file.
struct Flags {
  std::string config;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void Add(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(key, cmd->add_option(flag, values[key], help));
  }
  void AddSwitch(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    values[key] = "true";
    options.emplace_back(key, cmd->add_flag(flag, help));
  }

  plcbt::ScenarioConfig Resolve() const {
    plcbt::ScenarioConfig c;
    if (!config.empty()) plcbt::LoadConfigFile(config, c);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) plcbt::SetKey(c, key, values.at(key));
    }
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior trees with PLC semantics: scenarios, verification, adapter exploration"};
  app.require_subcommand(1);

  Flags run_f, verify_f, explore_f, dist_f;

  auto* run = app.add_subcommand("run", "Run a tree file on the cyclic or event engine");
  run->add_option("--config", run_f.config, "key=value scenario file; flags override it");
  run_f.Add(run, "--tree", "tree", "Tree file (.bt)");
  run_f.Add(run, "--engine", "engine", "cyclic | event");
  run_f.Add(run, "--cycles", "cycles", "Cycle (cyclic) or round (event) budget");
  run_f.Add(run, "--cycle-time-ms", "cycle_time_ms", "Scan cycle time in ms");
  run_f.Add(run, "--fault-at", "fault_at", "Cycle at which the axis faults");
  run_f.Add(run, "--trace", "trace", "Trace output file");
  run_f.Add(run, "--seed", "seed", "Recorded seed (runs are deterministic)");
  run_f.Add(run, "--latency", "latency", "Event engine cross-runtime latency in rounds");

  auto* verify = app.add_subcommand("verify", "Check both engines against the reference on random trees");
  verify->add_option("--config", verify_f.config, "key=value file; flags override it");
  verify_f.Add(verify, "--trees", "trees", "Number of random trees");
  verify_f.Add(verify, "--depth", "depth", "Maximum tree depth");
  verify_f.Add(verify, "--seed", "seed", "Generator seed");
  verify_f.Add(verify, "--latencies", "latencies", "Comma-separated event latencies");
  verify_f.Add(verify, "--mutant", "mutant", "Self-check with a corrupted engine: fallback-swap");

  auto* explore = app.add_subcommand("explore-adapter", "Exhaustively explore the BT/FB adapter product");
  explore->add_option("--config", explore_f.config, "key=value file; flags override it");
  explore_f.Add(explore, "--machine", "machine", "adapter | free | etrig | process");

  auto* dist = app.add_subcommand("dist-demo", "Demo tree split over coordinator, drive and robot-stub runtimes");
  dist->add_option("--config", dist_f.config, "key=value file; flags override it");
  dist_f.Add(dist, "--latency", "latency", "Cross-runtime latency in rounds");
  dist_f.Add(dist, "--tree", "tree", "Alternative tree file");
  dist_f.Add(dist, "--runtimes", "runtimes", "3 (split) or 1 (degenerate)");
  dist_f.Add(dist, "--cycles", "cycles", "Round budget");
  dist_f.Add(dist, "--trace", "trace", "Combined trace output file");
  dist_f.AddSwitch(dist, "--robot-fail", "robot_fail", "Make the robot-stub pick fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return plcbt::kExitFault;
  }

  try {
    if (run->parsed()) return plcbt::CmdRun(run_f.Resolve(), std::cout, std::cerr);
    if (verify->parsed()) return plcbt::CmdVerify(verify_f.Resolve(), std::cout, std::cerr);
    if (explore->parsed()) return plcbt::CmdExploreAdapter(explore_f.Resolve(), std::cout, std::cerr);
    if (dist->parsed()) return plcbt::CmdDistDemo(dist_f.Resolve(), std::cout, std::cerr);
  } catch (const plcbt::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return plcbt::kExitFault;
  }
  return plcbt::kExitFault;
}
