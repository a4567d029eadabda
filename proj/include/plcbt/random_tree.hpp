/**
 * @file random_tree.hpp
 * @brief Seeded random tree and leaf-script generator.
 *
 * Same seed and options give the same tree on every platform: draws use the
 * raw mt19937_64 stream (no std distributions, whose output is
 * implementation-defined).
 */

#ifndef PLCBT_RANDOM_TREE_HPP_
#define PLCBT_RANDOM_TREE_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "plcbt/tree.hpp"

namespace plcbt {

struct RandomTreeOptions {
  int max_depth = 4;       ///< levels, root included; 1 gives a single leaf
  int max_children = 4;
  int max_nodes = 20;
  int script_length = 6;
  bool random_params = false;  ///< extra typed parameters (DSL round-trip)
};

class RandomTreeGen {
 public:
  RandomTreeGen(std::uint64_t seed, RandomTreeOptions options) : rng_(seed), opt_(options) {}

  /// Control nodes are named <kind>_<pre-order index>, matching the DSL.
  TreeSpec Next(const std::string& name = "random") {
    count_ = 0;
    NodeExpr root = Node(1);
    return BuildTree(name, root);
  }

 private:
  std::uint64_t Below(std::uint64_t n) { return n == 0 ? 0 : rng_() % n; }
  bool Chance(int percent) { return Below(100) < static_cast<std::uint64_t>(percent); }

  NodeExpr Node(int level) {
    const int index = count_++;
    const bool room = count_ < opt_.max_nodes;
    const bool control = level < opt_.max_depth && room && Chance(level == 1 ? 85 : 55);
    if (!control) return Leaf(index);

    NodeKind kind = Chance(50) ? NodeKind::kSequence : NodeKind::kFallback;
    NodeExpr e{std::string(ToString(kind)) + "_" + std::to_string(index), kind, {}, {}};
    const int want = 1 + static_cast<int>(Below(static_cast<std::uint64_t>(opt_.max_children)));
    for (int c = 0; c < want; ++c) {
      if (c > 0 && count_ >= opt_.max_nodes) break;
      e.children.push_back(Node(level + 1));
    }
    return e;
  }

  NodeExpr Leaf(int index) {
    const int len = opt_.script_length;
    ParamMap params;
    std::string script;
    NodeExpr e;
    if (Chance(50)) {
      // Actions run for m cycles, then complete for good.
      int m = static_cast<int>(Below(static_cast<std::uint64_t>(len) + 1));
      script.assign(static_cast<std::size_t>(m), 'R');
      if (m < len) script.push_back(Chance(60) ? 'S' : 'F');
      params["script"] = script;
      if (opt_.random_params) AddParams(params);
      e = Action("a" + std::to_string(index), std::move(params));
    } else {
      for (int i = 0; i < len; ++i) script.push_back(Chance(50) ? 'S' : 'F');
      params["script"] = script;
      if (opt_.random_params) AddParams(params);
      e = Condition("c" + std::to_string(index), std::move(params));
    }
    return e;
  }

  void AddParams(ParamMap& params) {
    static const char* kNames[] = {"pos", "vel", "label", "enabled", "gain", "mode_2"};
    const int n = static_cast<int>(Below(4));
    for (int i = 0; i < n; ++i) {
      std::string name = kNames[Below(6)];
      switch (Below(3)) {
        case 0: {
          // Mix of integers, fractions and awkward magnitudes.
          double v = static_cast<double>(static_cast<std::int64_t>(Below(200001)) - 100000) /
                     static_cast<double>(1 + Below(1000));
          params[name] = v;
          break;
        }
        case 1: {
          static const char kChars[] = "abcXYZ 0_-\"\\#,(){}=";
          std::string s;
          for (std::uint64_t j = 0, len = Below(8); j < len; ++j) s.push_back(kChars[Below(sizeof(kChars) - 1)]);
          params[name] = s;
          break;
        }
        default: params[name] = Chance(50); break;
      }
    }
  }

  std::mt19937_64 rng_;
  RandomTreeOptions opt_;
  int count_ = 0;
};

}  // namespace plcbt

#endif  // PLCBT_RANDOM_TREE_HPP_
