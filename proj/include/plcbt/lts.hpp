/**
 * @file lts.hpp
 * @brief Labeled transition systems: synchronized product and exhaustive
 *        reachability (deadlocks, unreachable states, bounded paths).
 *
 * Product semantics: an event named in the sync map fires only jointly with
 * its partner (both machines move); every other event interleaves.
 */

#ifndef PLCBT_LTS_HPP_
#define PLCBT_LTS_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace plcbt {

struct Transition {
  std::string from;
  std::string event;
  std::string to;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Lts {
  std::string name;
  std::vector<std::string> states;
  std::string initial;
  std::vector<Transition> transitions;
  std::set<std::string> inputs;
  std::set<std::string> outputs;
  std::set<std::string> terminal;  ///< states allowed to have no successor

  bool HasEvent(const std::string& e) const { return inputs.contains(e) || outputs.contains(e); }

  bool HasState(const std::string& s) const {
    for (const auto& x : states) {
      if (x == s) return true;
    }
    return false;
  }

  std::vector<const Transition*> From(const std::string& s) const {
    std::vector<const Transition*> out;
    for (const auto& t : transitions) {
      if (t.from == s) out.push_back(&t);
    }
    return out;
  }

  /// Throws on undeclared states or events.
  void Validate() const {
    if (!HasState(initial)) throw std::invalid_argument(name + ": undeclared initial state '" + initial + "'");
    for (const auto& t : transitions) {
      if (!HasState(t.from) || !HasState(t.to)) {
        throw std::invalid_argument(name + ": transition on undeclared state " + t.from + " -> " + t.to);
      }
      if (!HasEvent(t.event)) throw std::invalid_argument(name + ": undeclared event '" + t.event + "'");
    }
  }
};

struct SyncPair {
  std::string a_event;
  std::string b_event;
};

inline std::string PairName(const std::string& a, const std::string& b) { return "(" + a + "," + b + ")"; }

/// Synchronized product of `a` and `b`. Every pair of states is declared;
/// explore from the initial pair to see which ones are reachable. Joint
/// events are named "<a_event>/<b_event>".
inline Lts Compose(const Lts& a, const Lts& b, const std::vector<SyncPair>& sync) {
  a.Validate();
  b.Validate();
  std::set<std::string> a_sync, b_sync;
  for (const auto& p : sync) {
    if (!a.HasEvent(p.a_event)) throw std::invalid_argument("dangling port '" + p.a_event + "' in " + a.name);
    if (!b.HasEvent(p.b_event)) throw std::invalid_argument("dangling port '" + p.b_event + "' in " + b.name);
    a_sync.insert(p.a_event);
    b_sync.insert(p.b_event);
  }

  Lts p;
  p.name = a.name + "||" + b.name;
  p.initial = PairName(a.initial, b.initial);
  for (const auto& sa : a.states) {
    for (const auto& sb : b.states) {
      p.states.push_back(PairName(sa, sb));
      if (a.terminal.contains(sa) && b.terminal.contains(sb)) p.terminal.insert(PairName(sa, sb));
    }
  }
  for (const auto& e : a.inputs) {
    if (!a_sync.contains(e)) p.inputs.insert(e);
  }
  for (const auto& e : a.outputs) {
    if (!a_sync.contains(e)) p.outputs.insert(e);
  }
  for (const auto& e : b.inputs) {
    if (!b_sync.contains(e)) p.inputs.insert(e);
  }
  for (const auto& e : b.outputs) {
    if (!b_sync.contains(e)) p.outputs.insert(e);
  }
  for (const auto& s : sync) {
    const std::string joint = s.a_event + "/" + s.b_event;
    (a.inputs.contains(s.a_event) ? p.inputs : p.outputs).insert(joint);
  }

  for (const auto& sa : a.states) {
    for (const auto& sb : b.states) {
      const std::string from = PairName(sa, sb);
      for (const Transition* t : a.From(sa)) {
        if (!a_sync.contains(t->event)) p.transitions.push_back({from, t->event, PairName(t->to, sb)});
      }
      for (const Transition* t : b.From(sb)) {
        if (!b_sync.contains(t->event)) p.transitions.push_back({from, t->event, PairName(sa, t->to)});
      }
      for (const auto& s : sync) {
        for (const Transition* ta : a.From(sa)) {
          if (ta->event != s.a_event) continue;
          for (const Transition* tb : b.From(sb)) {
            if (tb->event != s.b_event) continue;
            p.transitions.push_back({from, s.a_event + "/" + s.b_event, PairName(ta->to, tb->to)});
          }
        }
      }
    }
  }
  return p;
}

struct ExploreReport {
  std::vector<std::string> reachable;    ///< BFS order from the initial state
  std::vector<std::string> deadlocks;    ///< reachable, non-terminal, no outgoing transition
  std::vector<std::string> unreachable;  ///< declared but never reached
  std::size_t transitions = 0;           ///< reachable transitions
};

inline ExploreReport Explore(const Lts& m) {
  m.Validate();
  std::map<std::string, std::vector<const Transition*>> out;
  for (const auto& t : m.transitions) out[t.from].push_back(&t);

  ExploreReport r;
  std::set<std::string> seen{m.initial};
  std::deque<std::string> todo{m.initial};
  while (!todo.empty()) {
    std::string s = todo.front();
    todo.pop_front();
    r.reachable.push_back(s);
    const auto& succ = out[s];
    if (succ.empty() && !m.terminal.contains(s)) r.deadlocks.push_back(s);
    for (const Transition* t : succ) {
      ++r.transitions;
      if (seen.insert(t->to).second) todo.push_back(t->to);
    }
  }
  for (const auto& s : m.states) {
    if (!seen.contains(s)) r.unreachable.push_back(s);
  }
  return r;
}

struct PathReport {
  std::size_t starts = 0;                 ///< states the trigger was applied in
  std::size_t paths = 0;                  ///< maximal paths enumerated
  std::size_t max_length = 0;             ///< transitions, trigger included
  std::set<std::string> terminals;        ///< end states of maximal paths
  std::vector<std::string> violations;    ///< paths exceeding the bound
};

/// From every reachable state matching `start` that enables `trigger`, fires
/// it and then follows every path over events not in `blocked` (self-loops
/// skipped) until no such transition is enabled. Paths longer than
/// `max_length` are reported as violations.
inline PathReport TriggeredPaths(const Lts& m, const std::function<bool(const std::string&)>& start,
                                 const std::string& trigger, const std::set<std::string>& blocked,
                                 std::size_t max_length) {
  PathReport r;
  std::map<std::string, std::vector<const Transition*>> out;
  for (const auto& t : m.transitions) out[t.from].push_back(&t);

  std::function<void(const std::string&, std::size_t, std::string)> walk = [&](const std::string& s, std::size_t len,
                                                                              std::string path) {
    if (len > max_length) {
      r.violations.push_back(path);
      return;
    }
    bool moved = false;
    for (const Transition* t : out[s]) {
      if (blocked.contains(t->event) || t->to == s) continue;
      moved = true;
      walk(t->to, len + 1, path + " -" + t->event + "-> " + t->to);
    }
    if (!moved) {
      ++r.paths;
      r.max_length = std::max(r.max_length, len);
      r.terminals.insert(s);
    }
  };

  for (const auto& s : Explore(m).reachable) {
    if (!start(s)) continue;
    for (const Transition* t : out[s]) {
      if (t->event != trigger) continue;
      ++r.starts;
      walk(t->to, 1, s + " -" + t->event + "-> " + t->to);
    }
  }
  return r;
}

}  // namespace plcbt

#endif  // PLCBT_LTS_HPP_
