#include <gtest/gtest.h>

#include <vector>

#include "plcbt/cyclic_check.hpp"
#include "plcbt/cyclic_engine.hpp"
#include "plcbt/random_tree.hpp"

using namespace plcbt;

namespace {

using E = ExecState;

ParamMap Script(const char* s) { return {{"script", std::string(s)}}; }

TreeSpec GuardedAction(const char* c1, const char* c2, const char* a, double abort_delay = 0) {
  ParamMap ap = Script(a);
  if (abort_delay > 0) ap["abort_delay"] = abort_delay;
  return BuildTree("T", Fallback("Fallback", {Condition("C1", Script(c1)),
                                             Sequence("Sequence", {Condition("C2", Script(c2)), Action("a", ap)})}));
}

class TestAction : public EtrigA {
 public:
  NodeStatus next = NodeStatus::kRunning;
  bool ack = true;

 protected:
  NodeStatus OnStep(long long) override { return next; }
  bool OnAbort(long long) override { return ack; }
};

// A Fallback that follows the Sequence rule: the mutant the oracle must catch.
struct CorruptFallbackRules {
  static ChildVerdict Visit(NodeKind, std::size_t i, std::size_t n, ExecState child, std::size_t& k) {
    return SequenceVisit(i, n, child, k);
  }
};

std::vector<E> States(const CycleTrace& c) {
  std::vector<E> out;
  for (const auto& e : c.entries) out.push_back(e.state);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// node_cycle
// ---------------------------------------------------------------------------

TEST(NodeCycle, RisingEdgeStartsWork) {
  TestAction fb;
  EXPECT_EQ(fb.Cycle({true, false}, 0), E::kBusy);
  EXPECT_EQ(fb.outputs(), (EtrigOutputs{true, false, false, false}));
}

TEST(NodeCycle, CompletionAndReset) {
  TestAction fb;
  fb.Cycle({true, false}, 0);
  fb.next = NodeStatus::kSuccess;
  EXPECT_EQ(fb.Cycle({true, false}, 1), E::kDone);
  EXPECT_EQ(fb.Cycle({true, false}, 2), E::kDone) << "held high stays latched";
  EXPECT_EQ(fb.Cycle({false, false}, 3), E::kIdle);
}

TEST(NodeCycle, AbortIsAcknowledged) {
  TestAction fb;
  fb.Cycle({true, false}, 0);
  EXPECT_EQ(fb.Cycle({false, true}, 1), E::kAborted);
}

TEST(NodeCycle, SlowAbortAndIgnoredEdge) {
  TestAction fb;
  fb.ack = false;
  fb.Cycle({true, false}, 0);
  EXPECT_EQ(fb.Cycle({false, true}, 1), E::kAborting);
  EXPECT_EQ(fb.Cycle({true, false}, 2), E::kAborting) << "rising edge while aborting is ignored";
  fb.ack = true;
  EXPECT_EQ(fb.Cycle({true, false}, 3), E::kAborted);
  EXPECT_EQ(fb.Cycle({false, false}, 4), E::kIdle);
  EXPECT_EQ(fb.Cycle({true, false}, 5), E::kBusy);
}

TEST(NodeCycle, DoubleInvocationIsAFault) {
  TestAction fb;
  fb.Cycle({true, false}, 0);
  EXPECT_THROW(fb.Cycle({true, false}, 0), EngineFault);
}

TEST(NodeCycle, OutputsAreExclusive) {
  for (E s : {E::kIdle, E::kBusy, E::kDone, E::kError, E::kAborting, E::kAborted}) {
    EtrigOutputs o = OutputsOf(s);
    EXPECT_LE(int(o.done) + int(o.error) + int(o.aborted), 1);
    EXPECT_FALSE(o.busy && (o.done || o.error || o.aborted));
  }
  EXPECT_THROW(StateFromOutputs({false, true, true, false}), EngineFault);
}

// ---------------------------------------------------------------------------
// sequence_cycle / fallback_cycle
// ---------------------------------------------------------------------------

TEST(SequenceCycle, AllDoneIsDone) {
  std::size_t k = 0;
  std::vector<E> ch{E::kDone, E::kDone};
  auto d = SequenceCycle(ch, k);
  EXPECT_EQ(d.node_state, E::kDone);
  EXPECT_EQ(k, 2u);
}

TEST(SequenceCycle, BusyChildStopsTheScan) {
  std::size_t k = 0;
  std::vector<E> ch{E::kDone, E::kBusy, E::kIdle};
  auto d = SequenceCycle(ch, k);
  EXPECT_EQ(d.node_state, E::kBusy);
  EXPECT_EQ(d.stop_index, 1u);
  EXPECT_FALSE(d.start.has_value()) << "third child is not started";
  EXPECT_EQ(k, 1u);
}

TEST(SequenceCycle, ErrorAbortsBusyRightSiblings) {
  std::size_t k = 0;
  std::vector<E> ch{E::kError, E::kBusy};
  auto d = SequenceCycle(ch, k);
  EXPECT_EQ(d.node_state, E::kError);
  EXPECT_EQ(d.abort, std::vector<std::size_t>{1});
}

TEST(SequenceCycle, IdleChildIsStarted) {
  std::size_t k = 0;
  std::vector<E> ch{E::kIdle, E::kIdle};
  auto d = SequenceCycle(ch, k);
  EXPECT_EQ(d.node_state, E::kBusy);
  EXPECT_EQ(d.start, 0u);
}

TEST(SequenceCycle, AbortedChildIsAFault) {
  std::size_t k = 0;
  std::vector<E> ch{E::kAborted};
  try {
    SequenceCycle(ch, k);
    FAIL();
  } catch (const EngineFault& e) {
    EXPECT_STREQ(e.what(), "child in Aborted without node-level abort pending");
  }
}

TEST(FallbackCycle, Rows) {
  std::size_t k = 0;
  std::vector<E> a{E::kError, E::kDone};
  EXPECT_EQ(FallbackCycle(a, k).node_state, E::kDone);
  k = 0;
  std::vector<E> b{E::kError, E::kError};
  EXPECT_EQ(FallbackCycle(b, k).node_state, E::kError);
  EXPECT_EQ(k, 2u);
  k = 0;
  std::vector<E> c{E::kBusy, E::kDone};
  EXPECT_EQ(FallbackCycle(c, k).node_state, E::kBusy);
}

TEST(ControlCycle, DualityExhaustive) {
  const std::vector<E> vals{E::kIdle, E::kBusy, E::kDone, E::kError};
  auto swap = [](E s) { return s == E::kDone ? E::kError : s == E::kError ? E::kDone : s; };
  for (std::size_t n = 1; n <= 4; ++n) {
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      std::vector<E> ch, sw;
      for (auto i : idx) {
        ch.push_back(vals[i]);
        sw.push_back(swap(vals[i]));
      }
      std::size_t k1 = 0, k2 = 0;
      auto a = SequenceCycle(ch, k1);
      auto b = FallbackCycle(sw, k2);
      ASSERT_EQ(a.node_state, swap(b.node_state));
      ASSERT_EQ(a.stop_index, b.stop_index);
      ASSERT_EQ(k1, k2);
      std::size_t p = 0;
      while (p < n && ++idx[p] == vals.size()) idx[p++] = 0;
      if (p == n) break;
    }
  }
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

TEST(Scan, GuardedActionFirstCycle) {
  CyclicEngine eng(GuardedAction("F", "S", "R"));
  auto c = eng.Scan();
  std::vector<std::string> order;
  for (const auto& e : c.entries) order.push_back(e.node);
  EXPECT_EQ(order, (std::vector<std::string>{"Fallback", "C1", "Sequence", "C2", "a"}));
  EXPECT_EQ(States(c), (std::vector<E>{E::kBusy, E::kError, E::kBusy, E::kDone, E::kBusy}));
}

TEST(Scan, RootExecuteLowKeepsEverythingIdle) {
  CyclicEngine eng(GuardedAction("F", "S", "R"));
  for (int i = 0; i < 3; ++i) {
    auto c = eng.Scan({false, false});
    for (const auto& e : c.entries) EXPECT_EQ(e.state, E::kIdle) << e.node;
  }
}

TEST(Scan, ConditionFlipPreemptsRunningAction) {
  CyclicEngine eng(GuardedAction("FFS", "S", "R"));
  eng.Scan();
  eng.Scan();
  auto c = eng.Scan();
  EXPECT_EQ(eng.root_state(), E::kDone);
  EXPECT_TRUE(eng.inputs("a").abort);
  EXPECT_EQ(eng.state("a"), E::kAborted);
  EXPECT_EQ(eng.state("Sequence"), E::kAborted);
  EXPECT_EQ(eng.state("C2"), E::kIdle);
}

TEST(Scan, SlowAbortSettlesWithinTwoCycles) {
  CyclicEngine eng(GuardedAction("FS", "S", "R", 1));
  eng.Scan();
  eng.Scan();
  EXPECT_EQ(eng.root_state(), E::kDone);
  EXPECT_EQ(eng.state("a"), E::kAborting);
  EXPECT_EQ(eng.state("Sequence"), E::kAborting);
  eng.Scan();
  EXPECT_EQ(eng.state("a"), E::kAborted);
  EXPECT_EQ(eng.state("Sequence"), E::kAborted);
  eng.Scan();
  EXPECT_EQ(eng.state("a"), E::kIdle);
  EXPECT_EQ(eng.state("Sequence"), E::kIdle);
}

TEST(Scan, ReactivatedBeforeAbortSettlesReArms) {
  // C1 succeeds for one cycle only; the action is still aborting when the
  // sequence is reactivated, so it is held low and restarted afterwards.
  CyclicEngine eng(GuardedAction("FSF", "S", "R", 2));
  eng.Scan();
  eng.Scan();
  EXPECT_EQ(eng.state("a"), E::kAborting);
  eng.Scan();
  EXPECT_EQ(eng.root_state(), E::kBusy);
  EXPECT_FALSE(eng.inputs("a").execute);
  eng.Scan();
  EXPECT_EQ(eng.state("a"), E::kAborted);
  eng.Scan();
  EXPECT_EQ(eng.state("a"), E::kBusy);
  EXPECT_EQ(static_cast<ScriptedAction*>(eng.leaf("a"))->starts(), 2);
}

TEST(Scan, EachNodeInvokedOncePerCycle) {
  CyclicEngine eng(GuardedAction("FFS", "S", "RRRS"));
  for (int i = 0; i < 6; ++i) {
    eng.Scan();
    for (int n : eng.invocations()) EXPECT_EQ(n, 1);
  }
}

TEST(Scan, UnknownBindingIsRejected) {
  auto t = BuildTree("T", Action("MoveTo"));
  EXPECT_THROW(CyclicEngine{t}, BindingError);
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

TEST(Run, GuardedActionDoneAtCycleTwo) {
  CyclicEngine eng(GuardedAction("FFS", "S", "R"));
  auto r = eng.Run(100);
  EXPECT_EQ(r.outcome, RunOutcome::kRootDone);
  EXPECT_EQ(r.cycles, 3);
  EXPECT_EQ(r.trace.back().cycle, 2);
}

TEST(Run, BudgetExhausted) {
  CyclicEngine eng(GuardedAction("F", "S", "R"));
  auto r = eng.Run(1);
  EXPECT_EQ(r.outcome, RunOutcome::kBudgetExhausted);
  EXPECT_EQ(ToString(r.outcome), "budget exhausted");
  EXPECT_EQ(r.root, E::kBusy);
  EXPECT_THROW(eng.Run(0), std::invalid_argument);
}

TEST(Run, TraceFormat) {
  CyclicEngine eng(GuardedAction("S", "S", "R"));
  auto r = eng.Run(5);
  EXPECT_EQ(r.TraceText(), "cycle;node;state\n0;Fallback;DONE\n0;C1;DONE\n0;Sequence;IDLE\n0;C2;IDLE\n0;a;IDLE\n");
}

// ---------------------------------------------------------------------------
// properties over random trees
// ---------------------------------------------------------------------------

TEST(CyclicProperties, OracleEquivalenceAndInvariants) {
  RandomTreeGen gen(2024, {.max_depth = 5});
  for (int t = 0; t < 600; ++t) {
    auto spec = gen.Next();
    auto r = CheckCyclic(spec, 12);
    ASSERT_TRUE(r.ok) << "tree " << t << ": " << r.detail;
  }
}

TEST(CyclicProperties, Deterministic) {
  RandomTreeGen gen(9, {});
  for (int t = 0; t < 100; ++t) {
    auto spec = gen.Next();
    CyclicEngine a(spec), b(spec);
    ASSERT_EQ(a.Run(12).TraceText(), b.Run(12).TraceText());
  }
}

TEST(CyclicProperties, CorruptedFallbackIsDetected) {
  RandomTreeGen gen(2024, {});
  int caught = 0;
  for (int t = 0; t < 100; ++t) {
    auto spec = gen.Next();
    if (!CheckCyclic<CorruptFallbackRules>(spec, 12).ok) ++caught;
  }
  EXPECT_GT(caught, 0);
}
