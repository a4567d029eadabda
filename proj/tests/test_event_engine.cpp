#include <gtest/gtest.h>

#include <vector>

#include "plcbt/event_engine.hpp"
#include "plcbt/random_tree.hpp"
#include "plcbt/reference.hpp"

using namespace plcbt;

namespace {

constexpr NodeStatus R = NodeStatus::kRunning;
constexpr NodeStatus S = NodeStatus::kSuccess;
constexpr NodeStatus F = NodeStatus::kFailure;

ParamMap Script(const char* s) { return {{"script", std::string(s)}}; }

TreeSpec GuardedAction(const char* c1, const char* c2, const char* a) {
  return BuildTree("T", Fallback("Fallback", {Condition("C1", Script(c1)),
                                             Sequence("Sequence", {Condition("C2", Script(c2)), Action("a", Script(a))})}));
}

Signal RunSig(const std::string& to) { return {SignalKind::kRun, {"p", "CHILD_1"}, {to, "PARENT"}}; }
Signal Halt(const std::string& to) { return {SignalKind::kHalt, {"p", "CHILD_1"}, {to, "PARENT"}}; }
Signal Verdict(SignalKind k, const std::string& to, std::size_t child) {
  return {k, {"c" + std::to_string(child), "PARENT"}, {to, ChildPort(child)}};
}

ControlEcc Ecc2(NodeKind kind) {
  return ControlEcc("n", kind, {"p", "CHILD_1"}, {{"c0", "PARENT"}, {"c1", "PARENT"}});
}

// Drives an ECC into RunningChild2 by passing child 1.
void ToSecond(ControlEcc& ecc) {
  ecc.Deliver(RunSig("n"), 0);
  const SignalKind pass = ecc.kind() == NodeKind::kSequence ? SignalKind::kSucc : SignalKind::kFail;
  ecc.Deliver(Verdict(pass, "n", 0), 0);
  ASSERT_EQ(ecc.state(), ProcState::kRunningChild2);
}

std::vector<std::vector<NodeStatus>> AllTuples(std::size_t n) {
  std::vector<std::vector<NodeStatus>> out{{}};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<NodeStatus>> next;
    for (const auto& t : out) {
      for (NodeStatus s : {R, S, F}) {
        auto u = t;
        u.push_back(s);
        next.push_back(u);
      }
    }
    out = std::move(next);
  }
  return out;
}

std::optional<NodeStatus> RunFlat(NodeKind kind, const std::vector<NodeStatus>& st) {
  std::vector<NodeExpr> kids;
  for (std::size_t i = 0; i < st.size(); ++i) {
    kids.push_back(Action("a" + std::to_string(i), {{"script", std::string(1, ToLetter(st[i]))}}));
  }
  auto spec = BuildTree("T", NodeExpr{"root", kind, kids, {}});
  auto sys = EventSystem::Build(spec, MakeScriptedEventLeaf, {});
  auto out = sys.RunUntilQuiescent(1000);
  EXPECT_TRUE(out.quiescent);
  EXPECT_TRUE(sys.faults().empty());
  return sys.RootStatus();
}

}  // namespace

// ---------------------------------------------------------------------------
// deliver
// ---------------------------------------------------------------------------

TEST(Deliver, LeafIdleRunGoesRunningSilently) {
  LeafProcess p("a", {"p", "CHILD_1"}, std::make_unique<ScriptedEventLeaf>(LeafScript::Parse("S")));
  auto r = p.Deliver(RunSig("a"), 0);
  EXPECT_EQ(p.state(), ProcState::kRunning);
  EXPECT_TRUE(r.emitted.empty());
  EXPECT_TRUE(p.Deliver(RunSig("a"), 0).ignored) << "duplicate run is idempotent";
  EXPECT_TRUE(p.leaf().Pending());
}

TEST(Deliver, LeafVerdictEmitsOnce) {
  LeafProcess p("a", {"p", "CHILD_1"}, std::make_unique<ScriptedEventLeaf>(LeafScript::Parse("F")));
  p.Deliver(RunSig("a"), 0);
  EXPECT_FALSE(p.leaf().Poll(0).has_value()) << "replies the round after run";
  auto v = p.leaf().Poll(1);
  ASSERT_EQ(v, F);
  auto r = p.Complete(*v);
  EXPECT_EQ(p.state(), ProcState::kFailure);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0], (Signal{SignalKind::kFail, {"a", "PARENT"}, {"p", "CHILD_1"}}));
}

TEST(Deliver, HaltStopsRunningLeafAndIsIgnoredAtRest) {
  LeafProcess p("a", {"p", "CHILD_1"}, std::make_unique<ScriptedEventLeaf>(LeafScript::Parse("S")));
  EXPECT_TRUE(p.Deliver(Halt("a"), 0).ignored);
  p.Deliver(RunSig("a"), 0);
  EXPECT_TRUE(p.Deliver(Halt("a"), 0).emitted.empty());
  EXPECT_EQ(p.state(), ProcState::kIdle);
  EXPECT_FALSE(p.leaf().Pending());
}

TEST(Deliver, WrongPortIsAConformanceFault) {
  LeafProcess p("a", {"p", "CHILD_1"}, std::make_unique<ScriptedEventLeaf>(LeafScript::Parse("S")));
  auto r = p.Deliver({SignalKind::kSucc, {"x", "PARENT"}, {"a", "PARENT"}}, 0);
  EXPECT_TRUE(r.fault.has_value());
  EXPECT_EQ(p.state(), ProcState::kIdle);
  EXPECT_TRUE(p.Deliver(RunSig("b"), 0).fault.has_value());
}

TEST(Deliver, SequenceFirstChildSuccessRunsSecond) {
  auto ecc = Ecc2(NodeKind::kSequence);
  auto r0 = ecc.Deliver(RunSig("n"), 0);
  EXPECT_EQ(ecc.state(), ProcState::kRunningChild1);
  ASSERT_EQ(r0.emitted.size(), 1u);
  EXPECT_EQ(r0.emitted[0], (Signal{SignalKind::kRun, {"n", "CHILD_1"}, {"c0", "PARENT"}}));
  auto r = ecc.Deliver(Verdict(SignalKind::kSucc, "n", 0), 0);
  EXPECT_EQ(ecc.state(), ProcState::kRunningChild2);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0], (Signal{SignalKind::kRun, {"n", "CHILD_2"}, {"c1", "PARENT"}}));
}

TEST(Deliver, SequenceLastChildSuccessSucceeds) {
  auto ecc = Ecc2(NodeKind::kSequence);
  ToSecond(ecc);
  auto r = ecc.Deliver(Verdict(SignalKind::kSucc, "n", 1), 0);
  EXPECT_EQ(ecc.state(), ProcState::kSuccess);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0], (Signal{SignalKind::kSucc, {"n", "PARENT"}, {"p", "CHILD_1"}}));
}

TEST(Deliver, SequenceChildFailureFails) {
  auto ecc = Ecc2(NodeKind::kSequence);
  ecc.Deliver(RunSig("n"), 0);
  auto r = ecc.Deliver(Verdict(SignalKind::kFail, "n", 0), 0);
  EXPECT_EQ(ecc.state(), ProcState::kFailure);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0].kind, SignalKind::kFail);
}

TEST(Deliver, HaltForwardsToRunningChildOnly) {
  auto ecc = Ecc2(NodeKind::kSequence);
  ToSecond(ecc);
  auto r = ecc.Deliver(Halt("n"), 0);
  EXPECT_EQ(ecc.state(), ProcState::kIdle);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0], (Signal{SignalKind::kHalt, {"n", "CHILD_2"}, {"c1", "PARENT"}}));
  EXPECT_TRUE(ecc.Deliver(Halt("n"), 0).ignored);
}

TEST(Deliver, StaleVerdictIsIgnored) {
  auto ecc = Ecc2(NodeKind::kSequence);
  ToSecond(ecc);
  auto r = ecc.Deliver(Verdict(SignalKind::kFail, "n", 0), 0);
  EXPECT_TRUE(r.ignored);
  EXPECT_EQ(ecc.state(), ProcState::kRunningChild2);
  ecc.Deliver(Halt("n"), 0);
  EXPECT_TRUE(ecc.Deliver(Verdict(SignalKind::kSucc, "n", 1), 0).ignored);
  EXPECT_EQ(ecc.state(), ProcState::kIdle);
}

TEST(Deliver, RunRearmsAfterCompletion) {
  auto ecc = Ecc2(NodeKind::kSequence);
  ecc.Deliver(RunSig("n"), 0);
  ecc.Deliver(Verdict(SignalKind::kFail, "n", 0), 0);
  auto r = ecc.Deliver(RunSig("n"), 1);
  EXPECT_EQ(ecc.state(), ProcState::kRunningChild1);
  EXPECT_EQ(r.emitted.size(), 1u);
}

TEST(Fallback2Deliver, FirstChildFailureRunsSecond) {
  auto ecc = Ecc2(NodeKind::kFallback);
  ecc.Deliver(RunSig("n"), 0);
  auto r = ecc.Deliver(Verdict(SignalKind::kFail, "n", 0), 0);
  EXPECT_EQ(ecc.state(), ProcState::kRunningChild2);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0], (Signal{SignalKind::kRun, {"n", "CHILD_2"}, {"c1", "PARENT"}}));
}

TEST(Fallback2Deliver, FirstChildSuccessSucceeds) {
  auto ecc = Ecc2(NodeKind::kFallback);
  ecc.Deliver(RunSig("n"), 0);
  auto r = ecc.Deliver(Verdict(SignalKind::kSucc, "n", 0), 0);
  EXPECT_EQ(ecc.state(), ProcState::kSuccess);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0].kind, SignalKind::kSucc);
}

TEST(Fallback2Deliver, SecondChildFailureFails) {
  auto ecc = Ecc2(NodeKind::kFallback);
  ToSecond(ecc);
  auto r = ecc.Deliver(Verdict(SignalKind::kFail, "n", 1), 0);
  EXPECT_EQ(ecc.state(), ProcState::kFailure);
  ASSERT_EQ(r.emitted.size(), 1u);
  EXPECT_EQ(r.emitted[0].kind, SignalKind::kFail);
}

// ---------------------------------------------------------------------------
// compose_nary
// ---------------------------------------------------------------------------

TEST(ComposeNary, SequenceOfThreeIsRightLeaning) {
  auto c = ComposeNary(NodeKind::kSequence, "s", {"a", "b", "c"});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (BinaryNode{"s", NodeKind::kSequence, {"a", "s/1"}}));
  EXPECT_EQ(c[1], (BinaryNode{"s/1", NodeKind::kSequence, {"b", "c"}}));
}

TEST(ComposeNary, PairIsUnchanged) {
  auto c = ComposeNary(NodeKind::kFallback, "f", {"a", "b"});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], (BinaryNode{"f", NodeKind::kFallback, {"a", "b"}}));
}

TEST(ComposeNary, FewerThanTwoRejected) {
  EXPECT_THROW(ComposeNary(NodeKind::kSequence, "s", {"a"}), std::invalid_argument);
  EXPECT_THROW(ComposeNary(NodeKind::kAction, "s", {"a", "b"}), std::invalid_argument);
}

TEST(ComposeNary, ExhaustiveAgainstCombine) {
  for (NodeKind kind : {NodeKind::kSequence, NodeKind::kFallback}) {
    for (std::size_t n = 1; n <= 5; ++n) {
      for (const auto& t : AllTuples(n)) {
        auto got = RunFlat(kind, t);
        ASSERT_TRUE(got.has_value());
        ASSERT_EQ(*got, Combine(kind, t)) << ToString(kind) << " n=" << n;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// step / run_until_quiescent
// ---------------------------------------------------------------------------

TEST(EventSystem, EmptyQueuesProcessNothing) {
  auto sys = EventSystem::Build(GuardedAction("S", "S", "S"), MakeScriptedEventLeaf, {});
  EXPECT_EQ(sys.Step(0), 0u);
  EXPECT_TRUE(sys.Quiescent());
  EXPECT_THROW(sys.RunUntilQuiescent(0), std::invalid_argument);
}

TEST(EventSystem, GuardedActionSingleRuntime) {
  auto sys = EventSystem::Build(GuardedAction("S", "F", "R"), MakeScriptedEventLeaf, {});
  auto out = sys.RunUntilQuiescent(100);
  ASSERT_TRUE(out.quiescent);
  EXPECT_EQ(sys.RootStatus(), S);
  EXPECT_LE(out.signals, 6);
  EXPECT_EQ(sys.state("Sequence"), ProcState::kIdle) << "never entered";
}

TEST(EventSystem, GuardedActionActionRunningNeverRepliesButQuiesces) {
  auto sys = EventSystem::Build(GuardedAction("F", "S", "R"), MakeScriptedEventLeaf, {});
  auto out = sys.RunUntilQuiescent(100);
  ASSERT_TRUE(out.quiescent);
  EXPECT_EQ(sys.RootStatus(), R);
  EXPECT_EQ(sys.state("a"), ProcState::kRunning);
}

TEST(EventSystem, RemoteLeafWithLatencyMatchesLocal) {
  auto spec = GuardedAction("F", "S", "S");
  Placement two{{"coord", "drive"}, {{"a", 1}}};
  auto local = EventSystem::Build(spec, MakeScriptedEventLeaf, {});
  auto remote = EventSystem::Build(spec, MakeScriptedEventLeaf, two, 3);
  auto a = local.RunUntilQuiescent(1000);
  auto b = remote.RunUntilQuiescent(1000);
  ASSERT_TRUE(a.quiescent && b.quiescent);
  EXPECT_EQ(local.NodeStates(), remote.NodeStates());
  EXPECT_GT(b.rounds, a.rounds);
}

TEST(EventSystem, NonQuiescentReportsSnapshot) {
  auto spec = GuardedAction("F", "S", "S");
  Placement two{{"coord", "drive"}, {{"a", 1}}};
  auto sys = EventSystem::Build(spec, MakeScriptedEventLeaf, two, 50);
  auto out = sys.RunUntilQuiescent(10);
  EXPECT_FALSE(out.quiescent);
  EXPECT_NE(out.snapshot.find("channel coord->drive"), std::string::npos) << out.snapshot;
}

TEST(EventSystem, TraceLines) {
  auto sys = EventSystem::Build(BuildTree("T", Action("a", Script("S"))), MakeScriptedEventLeaf, {});
  sys.RunUntilQuiescent(10);
  EXPECT_EQ(sys.TraceText(), "0;rt0;run;env.ROOT;a.PARENT\n0;rt0;a;RUNNING\n1;rt0;a;SUCCESS\n");
}

TEST(EventSystem, NaryChainIsPlacedWithItsNode) {
  auto spec = BuildTree("T", Sequence("s", {Action("a", Script("S")), Action("b", Script("S")),
                                          Action("c", Script("S"))}));
  Placement p{{"x", "y"}, {{"s", 1}}};
  auto sys = EventSystem::Build(spec, MakeScriptedEventLeaf, p, 1);
  EXPECT_EQ(sys.RuntimeOf("s/1"), 1u);
  EXPECT_EQ(sys.RuntimeOf("a"), 0u);
  sys.RunUntilQuiescent(100);
  EXPECT_EQ(sys.RootStatus(), S);
}

// ---------------------------------------------------------------------------
// properties over random trees
// ---------------------------------------------------------------------------

TEST(EventProperties, QuiescentAgreementLatencyInvarianceEmission) {
  RandomTreeGen gen(77, {});
  for (int t = 0; t < 300; ++t) {
    auto spec = gen.Next();
    const auto expected = ReferenceTick(spec, FinalStates(ScriptsOf(spec))).root;
    std::vector<std::pair<std::string, std::string>> baseline;
    for (int latency : {0, 1, 5}) {
      auto sys = EventSystem::Build(spec, MakeScriptedEventLeaf, SplitPlacement(spec, 3), latency);
      auto out = sys.RunUntilQuiescent(5000);
      ASSERT_TRUE(out.quiescent) << "tree " << t;
      ASSERT_TRUE(sys.faults().empty()) << sys.faults().front();
      ASSERT_EQ(sys.RootStatus(), expected) << "tree " << t << " latency " << latency;
      for (const auto& p : sys.processes()) ASSERT_EQ(p->terminal_entries(), p->verdicts_emitted()) << p->id();
      if (latency == 0) {
        baseline = sys.NodeStates();
      } else {
        ASSERT_EQ(sys.NodeStates(), baseline) << "tree " << t << " latency " << latency;
      }
    }
  }
}

TEST(EventProperties, HaltConvergence) {
  RandomTreeGen gen(31, {});
  std::mt19937_64 rng(3);
  int halted = 0;
  for (int t = 0; t < 400; ++t) {
    auto spec = gen.Next();
    const int latency = std::array{0, 1, 5}[rng() % 3];
    auto sys = EventSystem::Build(spec, MakeScriptedEventLeaf, SplitPlacement(spec, 2), latency);
    sys.Start();
    const long long warmup = static_cast<long long>(rng() % 12);
    for (long long r = 0; r < warmup; ++r) sys.Round();
    if (sys.RootStatus() != R) continue;
    ++halted;
    const std::string root = sys.processes()[0]->id();
    sys.Inject({SignalKind::kHalt, {"env", "ROOT"}, {root, "PARENT"}});
    const long long depth = static_cast<long long>(sys.NetworkDepth()) + 1;
    const long long bound = depth * sys.MaxLatency() + depth;
    for (long long r = 0; r < bound; ++r) sys.Round();
    for (const auto& p : sys.processes()) {
      ASSERT_FALSE(IsRunning(p->state())) << "tree " << t << ": " << p->id() << " still running after " << bound
                                          << " rounds";
    }
  }
  EXPECT_GT(halted, 50);
}
