#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "plcbt/adapter.hpp"
#include "plcbt/cyclic_engine.hpp"
#include "plcbt/event_engine.hpp"
#include "plcbt/lts.hpp"
#include "plcbt/virtual_axis.hpp"

using namespace plcbt;

namespace {

using E = ExecState;

EtrigOutputs Out(E s) { return OutputsOf(s); }

// FB whose completion and abort acknowledgment take a chosen number of scans.
class DelayFb : public EtrigA {
 public:
  int work = 2;
  int abort_delay = 0;
  NodeStatus result = NodeStatus::kSuccess;

 protected:
  void OnStart(long long) override { left_ = work; }
  NodeStatus OnStep(long long) override { return left_-- > 0 ? NodeStatus::kRunning : result; }
  bool OnAbort(long long) override {
    if (pending_ < 0) pending_ = abort_delay;
    if (pending_-- == 0) {
      pending_ = -1;
      return true;
    }
    return false;
  }

 private:
  int left_ = 0;
  int pending_ = -1;
};

}  // namespace

// ---------------------------------------------------------------------------
// compose / explore
// ---------------------------------------------------------------------------

TEST(Explore, ProcessSmAlone) {
  auto r = Explore(ProcessLts());
  EXPECT_EQ(r.reachable.size(), 4u);
  EXPECT_TRUE(r.deadlocks.empty());
}

TEST(Explore, EtrigSmAlone) {
  auto r = Explore(EtrigLts());
  EXPECT_EQ(r.reachable.size(), 6u);
  EXPECT_TRUE(r.deadlocks.empty());
}

TEST(Explore, AdapterProduct) {
  auto r = Explore(AdapterLts());
  std::set<std::string> got(r.reachable.begin(), r.reachable.end());
  // Golden reachable set, recorded at the first verified run.
  EXPECT_EQ(got, (std::set<std::string>{"(Idle,Idle)", "(Running,Busy)", "(Success,Done)", "(Failure,Error)",
                                        "(Idle,Aborting)", "(Idle,Aborted)", "(Success,Idle)", "(Failure,Idle)"}));
  EXPECT_TRUE(r.deadlocks.empty());
  EXPECT_EQ(r.unreachable.size(), 24u - 8u);
  EXPECT_NE(std::find(r.unreachable.begin(), r.unreachable.end(), "(Success,Busy)"), r.unreachable.end());
}

TEST(Explore, FreeProductIsFullProduct) {
  auto r = Explore(Compose(ProcessLts(), EtrigLts(), {}));
  EXPECT_EQ(r.reachable.size(), 24u);
  EXPECT_GT(r.reachable.size(), Explore(AdapterLts()).reachable.size());
}

TEST(Explore, DanglingPortRejected) {
  EXPECT_THROW(Compose(ProcessLts(), EtrigLts(), {{"run", "xStart"}}), std::invalid_argument);
  EXPECT_THROW(Compose(ProcessLts(), EtrigLts(), {{"tick", "xExecute"}}), std::invalid_argument);
}

TEST(Explore, DeadlockIsReported) {
  Lts m;
  m.name = "m";
  m.states = {"a", "b"};
  m.initial = "a";
  m.inputs = {"go"};
  m.transitions = {{"a", "go", "b"}};
  EXPECT_EQ(Explore(m).deadlocks, std::vector<std::string>{"b"});
  m.terminal = {"b"};
  EXPECT_TRUE(Explore(m).deadlocks.empty());
}

TEST(HaltPaths, EveryHaltDuringBusyEndsBothIdleWithinSix) {
  auto r = TriggeredPaths(
      AdapterLts(), [](const std::string& s) { return s.starts_with("(Running,"); }, "halt/xAbort",
      AdapterEnvironmentEvents(), 6);
  EXPECT_GT(r.starts, 0u);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(r.terminals, std::set<std::string>{"(Idle,Idle)"});
  EXPECT_LE(r.max_length, 6u);
  EXPECT_EQ(r.max_length, 3u);
}

// ---------------------------------------------------------------------------
// runtime adapter
// ---------------------------------------------------------------------------

TEST(EtrigAdapter, RunAtRestAssertsExecute) {
  EtrigAdapter a;
  EXPECT_EQ(a.OnBt({SyncKind::kRun, 1}), (EtrigInputs{true, false}));
}

TEST(EtrigAdapter, HaltWhileBusyAssertsAbort) {
  EtrigAdapter a;
  a.OnBt({SyncKind::kRun, 1});
  a.OnFb(Out(E::kBusy));
  EXPECT_TRUE(a.OnBt({SyncKind::kHalt, 1}).abort);
}

TEST(EtrigAdapter, HaltAtRestChangesNothing) {
  EtrigAdapter a;
  auto before = a.command();
  EXPECT_EQ(a.OnBt({SyncKind::kHalt, 0}), before);
}

TEST(EtrigAdapter, DoneIsSuccAndRearms) {
  EtrigAdapter a;
  a.OnBt({SyncKind::kRun, 4});
  a.OnFb(Out(E::kBusy));
  auto m = a.OnFb(Out(E::kDone));
  EXPECT_EQ(m, (SyncMessage{SyncKind::kSucc, 4}));
  EXPECT_FALSE(a.command().execute);
}

TEST(EtrigAdapter, ErrorIsFail) {
  EtrigAdapter a;
  a.OnBt({SyncKind::kRun, 1});
  EXPECT_EQ(a.OnFb(Out(E::kError)), (SyncMessage{SyncKind::kFail, 1}));
}

TEST(EtrigAdapter, AbortedAfterHaltIsFailWithSameSeq) {
  EtrigAdapter a;
  a.OnBt({SyncKind::kRun, 7});
  a.OnFb(Out(E::kBusy));
  a.OnBt({SyncKind::kHalt, 7});
  EXPECT_FALSE(a.OnFb(Out(E::kAborting)).has_value());
  EXPECT_EQ(a.OnFb(Out(E::kAborted)), (SyncMessage{SyncKind::kFail, 7}));
  EXPECT_EQ(a.command(), (EtrigInputs{false, false}));
}

TEST(EtrigAdapter, DoneAndErrorTogetherIsAFault) {
  EtrigAdapter a;
  a.OnBt({SyncKind::kRun, 1});
  EXPECT_THROW(a.OnFb({false, true, true, false}), EngineFault);
}

TEST(EtrigAdapter, RunWhileFinalizingIsQueued) {
  EtrigAdapter a;
  a.OnBt({SyncKind::kRun, 1});
  a.OnFb(Out(E::kBusy));
  a.OnBt({SyncKind::kHalt, 1});
  a.OnFb(Out(E::kAborting));
  a.OnBt({SyncKind::kRun, 2});
  EXPECT_TRUE(a.queued());
  EXPECT_EQ(a.OnFb(Out(E::kAborted)), (SyncMessage{SyncKind::kFail, 1}));
  EXPECT_FALSE(a.command().execute) << "reset before the new edge";
  a.OnFb(Out(E::kIdle));
  EXPECT_TRUE(a.command().execute);
  a.OnFb(Out(E::kBusy));
  EXPECT_EQ(a.OnFb(Out(E::kDone)), (SyncMessage{SyncKind::kSucc, 2}));
}

TEST(EtrigAdapter, HaltBeforeScanWithdrawsAndAnswers) {
  EtrigAdapter a;
  a.OnBt({SyncKind::kRun, 3});
  a.OnBt({SyncKind::kHalt, 3});
  EXPECT_FALSE(a.command().execute);
  EXPECT_EQ(a.TakeOutbox(), (std::vector<SyncMessage>{{SyncKind::kFail, 3}}));
}

TEST(SyncMessage, WireRoundTrip) {
  for (SyncKind k : {SyncKind::kRun, SyncKind::kHalt, SyncKind::kSucc, SyncKind::kFail}) {
    SyncMessage m{k, 123456789012ull};
    EXPECT_EQ(SyncMessage::Decode(m.Encode()), m);
    EXPECT_EQ(SyncMessage::Decode(m.Encode() + "\n"), m);
  }
  EXPECT_EQ((SyncMessage{SyncKind::kHalt, 5}.Encode()), "5:HALT");
  for (const char* bad : {"", ":RUN", "x:RUN", "5:run", "5RUN", "5:RUNX", "-1:RUN"}) {
    EXPECT_THROW(SyncMessage::Decode(bad), std::invalid_argument) << bad;
  }
}

TEST(SyncClient, StaleAnswersChangeNothing) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    SyncClient c;
    for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) {
      switch (rng() % 3) {
        case 0: c.Run(); break;
        case 1: c.Halt(); break;
        default: c.Accept({rng() % 2 ? SyncKind::kSucc : SyncKind::kFail, c.seq()}); break;
      }
    }
    const auto seq = c.seq();
    const bool active = c.active(), halting = c.halting();
    std::uint64_t wrong = seq + 1 + rng() % 5;
    if (seq > 0 && rng() % 2) wrong = rng() % seq;
    EXPECT_FALSE(c.Accept({rng() % 2 ? SyncKind::kSucc : SyncKind::kFail, wrong}).has_value());
    EXPECT_EQ(c.seq(), seq);
    EXPECT_EQ(c.active(), active);
    EXPECT_EQ(c.halting(), halting);
  }
}

TEST(EtrigAdapter, StaleHaltChangesNothing) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    EtrigAdapter a;
    std::uint64_t seq = 0;
    for (int i = 0, n = static_cast<int>(rng() % 8); i < n; ++i) {
      switch (rng() % 3) {
        case 0: a.OnBt({SyncKind::kRun, ++seq}); break;
        case 1: a.OnBt({SyncKind::kHalt, seq}); break;
        default: a.OnFb(Out(std::array{E::kIdle, E::kBusy, E::kDone, E::kError}[rng() % 4])); break;
      }
    }
    if (seq == 0) continue;
    EtrigAdapter before = a;
    a.OnBt({SyncKind::kHalt, seq - 1 - rng() % seq});
    EXPECT_TRUE(a == before);
  }
}

// Random BT requests against a real FB through the loopback link: every RUN
// is answered exactly once, only the current activation is accepted, and a
// halt always settles both sides.
TEST(FbPort, RandomInterleavings) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    DelayFb fb;
    fb.work = static_cast<int>(rng() % 4);
    fb.abort_delay = static_cast<int>(rng() % 3);
    fb.result = rng() % 2 ? NodeStatus::kSuccess : NodeStatus::kFailure;
    FbPort port;
    SyncClient client;
    std::map<std::uint64_t, int> answers;
    long long cycle = 0;
    for (int step = 0; step < 60; ++step) {
      const auto op = rng() % 6;
      if (op == 0) port.to_fb.Send(client.Run());
      if (op == 1) {
        if (auto h = client.Halt()) port.to_fb.Send(*h);
      }
      port.Scan(fb, cycle++);
      while (auto m = port.to_bt.Receive()) {
        ++answers[m->seq];
        if (auto v = client.Accept(*m)) {
          EXPECT_EQ(m->seq, client.seq());
        }
      }
    }
    if (auto h = client.Halt()) port.to_fb.Send(*h);
    for (int i = 0; i < 20; ++i) {
      port.Scan(fb, cycle++);
      while (auto m = port.to_bt.Receive()) {
        ++answers[m->seq];
        client.Accept(*m);
      }
    }
    EXPECT_EQ(fb.state(), E::kIdle) << "trial " << trial;
    EXPECT_FALSE(client.halting());
    for (std::uint64_t s = 1; s <= client.seq(); ++s) EXPECT_EQ(answers[s], 1) << "trial " << trial << " seq " << s;
  }
}

// ---------------------------------------------------------------------------
// end-to-end through the virtual axis
// ---------------------------------------------------------------------------

namespace {

TreeSpec MoveTree() {
  return BuildTree("move", Sequence("root", {Fallback("power", {Condition("AxisPowered"), Action("Power")}),
                                            Action("MoveTo", {{"pos", 20.0}, {"vel", 50.0}})}));
}

struct CyclicOutcome {
  RunOutcome outcome;
  double position;
};

CyclicOutcome RunCyclic(const TreeSpec& t, std::optional<long long> fault) {
  AxisPlant plant({.cycle_time = 0.01, .fault_at_cycle = fault});
  CyclicEngine eng(t, AxisLeafFactory(plant));
  eng.SetPlant(&plant);
  auto r = eng.Run(1000);
  return {r.outcome, plant.axis().position};
}

std::optional<NodeStatus> RunEvent(const TreeSpec& t, std::optional<long long> fault, double* position) {
  AxisPlant plant({.cycle_time = 0.01, .fault_at_cycle = fault});
  auto sys = EventSystem::Build(t, AxisEventLeafFactory(plant), {});
  sys.SetRoundHook([&plant](long long r) { plant.Cycle(r); });
  auto q = sys.RunUntilQuiescent(1000);
  EXPECT_TRUE(q.quiescent);
  EXPECT_TRUE(sys.faults().empty());
  *position = plant.axis().position;
  return sys.RootStatus();
}

}  // namespace

TEST(EndToEnd, EventAdapterMatchesCyclicFaultFree) {
  auto c = RunCyclic(MoveTree(), std::nullopt);
  double pos = 0;
  auto e = RunEvent(MoveTree(), std::nullopt, &pos);
  EXPECT_EQ(c.outcome, RunOutcome::kRootDone);
  EXPECT_EQ(e, NodeStatus::kSuccess);
  EXPECT_EQ(c.position, 20.0);
  EXPECT_EQ(pos, 20.0);
}

TEST(EndToEnd, EventAdapterMatchesCyclicWithFault) {
  auto c = RunCyclic(MoveTree(), 10);
  double pos = 0;
  auto e = RunEvent(MoveTree(), 10, &pos);
  EXPECT_EQ(c.outcome, RunOutcome::kRootError);
  EXPECT_EQ(e, NodeStatus::kFailure);
}
