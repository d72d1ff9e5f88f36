#include <gtest/gtest.h>

#include <set>

#include "imime/attention.hpp"
#include "imime/behavior.hpp"
#include "imime/error.hpp"
#include "imime/rng.hpp"

using namespace imime;

namespace {

PerceptionTick frontal_tick(double t) {
  PerceptionTick p;
  p.time_seconds = t;
  p.orientation = face::fuse_orientation(0, 0);
  p.jerk = 0;
  return p;
}

AttentionState present(bool attending = true) {
  AttentionState a;
  a.face_present = true;
  a.attending = attending;
  return a;
}

void check_invariants(const AttentionState& s) {
  if (s.attending) EXPECT_TRUE(s.face_present);
  if (s.interest == Interest::Engaged) EXPECT_TRUE(s.gesture.has_value());
  if (s.interest == Interest::Interested) EXPECT_TRUE(s.attending);
}

}  // namespace

TEST(Attention, NoFace) {
  AttentionFusion fusion;
  PerceptionTick p;
  p.expression = "Smile";
  p.jerk = 100;
  const auto s = fusion.evaluate(p);
  EXPECT_FALSE(s.face_present);
  EXPECT_FALSE(s.attending);
  EXPECT_EQ(s.interest, Interest::Passive);
  EXPECT_FALSE(s.erratic);
}

TEST(Attention, FrontalSmileIsInterested) {
  AttentionFusion fusion;
  auto p = frontal_tick(0);
  p.expression = "Smile";
  const auto s = fusion.evaluate(p);
  EXPECT_TRUE(s.attending);
  EXPECT_EQ(s.interest, Interest::Interested);
  EXPECT_FALSE(s.gesture);
}

TEST(Attention, EngagedAndErraticAreIndependent) {
  AttentionFusion fusion;
  AttentionState s;
  for (int k = 0; k < 3; ++k) {
    auto p = frontal_tick(0.1 * k);
    p.pose = "Wave";
    p.jerk = 50;
    s = fusion.evaluate(p);
    EXPECT_EQ(s.erratic, k == 2);
  }
  EXPECT_TRUE(s.attending);
  EXPECT_EQ(s.interest, Interest::Engaged);
  EXPECT_EQ(s.gesture, "Wave");
}

TEST(Attention, DecisionTable) {
  // orientation x expression x gesture x jerk run
  const std::optional<face::Orientation> orientations[] = {std::nullopt, face::Orientation::Frontal,
                                                           face::Orientation::Left};
  for (const auto& o : orientations) {
    for (const char* expr : {"Neutral", "Smile"}) {
      for (const char* pose : {"Unknown", "ArmsDown", "Wave"}) {
        for (int spikes : {0, 2, 3}) {
          AttentionFusion fusion;
          AttentionState s;
          for (int k = 0; k < std::max(spikes, 1); ++k) {
            PerceptionTick p;
            p.time_seconds = 0.1 * k;
            if (o) p.orientation = *o == face::Orientation::Frontal ? face::fuse_orientation(0, 0)
                                                                      : face::fuse_orientation(0.5, -0.6);
            p.expression = expr;
            p.pose = pose;
            p.jerk = spikes > 0 ? 40.0 : 0.0;
            s = fusion.evaluate(p);
          }
          const bool face = o.has_value();
          const bool attending = face && *o == face::Orientation::Frontal;
          const bool gesture = std::string(pose) == "Wave";
          EXPECT_EQ(s.face_present, face);
          EXPECT_EQ(s.attending, attending);
          EXPECT_EQ(s.erratic, face && spikes >= 3);
          EXPECT_EQ(s.gesture.has_value(), gesture);
          Interest want = Interest::Passive;
          if (attending && gesture) {
            want = Interest::Engaged;
          } else if (attending && face && std::string(expr) != "Neutral") {
            want = Interest::Interested;
          }
          EXPECT_EQ(s.interest, want);
          check_invariants(s);
        }
      }
    }
  }
}

TEST(Attention, ExpressionRecencyWindow) {
  AttentionFusion fusion;
  auto p = frontal_tick(0);
  p.expression = "Smile";
  (void)fusion.evaluate(p);
  EXPECT_EQ(fusion.evaluate(frontal_tick(2.0)).interest, Interest::Interested);
  EXPECT_EQ(fusion.evaluate(frontal_tick(2.1)).interest, Interest::Passive);
}

TEST(Attention, GestureNeverLowersInterest) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    AttentionFusion a;
    AttentionFusion b;
    for (int k = 0; k < 5; ++k) {
      PerceptionTick p;
      p.time_seconds = 0.1 * k;
      if (rng.bernoulli(0.8)) p.orientation = face::fuse_orientation(rng.uniform() * 0.1, rng.uniform() - 0.5);
      p.expression = rng.bernoulli(0.3) ? "Smile" : "Neutral";
      p.jerk = rng.uniform() * 20;
      PerceptionTick q = p;
      q.pose = "LeftArmRaised";
      const auto sa = a.evaluate(p);
      const auto sb = b.evaluate(q);
      EXPECT_GE(static_cast<int>(sb.interest), static_cast<int>(sa.interest));
      check_invariants(sa);
      check_invariants(sb);
    }
  }
}

TEST(Scheduler, CoinIsFair) {
  Rng rng(2024);
  BehaviorState st;
  const Policy policy = [](const BehaviorState& s, Rng&) { return s.current; };
  int considered = 0;
  for (long t = 0; t < 10'000; ++t) considered += scheduler_tick(st, rng, t, policy).has_value();
  EXPECT_GE(considered, 4800);
  EXPECT_LE(considered, 5200);
}

TEST(Scheduler, SelfTransitionLeavesStateUnchanged) {
  BehaviorEngine engine(BehaviorConfig{});
  Rng rng(1);
  const auto start = engine.state().current;
  (void)engine.step(present(), 0.1, 0, rng, std::nullopt);  // face appears: Beckon reflex
  for (long t = 1; t < 40; ++t) (void)engine.step(present(), 0.1, t, rng, std::nullopt);
  const auto before = engine.state();
  const auto transitions = engine.transitions().size();
  const Policy same = [](const BehaviorState& s, Rng&) { return s.policy_routine; };
  std::optional<Routine> choice;
  while (!choice) choice = scheduler_tick(engine.state(), rng, 40, same);
  EXPECT_EQ(*choice, start);
  const auto step = engine.step(present(), 0.1, 40, rng, choice);
  EXPECT_EQ(step.routine, before.current);
  EXPECT_EQ(step.cause, Cause::None);
  EXPECT_EQ(engine.transitions().size(), transitions);
}

TEST(Scheduler, Deterministic) {
  auto run = [] {
    Rng rng(77);
    BehaviorState st;
    const Policy policy = [](const BehaviorState&, Rng& r) {
      return default_selectable_routines()[r.index(default_selectable_routines().size())];
    };
    std::vector<int> seq;
    for (long t = 0; t < 500; ++t) {
      const auto c = scheduler_tick(st, rng, t, policy);
      seq.push_back(c ? static_cast<int>(*c) : -1);
    }
    return seq;
  };
  EXPECT_EQ(run(), run());
}

TEST(Reflex, PriorityOrder) {
  const BehaviorConfig cfg;
  Rng rng(5);
  {
    BehaviorState st;
    st.face_seen = true;
    st.current = Routine::Mimic;
    auto a = present();
    a.erratic = true;
    EXPECT_EQ(reflex_step(st, a, 0.9, 0, cfg, rng), Routine::Puzzled);
  }
  {
    BehaviorState st;
    st.face_seen = true;
    const auto r = reflex_step(st, AttentionState{}, 0.0, 0, cfg, rng);
    ASSERT_TRUE(r);
    EXPECT_TRUE(*r == Routine::IdleGazeWander || *r == Routine::IdleDrum);
    // the idle choice is made on entry and kept while the face stays away
    for (long t = 1; t < 50; ++t) EXPECT_EQ(reflex_step(st, AttentionState{}, 0.0, t, cfg, rng), r);
  }
  {
    BehaviorState st;
    EXPECT_EQ(reflex_step(st, present(), 0.5, 0, cfg, rng), Routine::Beckon);
  }
  {
    BehaviorState st;
    st.face_seen = true;
    EXPECT_EQ(reflex_step(st, present(), 0.5, 0, cfg, rng), Routine::DistanceGuide);
    BehaviorState near;
    near.face_seen = true;
    EXPECT_EQ(reflex_step(near, present(), 0.01, 0, cfg, rng), Routine::DistanceGuide);
    BehaviorState fine;
    fine.face_seen = true;
    EXPECT_EQ(reflex_step(fine, present(), 0.1, 0, cfg, rng), std::nullopt);
  }
}

TEST(Reflex, BothIdleRoutinesOccur) {
  const BehaviorConfig cfg;
  Rng rng(8);
  std::set<Routine> seen;
  for (int i = 0; i < 50; ++i) {
    BehaviorState st;
    st.face_seen = true;
    seen.insert(*reflex_step(st, AttentionState{}, 0.0, 0, cfg, rng));
  }
  EXPECT_EQ(seen, (std::set<Routine>{Routine::IdleGazeWander, Routine::IdleDrum}));
}

namespace {

struct Game {
  BehaviorConfig cfg;
  BehaviorState st;
  Rng rng{1};
  long tick = 0;

  GameOutput step(std::optional<std::string> gesture) {
    auto a = present();
    a.gesture = std::move(gesture);
    if (a.gesture) a.interest = Interest::Engaged;
    return simon_step(st, a, tick++, rng, cfg);
  }

  // Runs idle frames until a prompt is issued.
  std::string prompt() {
    while (true) {
      const auto out = step(std::nullopt);
      if (out.event == GameEvent::Prompt) return out.gesture;
    }
  }
};

}  // namespace

TEST(Simon, PonderThenPrompt) {
  Game g;
  g.cfg.prompt_gestures = {"Wave"};
  long ponder = -1;
  while (true) {
    const long t = g.tick;
    const auto out = g.step(std::nullopt);
    if (out.event == GameEvent::Ponder) ponder = t;
    if (out.event == GameEvent::Prompt) {
      EXPECT_EQ(out.gesture, "Wave");
      EXPECT_EQ(ponder, g.cfg.ticks(g.cfg.idle_seconds) + 1);
      EXPECT_EQ(t - ponder, g.cfg.ticks(g.cfg.ponder_seconds));
      EXPECT_EQ(g.st.game.deadline_tick, t + g.cfg.ticks(g.cfg.response_seconds));
      EXPECT_GT(g.st.game.deadline_tick, g.st.game.prompt_tick);
      break;
    }
  }
}

TEST(Simon, DecisionTable) {
  struct Case {
    const char* response;  // nullptr = nothing shown
    bool before_deadline;
    GameEvent want;
  };
  const Case cases[] = {
      {"Wave", true, GameEvent::Reward},          {"Wave", false, GameEvent::Scold},
      {"LeftArmRaised", true, GameEvent::Scold},  {"LeftArmRaised", false, GameEvent::Scold},
      {nullptr, true, GameEvent::None},           {nullptr, false, GameEvent::Scold},
  };
  for (const auto& c : cases) {
    Game g;
    g.cfg.prompt_gestures = {"Wave"};
    ASSERT_EQ(g.prompt(), "Wave");
    const long deadline = g.st.game.deadline_tick;
    while (g.tick < (c.before_deadline ? deadline - 1 : deadline)) {
      ASSERT_EQ(g.step(std::nullopt).event, GameEvent::None);
    }
    std::optional<std::string> shown;
    if (c.response) shown = c.response;
    EXPECT_EQ(g.step(shown).event, c.want) << (c.response ? c.response : "none") << c.before_deadline;
  }
}

TEST(Simon, ResponseLastsConfiguredDurationThenIdles) {
  for (const char* shown : {"Wave", "BothArmsRaised"}) {
    Game g;
    g.cfg.prompt_gestures = {"Wave"};
    (void)g.prompt();
    const long t = g.tick;
    (void)g.step(std::string(shown));
    const long dur = g.cfg.ticks(g.cfg.reward_seconds);
    while (g.tick < t + dur) {
      EXPECT_EQ(g.st.game.phase, GameState::Phase::Responding);
      (void)g.step(std::nullopt);
    }
    EXPECT_EQ(g.st.game.phase, GameState::Phase::Responding);
    (void)g.step(std::nullopt);
    EXPECT_EQ(g.st.game.phase, GameState::Phase::Idle);
  }
}

TEST(Engine, ArbitrationAndDurations) {
  BehaviorConfig cfg;
  cfg.prompt_gestures = {"Wave"};
  BehaviorEngine engine(cfg);
  Rng rng(4);
  long t = 0;
  // face appears, Beckon reflex holds, then policy control
  auto s = engine.step(present(), 0.1, t++, rng, std::nullopt);
  EXPECT_EQ(s.routine, Routine::Beckon);
  EXPECT_EQ(s.source, Cause::Reflex);
  while (engine.step(present(), 0.1, t, rng, std::nullopt).source == Cause::Reflex) ++t;
  EXPECT_EQ(t, cfg.ticks(cfg.reflex_hold_seconds));
  ++t;
  // run into the game and reward
  long reward_start = -1;
  for (; t < 400; ++t) {
    auto a = present();
    if (engine.state().game.phase == GameState::Phase::Prompted && t == engine.state().game.prompt_tick + 5) {
      a.gesture = "Wave";
    }
    s = engine.step(a, 0.1, t, rng, std::nullopt);
    if (s.game.event == GameEvent::Reward) reward_start = t;
    if (reward_start >= 0 && t < reward_start + cfg.ticks(cfg.reward_seconds)) {
      EXPECT_EQ(s.routine, Routine::Reward);
      EXPECT_EQ(s.source, Cause::Game);
    }
    if (reward_start >= 0 && t == reward_start + cfg.ticks(cfg.reward_seconds)) {
      EXPECT_EQ(s.source, Cause::Policy);
      break;
    }
  }
  ASSERT_GE(reward_start, 0);
  // reflex preempts the game
  auto erratic = present();
  erratic.erratic = true;
  s = engine.step(erratic, 0.1, ++t, rng, std::nullopt);
  EXPECT_EQ(s.routine, Routine::Puzzled);
  EXPECT_EQ(s.source, Cause::Reflex);
}

TEST(Engine, MimicMirrorsExpressionAndWave) {
  BehaviorEngine engine(BehaviorConfig{});
  Rng rng(1);
  auto a = present();
  (void)engine.step(a, 0.1, 0, rng, std::nullopt);
  for (long t = 1; t < 25; ++t) (void)engine.step(a, 0.1, t, rng, std::nullopt);
  a.expression = "Smile";
  a.gesture = "Wave";
  const auto s = engine.step(a, 0.1, 25, rng, Routine::Mimic);
  EXPECT_EQ(s.routine, Routine::Mimic);
  EXPECT_EQ(s.directive.mirrored_expression, "Smile");
  EXPECT_TRUE(s.directive.mirror_wave);
}

TEST(Engine, RejectsReflexOnlyPolicyChoice) {
  BehaviorEngine engine(BehaviorConfig{});
  Rng rng(1);
  EXPECT_THROW((void)engine.step(present(), 0.1, 0, rng, Routine::Reward), Error);
  BehaviorConfig bad;
  bad.selectable.push_back(Routine::Scold);
  EXPECT_THROW(BehaviorEngine{bad}, Error);
}

TEST(Engine, NoLivelockUnderRandomInputs) {
  Rng rng(2718);
  for (int trial = 0; trial < 200; ++trial) {
    BehaviorConfig cfg;
    BehaviorEngine engine(cfg);
    const std::vector<std::string> poses{"Wave", "LeftArmRaised", "RightArmRaised", "BothArmsRaised"};
    long t = 0;
    const long noisy = 50 + static_cast<long>(rng.index(400));
    for (; t < noisy; ++t) {
      AttentionState a;
      a.face_present = rng.bernoulli(0.7);
      a.attending = a.face_present && rng.bernoulli(0.5);
      a.erratic = a.face_present && rng.bernoulli(0.1);
      if (a.face_present && rng.bernoulli(0.2)) a.gesture = poses[rng.index(poses.size())];
      const double area = rng.uniform() * 0.5;
      std::optional<Routine> choice;
      if (t % 20 == 0 && rng.bernoulli(0.5)) choice = cfg.selectable[rng.index(cfg.selectable.size())];
      std::size_t before = engine.transitions().size();
      (void)engine.step(a, area, t, rng, choice);
      EXPECT_LE(engine.transitions().size(), before + 1);
    }
    // reflex conditions clear; the viewer may still gesture
    const long cleared = t;
    bool released = false;
    for (; t <= cleared + cfg.max_release_ticks(); ++t) {
      auto a = present(rng.bernoulli(0.5));
      if (rng.bernoulli(0.1)) a.gesture = poses[rng.index(poses.size())];
      const auto s = engine.step(a, 0.1, t, rng, std::nullopt);
      if (s.source == Cause::Policy) {
        EXPECT_EQ(s.routine, engine.state().policy_routine);
        EXPECT_FALSE(is_reflex_only(s.routine));
        released = true;
        break;
      }
    }
    EXPECT_TRUE(released) << "trial " << trial;
  }
}

TEST(Routines, SelectableSetAndNames) {
  const auto sel = default_selectable_routines();
  EXPECT_EQ(sel.size(), kAllRoutines.size() - 3);
  for (Routine r : {Routine::Reward, Routine::Scold, Routine::DistanceGuide}) {
    EXPECT_TRUE(is_reflex_only(r));
    EXPECT_EQ(std::count(sel.begin(), sel.end(), r), 0);
  }
  for (Routine r : kAllRoutines) EXPECT_EQ(parse_routine(to_string(r)), r);
  EXPECT_FALSE(parse_routine("Juggle"));
}
