#include "imime/behavior.hpp"

#include <algorithm>

#include "imime/error.hpp"

namespace imime {

std::string_view to_string(Routine r) noexcept {
  switch (r) {
    case Routine::IdleGazeWander: return "IdleGazeWander";
    case Routine::IdleDrum: return "IdleDrum";
    case Routine::Beckon: return "Beckon";
    case Routine::DistanceGuide: return "DistanceGuide";
    case Routine::Mimic: return "Mimic";
    case Routine::Ponder: return "Ponder";
    case Routine::PromptGesture: return "PromptGesture";
    case Routine::Reward: return "Reward";
    case Routine::Scold: return "Scold";
    case Routine::Puzzled: return "Puzzled";
  }
  return "?";
}

std::optional<Routine> parse_routine(std::string_view name) noexcept {
  for (Routine r : kAllRoutines) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

bool is_reflex_only(Routine r) noexcept {
  return r == Routine::Reward || r == Routine::Scold || r == Routine::DistanceGuide;
}

std::vector<Routine> default_selectable_routines() {
  std::vector<Routine> out;
  for (Routine r : kAllRoutines) {
    if (!is_reflex_only(r)) out.push_back(r);
  }
  return out;
}

std::string_view to_string(Cause c) noexcept {
  switch (c) {
    case Cause::None: return "none";
    case Cause::Reflex: return "reflex";
    case Cause::Game: return "game";
    case Cause::Policy: return "policy";
  }
  return "?";
}

std::string_view to_string(GameEvent e) noexcept {
  switch (e) {
    case GameEvent::None: return "None";
    case GameEvent::Ponder: return "Ponder";
    case GameEvent::Prompt: return "Prompt";
    case GameEvent::Reward: return "Reward";
    case GameEvent::Scold: return "Scold";
  }
  return "?";
}

long BehaviorConfig::max_release_ticks() const {
  return ticks(reflex_hold_seconds) + ticks(ponder_seconds) + ticks(response_seconds) +
         ticks(reward_seconds) + 2;
}

void BehaviorConfig::validate() const {
  if (!(fps > 0)) throw Error(Errc::ConfigError, "behavior.fps must be positive");
  if (selectable.empty()) throw Error(Errc::ConfigError, "behavior.selectable is empty");
  for (Routine r : selectable) {
    if (is_reflex_only(r)) {
      throw Error(Errc::ConfigError,
                  "behavior.selectable: " + std::string(to_string(r)) + " is reflex-only");
    }
  }
  if (prompt_gestures.empty()) throw Error(Errc::ConfigError, "behavior.prompt_gestures is empty");
  if (ticks(response_seconds) < 1) throw Error(Errc::ConfigError, "behavior.response_seconds too short");
  if (!(area_low < area_high)) throw Error(Errc::ConfigError, "behavior.area_low >= area_high");
}

std::optional<Routine> scheduler_tick(const BehaviorState& state, Rng& rng, long /*tick*/,
                                      const Policy& policy, double change_probability) {
  if (!rng.bernoulli(change_probability)) return std::nullopt;
  return policy(state, rng);
}

std::optional<Routine> reflex_step(BehaviorState& st, const AttentionState& a,
                                   double face_area_ratio, long tick, const BehaviorConfig& cfg,
                                   Rng& rng) {
  const bool appeared = a.face_present && !st.face_seen;
  st.face_seen = a.face_present;

  std::optional<Routine> wanted;
  if (a.erratic) {
    wanted = Routine::Puzzled;
  } else if (!a.face_present) {
    if (!st.idle_choice) {
      st.idle_choice = rng.bernoulli(0.5) ? Routine::IdleGazeWander : Routine::IdleDrum;
    }
    wanted = st.idle_choice;
  } else if (appeared) {
    wanted = Routine::Beckon;
  } else if (face_area_ratio < cfg.area_low || face_area_ratio > cfg.area_high) {
    wanted = Routine::DistanceGuide;
  }
  if (a.face_present) st.idle_choice.reset();

  if (wanted) {
    st.reflex = wanted;
    st.reflex_until = tick + cfg.ticks(cfg.reflex_hold_seconds);
    return wanted;
  }
  if (st.reflex && tick < st.reflex_until) return st.reflex;
  st.reflex.reset();
  return std::nullopt;
}

namespace {

GameOutput respond(BehaviorState& st, Routine r, long tick, const BehaviorConfig& cfg) {
  st.game.phase = GameState::Phase::Responding;
  st.game.response = r;
  st.game.until_tick = tick + cfg.ticks(cfg.reward_seconds);
  st.last_interaction_at = tick;
  return {r == Routine::Reward ? GameEvent::Reward : GameEvent::Scold, {}};
}

}  // namespace

GameOutput simon_step(BehaviorState& st, const AttentionState& a, long tick, Rng& rng,
                      const BehaviorConfig& cfg) {
  auto& g = st.game;
  switch (g.phase) {
    case GameState::Phase::Idle:
      if (a.gesture) {
        st.last_interaction_at = tick;
        return {};
      }
      if (tick - st.last_interaction_at > cfg.ticks(cfg.idle_seconds)) {
        g.phase = GameState::Phase::Pondering;
        g.until_tick = tick + cfg.ticks(cfg.ponder_seconds);
        return {GameEvent::Ponder, {}};
      }
      return {};
    case GameState::Phase::Pondering:
      if (tick >= g.until_tick) {
        g.gesture = cfg.prompt_gestures[rng.index(cfg.prompt_gestures.size())];
        g.phase = GameState::Phase::Prompted;
        g.prompt_tick = tick;
        g.deadline_tick = tick + cfg.ticks(cfg.response_seconds);
        return {GameEvent::Prompt, g.gesture};
      }
      return {};
    case GameState::Phase::Prompted:
      if (tick >= g.deadline_tick) return respond(st, Routine::Scold, tick, cfg);
      if (a.gesture) {
        return respond(st, *a.gesture == g.gesture ? Routine::Reward : Routine::Scold, tick, cfg);
      }
      return {};
    case GameState::Phase::Responding:
      if (tick >= g.until_tick) {
        g.phase = GameState::Phase::Idle;
        st.last_interaction_at = tick;
      }
      return {};
  }
  return {};
}

BehaviorEngine::BehaviorEngine(BehaviorConfig config) : config_(std::move(config)) {
  config_.validate();
  state_.current = config_.selectable.front();
  state_.policy_routine = config_.selectable.front();
}

BehaviorStep BehaviorEngine::step(const AttentionState& attention, double face_area_ratio,
                                  long tick, Rng& rng, std::optional<Routine> policy_choice) {
  if (policy_choice) {
    if (std::find(config_.selectable.begin(), config_.selectable.end(), *policy_choice) ==
        config_.selectable.end()) {
      throw Error(Errc::UnknownStateOrAction, "policy chose a non-selectable routine");
    }
    state_.policy_routine = *policy_choice;
  }

  BehaviorStep out;
  Routine target = state_.policy_routine;
  Cause cause = Cause::Policy;
  if (const auto reflex = reflex_step(state_, attention, face_area_ratio, tick, config_, rng)) {
    target = *reflex;
    cause = Cause::Reflex;
  } else {
    out.game = simon_step(state_, attention, tick, rng, config_);
    switch (state_.game.phase) {
      case GameState::Phase::Idle: break;
      case GameState::Phase::Pondering:
        target = Routine::Ponder;
        cause = Cause::Game;
        break;
      case GameState::Phase::Prompted:
        target = Routine::PromptGesture;
        cause = Cause::Game;
        break;
      case GameState::Phase::Responding:
        target = state_.game.response;
        cause = Cause::Game;
        break;
    }
  }

  if (target != state_.current) {
    transitions_.push_back({tick, state_.current, target, cause});
    state_.current = target;
    state_.routine_entered_at = tick;
    out.cause = cause;
  }
  out.routine = state_.current;
  out.source = cause;
  out.directive.routine = state_.current;
  if (state_.current == Routine::Mimic) {
    if (attention.expression != face::kNeutral) out.directive.mirrored_expression = attention.expression;
    out.directive.mirror_wave = attention.gesture && *attention.gesture == "Wave";
  }
  return out;
}

}  // namespace imime
