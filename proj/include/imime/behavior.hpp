#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imime/attention.hpp"
#include "imime/rng.hpp"

namespace imime {

enum class Routine {
  IdleGazeWander,
  IdleDrum,
  Beckon,
  DistanceGuide,
  Mimic,
  Ponder,
  PromptGesture,
  Reward,
  Scold,
  Puzzled,
};

inline constexpr std::array kAllRoutines{
    Routine::IdleGazeWander, Routine::IdleDrum, Routine::Beckon,        Routine::DistanceGuide,
    Routine::Mimic,          Routine::Ponder,   Routine::PromptGesture, Routine::Reward,
    Routine::Scold,          Routine::Puzzled};

std::string_view to_string(Routine r) noexcept;
std::optional<Routine> parse_routine(std::string_view name) noexcept;

// Reward, Scold and DistanceGuide are contingent responses, never policy actions.
bool is_reflex_only(Routine r) noexcept;
std::vector<Routine> default_selectable_routines();

enum class Cause { None, Reflex, Game, Policy };
std::string_view to_string(Cause c) noexcept;

struct BehaviorConfig {
  double fps = 10.0;
  std::vector<Routine> selectable = default_selectable_routines();
  std::vector<std::string> prompt_gestures{"LeftArmRaised", "RightArmRaised", "BothArmsRaised",
                                           "Wave"};
  double idle_seconds = 10.0;
  double ponder_seconds = 2.0;
  double response_seconds = 5.0;
  double reward_seconds = 2.0;  // Reward and Scold
  double reflex_hold_seconds = 2.0;
  double area_low = 0.02;
  double area_high = 0.30;

  [[nodiscard]] long ticks(double seconds) const { return std::lround(seconds * fps); }
  // Upper bound on how long control can stay away from the policy once the
  // reflex conditions have cleared.
  [[nodiscard]] long max_release_ticks() const;
  void validate() const;
};

struct GameState {
  enum class Phase { Idle, Pondering, Prompted, Responding };
  Phase phase = Phase::Idle;
  std::string gesture;      // prompted gesture
  long prompt_tick = 0;
  long deadline_tick = 0;   // Prompted: response must arrive strictly before
  long until_tick = 0;      // Pondering / Responding end
  Routine response = Routine::Reward;
};

struct BehaviorState {
  Routine current = Routine::Mimic;
  long routine_entered_at = 0;
  Routine policy_routine = Routine::Mimic;
  GameState game;
  long last_interaction_at = 0;

  bool face_seen = false;
  std::optional<Routine> reflex;
  long reflex_until = 0;
  std::optional<Routine> idle_choice;
};

using Policy = std::function<Routine(const BehaviorState&, Rng&)>;

// Called on decision boundaries. Flips the shared coin; on heads returns the
// policy's choice (which may be the current routine), otherwise nullopt.
std::optional<Routine> scheduler_tick(const BehaviorState& state, Rng& rng, long tick,
                                      const Policy& policy, double change_probability = 0.5);

// Priority: erratic > no face > face appeared > distance out of range.
std::optional<Routine> reflex_step(BehaviorState& state, const AttentionState& attention,
                                   double face_area_ratio, long tick, const BehaviorConfig& cfg,
                                   Rng& rng);

enum class GameEvent { None, Ponder, Prompt, Reward, Scold };
std::string_view to_string(GameEvent e) noexcept;

struct GameOutput {
  GameEvent event = GameEvent::None;
  std::string gesture;  // set for Prompt
};

GameOutput simon_step(BehaviorState& state, const AttentionState& attention, long tick, Rng& rng,
                      const BehaviorConfig& cfg);

// Animation directive accompanying the displayed routine.
struct Directive {
  Routine routine = Routine::Mimic;
  std::optional<std::string> mirrored_expression;
  bool mirror_wave = false;
};

struct Transition {
  long tick = 0;
  Routine from = Routine::Mimic;
  Routine to = Routine::Mimic;
  Cause cause = Cause::None;
};

struct BehaviorStep {
  Routine routine = Routine::Mimic;
  Cause cause = Cause::None;   // None when the displayed routine did not change
  Cause source = Cause::None;  // arbitration level in control this tick
  GameOutput game;
  Directive directive;
};

// Arbitrates reflex > game > policy and records routine changes.
class BehaviorEngine {
 public:
  explicit BehaviorEngine(BehaviorConfig config);

  BehaviorStep step(const AttentionState& attention, double face_area_ratio, long tick, Rng& rng,
                    std::optional<Routine> policy_choice);

  [[nodiscard]] const BehaviorState& state() const noexcept { return state_; }
  [[nodiscard]] const BehaviorConfig& config() const noexcept { return config_; }
  [[nodiscard]] const std::vector<Transition>& transitions() const noexcept { return transitions_; }

 private:
  BehaviorConfig config_;
  BehaviorState state_;
  std::vector<Transition> transitions_;
};

}  // namespace imime
