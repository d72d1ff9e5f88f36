#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imime/behavior.hpp"
#include "imime/config.hpp"
#include "imime/learning.hpp"
#include "imime/vision_face.hpp"
#include "imime/viewer_sim.hpp"

namespace imime::harness {

struct FrameRow {
  long tick = 0;
  Routine routine = Routine::Mimic;
  Cause cause = Cause::None;  // arbitration level in control
  bool attending = false;
  int reward = 0;
  bool explored = false;
  std::optional<double> jerk;
  std::optional<face::Orientation> orientation;
  bool decision = false;
  GameEvent event = GameEvent::None;
};

struct DecisionRecord {
  long tick = 0;
  learning::StateId state;
  std::size_t action = 0;
  bool changed = false;  // scheduler coin came up
  bool explored = false;
};

// Every Reward / Scold emission with the inputs that produced it.
struct GameRecord {
  long tick = 0;
  GameEvent event = GameEvent::None;
  std::string prompted;
  std::optional<std::string> observed;
  long deadline_tick = 0;
};

struct EpisodeLog {
  std::vector<FrameRow> rows;
  std::vector<DecisionRecord> decisions;
  std::vector<GameRecord> game;
  std::vector<Transition> transitions;
};

struct EpisodeResult {
  EpisodeLog log;
  learning::StateSpace space{{Routine::Mimic}};
  learning::OutcomeTable outcomes{2, 1};
  learning::TransitionModel model;
  learning::QTable q;
  std::uint64_t outcomes_recorded = 0;
  std::vector<std::size_t> greedy;  // per state index
};

// RNG order within a frame: viewer response (attend bit, yaw), erratic-burst
// draw, frame noise (pixel mode), scheduler coin, epsilon draw, behavior
// (idle choice, prompt gesture), prompt compliance.
EpisodeResult run_episode(const EpisodeConfig& cfg);

// tick,routine,cause,attending,reward,explored,jerk,orientation,decision,event
std::string episode_csv(const EpisodeLog& log);
void write_episode_csv(const std::filesystem::path& path, const EpisodeLog& log);

// tick,from,to,cause for every displayed-routine change.
std::string transitions_csv(const EpisodeLog& log);

struct OracleResult {
  std::vector<std::size_t> policy;               // lowest-index optimum
  std::vector<std::vector<std::size_t>> optimal;  // all actions within tie tolerance
  std::vector<double> values;
  learning::QTable q;
  std::vector<double> margins;  // best minus second best per state
  int sweeps = 0;

  [[nodiscard]] double margin() const;
  [[nodiscard]] bool unique() const;
};

// Value iteration on state values over the true attend probabilities.
OracleResult oracle_policy(const sim::ViewerProfile& profile, double gamma, double tolerance = 1e-10,
                           int max_sweeps = 1'000'000);

struct Metrics {
  std::size_t decisions = 0;
  std::vector<double> window_attention;  // per window of decisions
  double cumulative_reward = 0;
  double realized_return = 0;  // discounted, from the first decision
  double oracle_value = 0;
  double regret = 0;
  double exploration_rate = 0;
  double agreement = 0;  // fraction of states where greedy is oracle-optimal
};

double greedy_agreement(const std::vector<std::size_t>& policy, const OracleResult& oracle);
// Attending fraction over the last `count` decisions (all when fewer).
double attention_fraction(const EpisodeLog& log, std::size_t count);
Metrics metrics(const EpisodeResult& result, const OracleResult& oracle, double gamma,
                std::size_t window = 100);

void write_metrics_csv(const std::filesystem::path& path, const Metrics& m);

// episode.csv, learning.csv, metrics.csv and transitions.csv in cfg.out_dir.
void write_outputs(const EpisodeConfig& cfg, const EpisodeResult& result);

struct AnalysisRow {
  std::string frame;
  bool face_present = false;
  std::optional<face::OrientationEstimate> orientation;
  face::MotionClass motion = face::MotionClass::Still;
  std::string expression;
  std::optional<double> jerk;
  std::string pose;
  bool attending = false;
  bool erratic = false;
};

// Vision pipeline over face_*.pgm (and matching body_*.pgm) in `dir`.
std::vector<AnalysisRow> analyze_frames(const std::filesystem::path& dir, const EpisodeConfig& cfg);
void write_analysis_csv(std::ostream& out, const std::vector<AnalysisRow>& rows);

// Attention fraction per window of decisions read from an episode CSV.
std::vector<double> learning_curve(const std::filesystem::path& episode_csv, std::size_t window = 100);
// PNG when `out` ends in .png, CSV otherwise.
void plot_learning_curve(const std::vector<double>& curve, const std::filesystem::path& out);

}  // namespace imime::harness
