#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "imime/attention.hpp"
#include "imime/behavior.hpp"
#include "imime/rng.hpp"

namespace imime::learning {

// (routine index within the selectable set, viewer attending).
struct StateId {
  std::size_t routine = 0;
  bool attending = false;

  friend bool operator==(const StateId&, const StateId&) = default;
};

// Selectable routines double as actions; each gives two states.
class StateSpace {
 public:
  explicit StateSpace(std::vector<Routine> routines);

  [[nodiscard]] std::size_t action_count() const noexcept { return routines_.size(); }
  [[nodiscard]] std::size_t state_count() const noexcept { return 2 * routines_.size(); }
  [[nodiscard]] std::size_t index(StateId s) const;
  [[nodiscard]] StateId state(std::size_t index) const;
  [[nodiscard]] Routine routine(std::size_t action) const { return routines_.at(action); }
  [[nodiscard]] std::optional<std::size_t> action_index(Routine r) const noexcept;
  [[nodiscard]] const std::vector<Routine>& routines() const noexcept { return routines_; }

 private:
  std::vector<Routine> routines_;
};

struct OutcomeCounts {
  std::uint64_t attended = 0;      // k
  std::uint64_t not_attended = 0;  // m
};

class OutcomeTable {
 public:
  OutcomeTable(std::size_t states, std::size_t actions);

  [[nodiscard]] std::size_t states() const noexcept { return states_; }
  [[nodiscard]] std::size_t actions() const noexcept { return actions_; }
  [[nodiscard]] const OutcomeCounts& at(std::size_t state, std::size_t action) const;
  OutcomeCounts& at(std::size_t state, std::size_t action);
  [[nodiscard]] std::uint64_t total() const noexcept;

 private:
  std::size_t states_;
  std::size_t actions_;
  std::vector<OutcomeCounts> cells_;
};

// p(s, a): probability the viewer attends after action a in state s.
struct TransitionModel {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<double> p;

  [[nodiscard]] double at(std::size_t s, std::size_t a) const { return p.at(s * actions + a); }
  double& at(std::size_t s, std::size_t a) { return p.at(s * actions + a); }
};

struct QTable {
  std::size_t states = 0;
  std::size_t actions = 0;
  double gamma = 0.9;
  std::vector<double> q;

  QTable() = default;
  QTable(std::size_t s, std::size_t a, double discount)
      : states(s), actions(a), gamma(discount), q(s * a, 0.0) {}

  [[nodiscard]] double at(std::size_t s, std::size_t a) const { return q.at(s * actions + a); }
  double& at(std::size_t s, std::size_t a) { return q.at(s * actions + a); }
  [[nodiscard]] double value(std::size_t s) const;  // max over actions
};

struct PolicyConfig {
  double epsilon = 0.125;
  double gamma = 0.9;
  double tolerance = 1e-6;
  int max_sweeps = 10'000;

  void validate() const;
};

int compute_reward(const AttentionState& attention) noexcept;

void record_outcome(OutcomeTable& table, const StateSpace& space, StateId s, std::size_t action,
                    bool attended_after);

// MAP estimate under a uniform Beta(1,1) prior; 0.5 without evidence.
double map_estimate(std::uint64_t attended, std::uint64_t not_attended) noexcept;
double estimate_transition(const OutcomeTable& table, const StateSpace& space, StateId s,
                           std::size_t action);
TransitionModel estimate_model(const OutcomeTable& table);

// Successor of (s, a) is routine a with the attending bit drawn from p(s, a);
// the reward is that bit.
struct ValueUpdate {
  QTable q;
  int sweeps = 0;
  double residual = 0;
  std::vector<double> residuals;  // sup-norm change per sweep
};

ValueUpdate update_values(const TransitionModel& model, const PolicyConfig& cfg,
                          const QTable* warm_start = nullptr);

// Lowest index among the maximal entries of the state's row.
std::size_t greedy_action(const QTable& q, std::size_t state);

struct ActionChoice {
  std::size_t action = 0;
  bool explored = false;
};

// 1 - epsilon: greedy; epsilon: uniform among the other actions.
ActionChoice select_action(const QTable& q, std::size_t state, double epsilon, Rng& rng);

enum class ValueMode { Synchronous, Asynchronous };

// Model estimator + value estimator + epsilon-greedy policy, driven once per
// decision tick.
class LearningAgent {
 public:
  LearningAgent(StateSpace space, PolicyConfig cfg, ValueMode mode = ValueMode::Synchronous);
  ~LearningAgent();
  LearningAgent(const LearningAgent&) = delete;
  LearningAgent& operator=(const LearningAgent&) = delete;

  // Attributes the observed attending bit to the previous decision, refreshes
  // the model and schedules a value update. Returns true if an outcome was recorded.
  bool learning_step(const AttentionState& observed);

  ActionChoice decide(StateId s, Rng& rng);
  void commit(StateId s, std::size_t action);

  [[nodiscard]] const StateSpace& space() const noexcept { return space_; }
  [[nodiscard]] const PolicyConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const OutcomeTable& outcomes() const noexcept { return table_; }
  [[nodiscard]] const TransitionModel& model() const noexcept { return model_; }
  // Waits for any in-flight value update.
  const QTable& values();
  [[nodiscard]] std::uint64_t outcomes_recorded() const noexcept { return recorded_; }
  [[nodiscard]] std::optional<std::pair<StateId, std::size_t>> previous() const noexcept {
    return previous_;
  }

  // Replaces counts and values, e.g. from a dump of an earlier episode.
  void warm_start(const OutcomeTable& table, const QTable& q);

 private:
  class Worker;

  void sync_values();

  StateSpace space_;
  PolicyConfig cfg_;
  ValueMode mode_;
  OutcomeTable table_;
  TransitionModel model_;
  QTable q_;
  std::optional<std::pair<StateId, std::size_t>> previous_;
  std::uint64_t recorded_ = 0;
  std::unique_ptr<Worker> worker_;
};

// CSV columns: state_routine,state_attending,action,k,m,p_hat,q
void write_learning_csv(const std::filesystem::path& path, const StateSpace& space,
                        const OutcomeTable& table, const TransitionModel& model, const QTable& q);

struct LearningDump {
  OutcomeTable table;
  QTable q;
};
LearningDump read_learning_csv(const std::filesystem::path& path, const StateSpace& space,
                               double gamma);

}  // namespace imime::learning
