#include "imime/learning.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "imime/error.hpp"

namespace imime::learning {

StateSpace::StateSpace(std::vector<Routine> routines) : routines_(std::move(routines)) {
  if (routines_.empty()) throw Error(Errc::EmptyActionSet, "state space needs at least one routine");
  for (std::size_t i = 0; i < routines_.size(); ++i) {
    for (std::size_t j = i + 1; j < routines_.size(); ++j) {
      if (routines_[i] == routines_[j]) throw Error(Errc::InvalidArgument, "duplicate routine");
    }
  }
}

std::size_t StateSpace::index(StateId s) const {
  if (s.routine >= routines_.size()) {
    throw Error(Errc::UnknownStateOrAction, "state routine index out of range");
  }
  return 2 * s.routine + (s.attending ? 1 : 0);
}

StateId StateSpace::state(std::size_t index) const {
  if (index >= state_count()) throw Error(Errc::UnknownStateOrAction, "state index out of range");
  return {index / 2, index % 2 == 1};
}

std::optional<std::size_t> StateSpace::action_index(Routine r) const noexcept {
  const auto it = std::find(routines_.begin(), routines_.end(), r);
  if (it == routines_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - routines_.begin());
}

OutcomeTable::OutcomeTable(std::size_t states, std::size_t actions)
    : states_(states), actions_(actions), cells_(states * actions) {}

const OutcomeCounts& OutcomeTable::at(std::size_t state, std::size_t action) const {
  if (state >= states_ || action >= actions_) {
    throw Error(Errc::UnknownStateOrAction, "outcome cell out of range");
  }
  return cells_[state * actions_ + action];
}

OutcomeCounts& OutcomeTable::at(std::size_t state, std::size_t action) {
  if (state >= states_ || action >= actions_) {
    throw Error(Errc::UnknownStateOrAction, "outcome cell out of range");
  }
  return cells_[state * actions_ + action];
}

std::uint64_t OutcomeTable::total() const noexcept {
  std::uint64_t n = 0;
  for (const auto& c : cells_) n += c.attended + c.not_attended;
  return n;
}

double QTable::value(std::size_t s) const {
  double best = at(s, 0);
  for (std::size_t a = 1; a < actions; ++a) best = std::max(best, at(s, a));
  return best;
}

void PolicyConfig::validate() const {
  if (!(epsilon >= 0 && epsilon < 1)) throw Error(Errc::ConfigError, "learning.epsilon must be in [0,1)");
  if (!(gamma > 0 && gamma < 1)) throw Error(Errc::ConfigError, "learning.gamma must be in (0,1)");
  if (!(tolerance > 0)) throw Error(Errc::ConfigError, "learning.tolerance must be positive");
  if (max_sweeps < 1) throw Error(Errc::ConfigError, "learning.max_sweeps must be >= 1");
}

int compute_reward(const AttentionState& attention) noexcept { return attention.attending ? 1 : 0; }

void record_outcome(OutcomeTable& table, const StateSpace& space, StateId s, std::size_t action,
                    bool attended_after) {
  if (action >= space.action_count()) throw Error(Errc::UnknownStateOrAction, "action out of range");
  auto& cell = table.at(space.index(s), action);
  if (attended_after) {
    ++cell.attended;
  } else {
    ++cell.not_attended;
  }
}

double map_estimate(std::uint64_t k, std::uint64_t m) noexcept {
  if (k + m == 0) return 0.5;
  // mode of Beta(1 + k, 1 + m)
  return static_cast<double>(k) / static_cast<double>(k + m);
}

double estimate_transition(const OutcomeTable& table, const StateSpace& space, StateId s,
                           std::size_t action) {
  const auto& c = table.at(space.index(s), action);
  return map_estimate(c.attended, c.not_attended);
}

TransitionModel estimate_model(const OutcomeTable& table) {
  TransitionModel m{table.states(), table.actions(), {}};
  m.p.resize(m.states * m.actions);
  for (std::size_t s = 0; s < m.states; ++s) {
    for (std::size_t a = 0; a < m.actions; ++a) {
      const auto& c = table.at(s, a);
      m.at(s, a) = map_estimate(c.attended, c.not_attended);
    }
  }
  return m;
}

ValueUpdate update_values(const TransitionModel& model, const PolicyConfig& cfg,
                          const QTable* warm_start) {
  cfg.validate();
  if (model.states != 2 * model.actions || model.p.size() != model.states * model.actions) {
    throw Error(Errc::InvalidArgument, "transition model must cover 2R states x R actions");
  }
  ValueUpdate out;
  out.q = warm_start && warm_start->states == model.states && warm_start->actions == model.actions
              ? *warm_start
              : QTable(model.states, model.actions, cfg.gamma);
  out.q.gamma = cfg.gamma;

  const std::size_t S = model.states;
  const std::size_t A = model.actions;
  std::vector<double> v(S);
  std::vector<double> next(S * A);
  double residual = 0;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    for (std::size_t s = 0; s < S; ++s) v[s] = out.q.value(s);
    residual = 0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        const double p = model.at(s, a);
        const double attend_value = v[2 * a + 1];
        const double lost_value = v[2 * a];
        const double q = p * (1.0 + cfg.gamma * attend_value) + (1.0 - p) * cfg.gamma * lost_value;
        residual = std::max(residual, std::abs(q - out.q.at(s, a)));
        next[s * A + a] = q;
      }
    }
    out.q.q = next;
    out.sweeps = sweep + 1;
    out.residuals.push_back(residual);
    if (residual < cfg.tolerance) {
      out.residual = residual;
      return out;
    }
  }
  out.residual = residual;
  throw Error(Errc::NonConvergence,
              fmt::format("value iteration did not converge in {} sweeps (residual {})",
                          cfg.max_sweeps, residual));
}

std::size_t greedy_action(const QTable& q, std::size_t state) {
  if (q.actions == 0) throw Error(Errc::EmptyActionSet, "no actions");
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.actions; ++a) {
    if (q.at(state, a) > q.at(state, best)) best = a;
  }
  return best;
}

ActionChoice select_action(const QTable& q, std::size_t state, double epsilon, Rng& rng) {
  if (q.actions == 0) throw Error(Errc::EmptyActionSet, "no actions");
  if (state >= q.states) throw Error(Errc::UnknownStateOrAction, "state out of range");
  const std::size_t best = greedy_action(q, state);
  if (q.actions == 1) return {best, false};
  if (!rng.bernoulli(epsilon)) return {best, false};
  std::size_t pick = rng.index(q.actions - 1);
  if (pick >= best) ++pick;  // skip the greedy action
  return {pick, true};
}

// Runs value updates on a separate thread; results are collected at a barrier.
class LearningAgent::Worker {
 public:
  explicit Worker(PolicyConfig cfg) : cfg_(cfg), thread_([this] { run(); }) {}

  ~Worker() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

  void submit(TransitionModel model, QTable warm) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return !job_; });
    job_ = Job{std::move(model), std::move(warm)};
    result_.reset();
    error_ = nullptr;
    cv_.notify_all();
  }

  // Blocks until the submitted job (if any) is finished.
  std::optional<QTable> collect() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return !job_; });
    if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
    return std::exchange(result_, std::nullopt);
  }

 private:
  struct Job {
    TransitionModel model;
    QTable warm;
  };

  void run() {
    std::unique_lock lock(mutex_);
    for (;;) {
      cv_.wait(lock, [this] { return stop_ || (job_ && !result_ && !error_); });
      if (stop_) return;
      Job job = *job_;
      lock.unlock();
      std::optional<QTable> q;
      std::exception_ptr err;
      try {
        q = update_values(job.model, cfg_, &job.warm).q;
      } catch (...) {
        err = std::current_exception();
      }
      lock.lock();
      result_ = std::move(q);
      error_ = err;
      job_.reset();
      cv_.notify_all();
    }
  }

  PolicyConfig cfg_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::optional<Job> job_;
  std::optional<QTable> result_;
  std::exception_ptr error_;
  bool stop_ = false;
  std::thread thread_;
};

LearningAgent::LearningAgent(StateSpace space, PolicyConfig cfg, ValueMode mode)
    : space_(std::move(space)),
      cfg_(cfg),
      mode_(mode),
      table_(space_.state_count(), space_.action_count()),
      model_(estimate_model(table_)),
      q_(space_.state_count(), space_.action_count(), cfg.gamma) {
  cfg_.validate();
  if (mode_ == ValueMode::Asynchronous) worker_ = std::make_unique<Worker>(cfg_);
}

LearningAgent::~LearningAgent() = default;

void LearningAgent::sync_values() {
  if (!worker_) return;
  if (auto q = worker_->collect()) q_ = std::move(*q);
}

bool LearningAgent::learning_step(const AttentionState& observed) {
  if (!previous_) return false;
  const auto [s, a] = *previous_;
  record_outcome(table_, space_, s, a, observed.attending);
  ++recorded_;
  const std::size_t si = space_.index(s);
  model_.at(si, a) = estimate_transition(table_, space_, s, a);
  if (worker_) {
    sync_values();
    worker_->submit(model_, q_);
  } else {
    q_ = update_values(model_, cfg_, &q_).q;
  }
  return true;
}

ActionChoice LearningAgent::decide(StateId s, Rng& rng) {
  sync_values();  // convergence barrier
  return select_action(q_, space_.index(s), cfg_.epsilon, rng);
}

void LearningAgent::commit(StateId s, std::size_t action) {
  if (action >= space_.action_count()) throw Error(Errc::UnknownStateOrAction, "action out of range");
  (void)space_.index(s);
  previous_ = std::make_pair(s, action);
}

const QTable& LearningAgent::values() {
  sync_values();
  return q_;
}

void LearningAgent::warm_start(const OutcomeTable& table, const QTable& q) {
  sync_values();
  if (table.states() != space_.state_count() || table.actions() != space_.action_count() ||
      q.states != space_.state_count() || q.actions != space_.action_count()) {
    throw Error(Errc::LengthMismatch, "warm-start tables do not match the state space");
  }
  table_ = table;
  model_ = estimate_model(table_);
  q_ = q;
  q_.gamma = cfg_.gamma;
}

void write_learning_csv(const std::filesystem::path& path, const StateSpace& space,
                        const OutcomeTable& table, const TransitionModel& model, const QTable& q) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "state_routine,state_attending,action,k,m,p_hat,q\n";
  for (std::size_t s = 0; s < space.state_count(); ++s) {
    const StateId id = space.state(s);
    for (std::size_t a = 0; a < space.action_count(); ++a) {
      const auto& c = table.at(s, a);
      out << fmt::format("{},{},{},{},{},{},{}\n", to_string(space.routine(id.routine)),
                         id.attending ? 1 : 0, to_string(space.routine(a)), c.attended,
                         c.not_attended, model.at(s, a), q.at(s, a));
    }
  }
}

LearningDump read_learning_csv(const std::filesystem::path& path, const StateSpace& space,
                               double gamma) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "state_routine,state_attending,action,k,m,p_hat,q") {
    throw Error(Errc::BadHeader, "bad learning CSV header in " + path.string());
  }
  LearningDump dump{OutcomeTable(space.state_count(), space.action_count()),
                    QTable(space.state_count(), space.action_count(), gamma)};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw Error(Errc::LengthMismatch, "learning CSV row needs 7 cells");
    const auto from = parse_routine(cells[0]);
    const auto act = parse_routine(cells[2]);
    if (!from || !act) throw Error(Errc::UnknownStateOrAction, "unknown routine in learning CSV");
    const auto ri = space.action_index(*from);
    const auto ai = space.action_index(*act);
    if (!ri || !ai) throw Error(Errc::UnknownStateOrAction, "routine not in the selectable set");
    const std::size_t s = space.index({*ri, cells[1] == "1"});
    try {
      dump.table.at(s, *ai) = {std::stoull(cells[3]), std::stoull(cells[4])};
      dump.q.at(s, *ai) = std::stod(cells[6]);
    } catch (const std::logic_error&) {
      throw Error(Errc::BadHeader, "non-numeric cell in learning CSV");
    }
  }
  return dump;
}

}  // namespace imime::learning
