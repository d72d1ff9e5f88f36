#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "imime/config.hpp"
#include "imime/error.hpp"
#include "imime/harness.hpp"

namespace fs = std::filesystem;
using namespace imime;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int cmd_run(const fs::path& config, std::optional<std::uint64_t> seed, std::optional<long> steps,
            const std::string& mode, bool dump_frames, const std::string& out, bool async_values) {
  auto cfg = harness::load_config(config);
  if (seed) cfg.seed = *seed;
  if (steps) cfg.steps = *steps;
  if (mode == "labels") cfg.mode = harness::Mode::Labels;
  if (mode == "pixels") cfg.mode = harness::Mode::Pixels;
  if (dump_frames) cfg.dump_frames = true;
  if (!out.empty()) cfg.out_dir = out;
  if (cfg.out_dir.empty()) cfg.out_dir = "imime-out";
  if (async_values) cfg.value_mode = learning::ValueMode::Asynchronous;
  cfg.validate();

  const auto result = harness::run_episode(cfg);
  harness::write_outputs(cfg, result);
  const auto oracle = harness::oracle_policy(cfg.profile, cfg.learning.gamma);
  const auto m = harness::metrics(result, oracle, cfg.learning.gamma);
  fmt::print("frames {} decisions {} outcomes {}\n", result.log.rows.size(), m.decisions,
             result.outcomes_recorded);
  fmt::print("final attention {:.3f} exploration {:.3f} greedy agreement {:.3f} regret {:.3f}\n",
             harness::attention_fraction(result.log, 500), m.exploration_rate, m.agreement, m.regret);
  fmt::print("wrote {}\n", cfg.out_dir.string());
  return 0;
}

int cmd_oracle(const fs::path& config) {
  const auto cfg = harness::load_config(config);
  const auto oracle = harness::oracle_policy(cfg.profile, cfg.learning.gamma);
  const learning::StateSpace space(cfg.profile.routines);
  std::cout << "state_routine,state_attending,policy,value,margin\n";
  for (std::size_t s = 0; s < space.state_count(); ++s) {
    const auto st = space.state(s);
    fmt::print("{},{},{},{:.10f},{:.10f}\n", to_string(space.routine(st.routine)), st.attending ? 1 : 0,
               to_string(space.routine(oracle.policy[s])), oracle.values[s], oracle.margins[s]);
  }
  return 0;
}

int cmd_analyze(const fs::path& frames, const fs::path& config) {
  const auto cfg = harness::load_config(config);
  harness::write_analysis_csv(std::cout, harness::analyze_frames(frames, cfg));
  return 0;
}

int cmd_plot(const fs::path& log, const fs::path& out, std::size_t window) {
  harness::plot_learning_curve(harness::learning_curve(log, window), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iMime desk-scale simulator"};
  app.require_subcommand(1);

  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  std::string mode;
  bool dump_frames = false;
  std::string out;
  bool async_values = false;
  auto* run = app.add_subcommand("run", "Run one seeded episode");
  run->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--steps", steps, "Frames to simulate");
  run->add_option("--mode", mode, "labels or pixels")->check(CLI::IsMember({"labels", "pixels"}));
  run->add_flag("--dump-frames", dump_frames, "Write PGM frames (pixel mode)");
  run->add_option("--out", out, "Output directory");
  run->add_flag("--async-values", async_values, "Run value updates on a worker thread");

  auto* oracle = app.add_subcommand("oracle", "Optimal policy on the true viewer profile");
  oracle->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

  fs::path frames;
  auto* analyze = app.add_subcommand("analyze", "Vision pipeline over stored PGM frames");
  analyze->add_option("--frames", frames, "Frame directory")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

  fs::path log;
  fs::path plot_out;
  std::size_t window = 100;
  auto* plot = app.add_subcommand("plot", "Learning curve from an episode log");
  plot->add_option("--log", log, "episode.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output .png or .csv")->required();
  plot->add_option("--window", window, "Decisions per point")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, seed, steps, mode, dump_frames, out, async_values);
    if (*oracle) return cmd_oracle(config);
    if (*analyze) return cmd_analyze(frames, config);
    if (*plot) return cmd_plot(log, plot_out, window);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::ConfigError ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
