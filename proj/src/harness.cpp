#include "imime/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <fmt/format.h>
#include <png.h>

#include "imime/attention.hpp"
#include "imime/error.hpp"
#include "imime/vision_body.hpp"

namespace imime::harness {

namespace {

face::OrientationEstimate truth_orientation(const sim::ViewerState& v) {
  face::OrientationEstimate est;
  est.confidence = 1.0;
  if (v.attending) {
    est.label = face::Orientation::Frontal;
  } else {
    est.label = v.yaw_degrees > 0 ? face::Orientation::Right : face::Orientation::Left;
  }
  return est;
}

std::string frame_name(const char* kind, long tick) { return fmt::format("{}_{:06d}.pgm", kind, tick); }

// Vision side of pixel mode: body camera background and pose references.
struct PixelPipeline {
  face::FaceAnalyzer analyzer;
  body::BackgroundModel background;
  std::vector<body::PoseReference> references;
};

}  // namespace

EpisodeResult run_episode(const EpisodeConfig& cfg_in) {
  EpisodeConfig cfg = cfg_in;
  cfg.validate();
  Rng rng(cfg.seed);
  const long period = cfg.decision_period();
  const auto& scene = cfg.scene;
  const double frame_area = static_cast<double>(scene.face_width) * scene.face_height;

  learning::StateSpace space(cfg.profile.routines);
  learning::LearningAgent agent(space, cfg.learning, cfg.value_mode);
  if (cfg.warm_start) {
    const auto dump = learning::read_learning_csv(*cfg.warm_start, space, cfg.learning.gamma);
    agent.warm_start(dump.table, dump.q);
  }
  sim::Viewer viewer(cfg.profile, scene);
  BehaviorEngine engine(cfg.behavior);
  AttentionFusion fusion(cfg.vision.fusion);
  face::HeadTrack truth_track;

  const std::filesystem::path frames_dir = cfg.out_dir / "frames";
  if (cfg.dump_frames) std::filesystem::create_directories(frames_dir);

  std::optional<PixelPipeline> pixels;
  if (cfg.mode == Mode::Pixels) {
    pixels.emplace();
    pixels->analyzer = face::FaceAnalyzer(cfg.vision.face);
    const auto frames = sim::background_frames(scene, static_cast<std::size_t>(cfg.vision.background_frames), rng);
    pixels->background = body::train_background(frames, cfg.vision.variance_floor);
    pixels->references = cfg.pose_references ? body::read_pose_references_csv(*cfg.pose_references)
                                             : sim::pose_references(scene, cfg.vision.drape);
    if (cfg.dump_frames) body::write_background_csv(frames_dir / "background.csv", pixels->background);
  }

  EpisodeResult result;
  auto& log = result.log;
  log.rows.reserve(static_cast<std::size_t>(cfg.steps));
  std::optional<std::pair<learning::StateId, Routine>> pending;

  for (long t = 0; t < cfg.steps; ++t) {
    if (pending) {
      viewer.respond(pending->first, pending->second, rng);
      pending.reset();
    }
    viewer.begin_frame(t, rng);
    const sim::ViewerState& vs = viewer.state();

    PerceptionTick tick;
    tick.time_seconds = static_cast<double>(t) / cfg.fps;
    double area = 0;
    if (!pixels) {
      const PixelRect rect = scene.face_rect(vs.x, vs.y);
      truth_track.push({rect.x + rect.w / 2.0, rect.y + rect.h / 2.0});
      if (truth_track.size() >= 5) tick.jerk = face::estimate_jerk(truth_track);
      tick.orientation = truth_orientation(vs);
      tick.pose = vs.pose;
      area = static_cast<double>(rect.area()) / frame_area;
    } else {
      const auto face_frame = sim::synthesize_face_frame(vs, scene, rng);
      const auto body_frame = sim::synthesize_body_frame(vs, scene, rng);
      const auto rect = face::detect_bright_blob(face_frame.frame, scene.blob_threshold, cfg.vision.min_face_area);
      const auto obs = pixels->analyzer.analyze(face_frame.frame, rect);
      tick.orientation = obs.orientation;
      tick.expression = obs.expression;
      tick.motion = obs.motion;
      tick.jerk = obs.jerk;
      const auto mask = body::segment_foreground(pixels->background, body_frame.frame, cfg.vision.segment_threshold);
      tick.pose = body::classify_pose(body::drape(mask, cfg.vision.drape), pixels->references,
                                      cfg.vision.pose_threshold);
      if (rect) area = static_cast<double>(rect->area()) / frame_area;
      if (cfg.dump_frames) {
        write_pgm(frames_dir / frame_name("face", t), face_frame.frame);
        write_pgm(frames_dir / frame_name("body", t), body_frame.frame);
      }
    }
    const AttentionState attention = fusion.evaluate(tick);

    FrameRow row;
    row.tick = t;
    std::optional<Routine> choice;
    if (t % period == 0) {
      row.decision = true;
      agent.learning_step(attention);
      const learning::StateId s{*space.action_index(engine.state().policy_routine), attention.attending};
      DecisionRecord rec{t, s, s.routine, false, false};
      if (rng.bernoulli(cfg.change_probability)) {
        rec.changed = true;
        switch (cfg.controller) {
          case Controller::Learning: {
            const auto c = agent.decide(s, rng);
            rec.action = c.action;
            rec.explored = c.explored;
            break;
          }
          case Controller::Random: rec.action = rng.index(space.action_count()); break;
          case Controller::Fixed: rec.action = *space.action_index(*cfg.fixed_routine); break;
        }
        choice = space.routine(rec.action);
      }
      agent.commit(s, rec.action);
      pending.emplace(s, space.routine(rec.action));
      row.explored = rec.explored;
      log.decisions.push_back(rec);
    }

    const BehaviorStep step = engine.step(attention, area, t, rng, choice);
    if (step.game.event == GameEvent::Prompt) {
      viewer.on_prompt(step.game.gesture, cfg.behavior.prompt_gestures, t, cfg.fps, rng);
    } else if (step.game.event == GameEvent::Reward || step.game.event == GameEvent::Scold) {
      log.game.push_back({t, step.game.event, engine.state().game.gesture, attention.gesture,
                          engine.state().game.deadline_tick});
    }

    row.routine = step.routine;
    row.cause = step.source;
    row.attending = attention.attending;
    row.reward = learning::compute_reward(attention);
    row.jerk = tick.jerk;
    if (attention.face_present && tick.orientation) row.orientation = tick.orientation->label;
    row.event = step.game.event;
    log.rows.push_back(row);
  }

  log.transitions = engine.transitions();
  result.space = space;
  result.outcomes = agent.outcomes();
  result.model = agent.model();
  result.q = agent.values();
  result.outcomes_recorded = agent.outcomes_recorded();
  for (std::size_t s = 0; s < space.state_count(); ++s) result.greedy.push_back(learning::greedy_action(result.q, s));
  return result;
}

std::string episode_csv(const EpisodeLog& log) {
  std::string out = "tick,routine,cause,attending,reward,explored,jerk,orientation,decision,event\n";
  for (const auto& r : log.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.tick, to_string(r.routine), to_string(r.cause),
                       r.attending ? 1 : 0, r.reward, r.explored ? 1 : 0,
                       r.jerk ? fmt::format("{:.6f}", *r.jerk) : std::string(),
                       r.orientation ? face::to_string(*r.orientation) : std::string_view("None"),
                       r.decision ? 1 : 0, to_string(r.event));
  }
  return out;
}

void write_episode_csv(const std::filesystem::path& path, const EpisodeLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << episode_csv(log);
}

double OracleResult::margin() const {
  return margins.empty() ? 0.0 : *std::min_element(margins.begin(), margins.end());
}

bool OracleResult::unique() const {
  return std::all_of(optimal.begin(), optimal.end(), [](const auto& o) { return o.size() == 1; });
}

OracleResult oracle_policy(const sim::ViewerProfile& profile, double gamma, double tolerance,
                           int max_sweeps) {
  profile.validate();
  if (!(gamma >= 0 && gamma < 1)) throw Error(Errc::InvalidArgument, "gamma must be in [0,1)");
  const std::size_t A = profile.action_count();
  const std::size_t S = profile.state_count();
  auto backup = [&](const std::vector<double>& v, std::size_t s, std::size_t a) {
    const double p = profile.at(s, a);
    return p * (1.0 + gamma * v[2 * a + 1]) + (1.0 - p) * gamma * v[2 * a];
  };

  OracleResult out;
  std::vector<double> v(S, 0.0);
  std::vector<double> next(S);
  for (out.sweeps = 1;; ++out.sweeps) {
    double delta = 0;
    for (std::size_t s = 0; s < S; ++s) {
      double best = -1;
      for (std::size_t a = 0; a < A; ++a) best = std::max(best, backup(v, s, a));
      next[s] = best;
      delta = std::max(delta, std::abs(best - v[s]));
    }
    v.swap(next);
    // sup-norm error bound of the current iterate
    if (delta * gamma / (1.0 - gamma) < tolerance || delta == 0) break;
    if (out.sweeps >= max_sweeps) throw Error(Errc::NonConvergence, "oracle value iteration did not converge");
  }

  out.values = v;
  out.q = learning::QTable(S, A, gamma);
  const double tie = std::max(1e-9, 10 * tolerance);
  for (std::size_t s = 0; s < S; ++s) {
    double best = -1;
    for (std::size_t a = 0; a < A; ++a) {
      out.q.at(s, a) = backup(v, s, a);
      best = std::max(best, out.q.at(s, a));
    }
    std::vector<std::size_t> opt;
    double second = -1;
    for (std::size_t a = 0; a < A; ++a) {
      if (best - out.q.at(s, a) <= tie) {
        opt.push_back(a);
      } else {
        second = std::max(second, out.q.at(s, a));
      }
    }
    out.policy.push_back(opt.front());
    out.margins.push_back(opt.size() > 1 ? 0.0 : (second < 0 ? best : best - second));
    out.optimal.push_back(std::move(opt));
  }
  return out;
}

double greedy_agreement(const std::vector<std::size_t>& policy, const OracleResult& oracle) {
  if (policy.size() != oracle.optimal.size()) throw Error(Errc::LengthMismatch, "policy size differs from oracle");
  if (policy.empty()) return 1.0;
  std::size_t agree = 0;
  for (std::size_t s = 0; s < policy.size(); ++s) {
    const auto& opt = oracle.optimal[s];
    if (std::find(opt.begin(), opt.end(), policy[s]) != opt.end()) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(policy.size());
}

double attention_fraction(const EpisodeLog& log, std::size_t count) {
  const auto& d = log.decisions;
  if (d.empty()) return 0.0;
  const std::size_t n = std::min(count, d.size());
  std::size_t att = 0;
  for (std::size_t i = d.size() - n; i < d.size(); ++i) att += d[i].state.attending ? 1 : 0;
  return static_cast<double>(att) / static_cast<double>(n);
}

Metrics metrics(const EpisodeResult& result, const OracleResult& oracle, double gamma, std::size_t window) {
  Metrics m;
  const auto& d = result.log.decisions;
  m.decisions = d.size();
  std::size_t explored = 0;
  double discount = 1.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i % window == 0) m.window_attention.push_back(0.0);
    m.window_attention.back() += d[i].state.attending ? 1.0 : 0.0;
    explored += d[i].explored ? 1 : 0;
    if (i > 0) {
      const double r = d[i].state.attending ? 1.0 : 0.0;
      m.cumulative_reward += r;
      m.realized_return += discount * r;
      discount *= gamma;
    }
  }
  for (std::size_t w = 0; w < m.window_attention.size(); ++w) {
    const std::size_t n = std::min(window, d.size() - w * window);
    m.window_attention[w] /= static_cast<double>(n);
  }
  if (!d.empty()) {
    const auto& s0 = d.front().state;
    m.oracle_value = oracle.values.at(2 * s0.routine + (s0.attending ? 1 : 0));
    m.exploration_rate = static_cast<double>(explored) / static_cast<double>(d.size());
  }
  m.regret = m.oracle_value - m.realized_return;
  m.agreement = greedy_agreement(result.greedy, oracle);
  return m;
}

std::string transitions_csv(const EpisodeLog& log) {
  std::string out = "tick,from,to,cause\n";
  for (const auto& t : log.transitions) {
    out += fmt::format("{},{},{},{}\n", t.tick, to_string(t.from), to_string(t.to), to_string(t.cause));
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const Metrics& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "metric,value\n";
  out << fmt::format("decisions,{}\n", m.decisions);
  out << fmt::format("cumulative_reward,{}\n", m.cumulative_reward);
  out << fmt::format("realized_return,{:.9f}\n", m.realized_return);
  out << fmt::format("oracle_value,{:.9f}\n", m.oracle_value);
  out << fmt::format("regret,{:.9f}\n", m.regret);
  out << fmt::format("exploration_rate,{:.9f}\n", m.exploration_rate);
  out << fmt::format("greedy_agreement,{:.9f}\n", m.agreement);
  for (std::size_t w = 0; w < m.window_attention.size(); ++w) {
    out << fmt::format("attention_window_{},{:.9f}\n", w, m.window_attention[w]);
  }
}

void write_outputs(const EpisodeConfig& cfg, const EpisodeResult& result) {
  std::filesystem::create_directories(cfg.out_dir);
  write_episode_csv(cfg.out_dir / "episode.csv", result.log);
  {
    std::ofstream out(cfg.out_dir / "transitions.csv", std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write transitions.csv");
    out << transitions_csv(result.log);
  }
  learning::write_learning_csv(cfg.out_dir / "learning.csv", result.space, result.outcomes, result.model,
                               result.q);
  const auto oracle = oracle_policy(cfg.profile, cfg.learning.gamma);
  write_metrics_csv(cfg.out_dir / "metrics.csv", metrics(result, oracle, cfg.learning.gamma));
}

std::vector<AnalysisRow> analyze_frames(const std::filesystem::path& dir, const EpisodeConfig& cfg) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::IoError, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> faces;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("face_") && name.ends_with(".pgm")) faces.push_back(entry.path());
  }
  std::sort(faces.begin(), faces.end());

  body::BackgroundModel background;
  if (std::filesystem::exists(dir / "background.csv")) {
    background = body::read_background_csv(dir / "background.csv");
  } else {
    Rng rng(cfg.seed);
    background = body::train_background(
        sim::background_frames(cfg.scene, static_cast<std::size_t>(cfg.vision.background_frames), rng),
        cfg.vision.variance_floor);
  }
  const auto refs = cfg.pose_references ? body::read_pose_references_csv(*cfg.pose_references)
                                        : sim::pose_references(cfg.scene, cfg.vision.drape);

  face::FaceAnalyzer analyzer(cfg.vision.face);
  AttentionFusion fusion(cfg.vision.fusion);
  std::vector<AnalysisRow> rows;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Frame frame = read_pgm(faces[i]);
    const auto rect = face::detect_bright_blob(frame, cfg.scene.blob_threshold, cfg.vision.min_face_area);
    const auto obs = analyzer.analyze(frame, rect);
    AnalysisRow row;
    row.frame = faces[i].filename().string();
    row.face_present = rect.has_value();
    row.orientation = obs.orientation;
    row.motion = obs.motion;
    row.expression = obs.expression;
    row.jerk = obs.jerk;
    row.pose = std::string(body::kUnknownPose);
    auto body_path = faces[i];
    body_path.replace_filename("body_" + row.frame.substr(5));
    if (std::filesystem::exists(body_path)) {
      const auto mask = body::segment_foreground(background, read_pgm(body_path), cfg.vision.segment_threshold);
      row.pose = body::classify_pose(body::drape(mask, cfg.vision.drape), refs, cfg.vision.pose_threshold);
    }
    PerceptionTick tick{static_cast<double>(i) / cfg.fps, obs.orientation, obs.expression, obs.motion, obs.jerk,
                        row.pose};
    const auto att = fusion.evaluate(tick);
    row.attending = att.attending;
    row.erratic = att.erratic;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_analysis_csv(std::ostream& out, const std::vector<AnalysisRow>& rows) {
  out << "frame,face_present,orientation,symmetry,edge_offset,motion,expression,jerk,pose,attending,erratic\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.frame, r.face_present ? 1 : 0,
                       r.orientation ? face::to_string(r.orientation->label) : std::string_view("None"),
                       r.orientation ? fmt::format("{:.6f}", r.orientation->symmetry) : std::string(),
                       r.orientation ? fmt::format("{:.6f}", r.orientation->edge_offset) : std::string(),
                       face::to_string(r.motion), r.expression,
                       r.jerk ? fmt::format("{:.6f}", *r.jerk) : std::string(), r.pose, r.attending ? 1 : 0,
                       r.erratic ? 1 : 0);
  }
}

std::vector<double> learning_curve(const std::filesystem::path& path, std::size_t window) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  boost::split(header, line, boost::is_any_of(","));
  const auto col = [&](const char* name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(Errc::BadHeader, fmt::format("episode log lacks column '{}'", name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t att = col("attending");
  const std::size_t dec = col("decision");
  std::vector<double> curve;
  std::size_t in_window = 0;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    boost::split(cells, line, boost::is_any_of(","));
    if (cells.size() != header.size()) throw Error(Errc::LengthMismatch, "episode log row length");
    if (cells[dec] != "1") continue;
    if (in_window == 0) curve.push_back(0.0);
    curve.back() += cells[att] == "1" ? 1.0 : 0.0;
    if (++in_window == window) {
      curve.back() /= static_cast<double>(window);
      in_window = 0;
    }
  }
  if (in_window > 0) curve.back() /= static_cast<double>(in_window);
  return curve;
}

namespace {

void write_png(const std::filesystem::path& path, int w, int h, const std::vector<std::uint8_t>& rgb) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error(Errc::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(Errc::IoError, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * w * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

void plot_learning_curve(const std::vector<double>& curve, const std::filesystem::path& out) {
  if (out.extension() != ".png") {
    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw Error(Errc::IoError, "cannot write " + out.string());
    csv << "window,attention_fraction\n";
    for (std::size_t i = 0; i < curve.size(); ++i) csv << fmt::format("{},{:.6f}\n", i, curve[i]);
    return;
  }
  constexpr int W = 640;
  constexpr int H = 360;
  constexpr int M = 30;  // margin
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(W) * H * 3, 255);
  auto put = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= W || y >= H) return;
    auto* p = &rgb[(static_cast<std::size_t>(y) * W + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  };
  auto line = [&](double x0, double y0, double x1, double y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int n = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      put(static_cast<int>(std::lround(x0 + t * (x1 - x0))), static_cast<int>(std::lround(y0 + t * (y1 - y0))), r, g, b);
    }
  };
  const double x_max = W - M;
  const double y_top = M;
  const double y_bottom = H - M;
  line(M, y_bottom, x_max, y_bottom, 0, 0, 0);
  line(M, y_top, M, y_bottom, 0, 0, 0);
  for (double frac : {0.25, 0.5, 0.75, 1.0}) {
    const double y = y_bottom - frac * (y_bottom - y_top);
    for (int x = M; x < x_max; x += 4) put(x, static_cast<int>(y), 200, 200, 200);
  }
  auto px = [&](std::size_t i) {
    return curve.size() < 2 ? static_cast<double>(M)
                            : M + (x_max - M) * static_cast<double>(i) / static_cast<double>(curve.size() - 1);
  };
  auto py = [&](double v) { return y_bottom - std::clamp(v, 0.0, 1.0) * (y_bottom - y_top); };
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) line(px(i), py(curve[i]), px(i + 1), py(curve[i + 1]), 200, 30, 30);
  if (curve.size() == 1) put(M, static_cast<int>(py(curve[0])), 200, 30, 30);
  write_png(out, W, H, rgb);
}

}  // namespace imime::harness
