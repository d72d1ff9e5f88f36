#include "imime/viewer_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "imime/error.hpp"

namespace imime::sim {

double ViewerProfile::at(std::size_t state, std::size_t action) const {
  return p_star.at(state * action_count() + action);
}

double& ViewerProfile::at(std::size_t state, std::size_t action) {
  return p_star.at(state * action_count() + action);
}

std::size_t ViewerProfile::action_index(Routine r) const {
  const auto it = std::find(routines.begin(), routines.end(), r);
  if (it == routines.end()) {
    throw Error(Errc::UnknownStateOrAction,
                fmt::format("routine {} is not in the viewer profile", to_string(r)));
  }
  return static_cast<std::size_t>(it - routines.begin());
}

learning::TransitionModel ViewerProfile::as_model() const {
  return {state_count(), action_count(), p_star};
}

void ViewerProfile::validate() const {
  if (routines.empty()) throw Error(Errc::ConfigError, "profile.routines is empty");
  for (std::size_t i = 0; i < routines.size(); ++i) {
    if (is_reflex_only(routines[i])) {
      throw Error(Errc::ConfigError,
                  fmt::format("profile.routines: {} is reflex-only", to_string(routines[i])));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (routines[i] == routines[j]) {
        throw Error(Errc::ConfigError,
                    fmt::format("profile.routines: {} listed twice", to_string(routines[i])));
      }
    }
  }
  if (p_star.size() != state_count() * action_count()) {
    throw Error(Errc::ConfigError, "profile: attend probability table has the wrong size");
  }
  for (double p : p_star) {
    if (!(p >= 0 && p <= 1)) throw Error(Errc::ConfigError, "profile: probability outside [0,1]");
  }
  auto unit = [](double v, const char* key) {
    if (!(v >= 0 && v <= 1)) throw Error(Errc::ConfigError, fmt::format("profile.{} outside [0,1]", key));
  };
  unit(erratic_rate, "erratic_rate");
  unit(compliance, "compliance");
  unit(wrong_gesture_rate, "wrong_gesture_rate");
  if (compliance + wrong_gesture_rate > 1) {
    throw Error(Errc::ConfigError, "profile: compliance + wrong_gesture_rate exceeds 1");
  }
  if (erratic_frames < 1) throw Error(Errc::ConfigError, "profile.erratic_frames must be >= 1");
  if (gesture_delay_seconds < 0 || !(gesture_seconds > 0)) {
    throw Error(Errc::ConfigError, "profile: bad gesture timing");
  }
}

ViewerProfile constant_profile(std::vector<Routine> routines, double p) {
  ViewerProfile out;
  out.routines = std::move(routines);
  out.p_star.assign(out.state_count() * out.action_count(), p);
  return out;
}

ViewerProfile default_profile() {
  ViewerProfile out;
  out.routines = {Routine::Mimic, Routine::Ponder, Routine::Beckon, Routine::IdleDrum};
  // rows: (from-routine, attending); columns: action
  out.p_star = {
      0.20, 0.85, 0.30, 0.25, 0.25, 0.90, 0.35, 0.30,
      0.30, 0.20, 0.80, 0.25, 0.35, 0.25, 0.85, 0.30,
      0.25, 0.30, 0.20, 0.85, 0.30, 0.35, 0.25, 0.90,
      0.80, 0.25, 0.30, 0.20, 0.85, 0.30, 0.35, 0.25,
  };
  return out;
}

ViewerState step_viewer(const ViewerProfile& profile, const ViewerState& state,
                        learning::StateId s, Routine a, Rng& rng) {
  if (s.routine >= profile.action_count()) {
    throw Error(Errc::UnknownStateOrAction, "state routine outside the viewer profile");
  }
  const std::size_t action = profile.action_index(a);
  ViewerState next = state;
  next.attending = rng.bernoulli(profile.at(2 * s.routine + (s.attending ? 1 : 0), action));
  const double u = rng.uniform();
  if (next.attending) {
    next.yaw_degrees = -8.0 + 16.0 * u;
  } else if (u < 0.5) {
    next.yaw_degrees = -20.0 - 50.0 * u;
  } else {
    next.yaw_degrees = 20.0 + 25.0 * (2.0 * u - 1.0);
  }
  return next;
}

namespace {

Polygon box(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

Polygon disk(double cx, double cy, double r) {
  Polygon p;
  constexpr int kSides = 24;
  for (int i = 0; i < kSides; ++i) {
    const double t = 2 * std::numbers::pi * i / kSides;
    p.emplace_back(cx + r * std::cos(t), cy + r * std::sin(t));
  }
  return p;
}

bool inside(const Polygon& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto [xi, yi] = poly[i];
    const auto [xj, yj] = poly[j];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double noise(double sigma, Rng& rng) { return sigma > 0 ? sigma * rng.normal() : 0.0; }

const Silhouette& find_silhouette(const SceneConfig& scene, const std::string& label) {
  for (const auto& s : scene.silhouettes) {
    if (s.label == label) return s;
  }
  throw Error(Errc::UnknownPoseLabel, "no silhouette for pose '" + label + "'");
}

Frame render_body(const SceneConfig& scene, const Silhouette* silhouette, Rng& rng) {
  Frame f(scene.body_width, scene.body_height);
  for (int y = 0; y < scene.body_height; ++y) {
    for (int x = 0; x < scene.body_width; ++x) {
      bool on = false;
      if (silhouette) {
        for (const auto& part : silhouette->parts) {
          if (inside(part, x + 0.5, y + 0.5)) {
            on = true;
            break;
          }
        }
      }
      const double base = on ? scene.silhouette_intensity : scene.body_background;
      f(x, y) = to_pixel(base + noise(scene.noise_sigma, rng));
    }
  }
  return f;
}

}  // namespace

std::vector<Silhouette> standard_silhouettes() {
  const std::vector<Polygon> core{box(34, 36, 62, 72), box(44, 28, 52, 38), disk(48, 22, 8)};
  const Polygon left_down{{28, 38}, {34, 38}, {32, 66}, {25, 66}};
  const Polygon right_down{{62, 38}, {68, 38}, {71, 66}, {64, 66}};
  const Polygon left_up{{34, 37}, {34, 44}, {12, 8}, {18, 4}};
  const Polygon right_up{{62, 37}, {62, 44}, {84, 8}, {78, 4}};
  auto with = [&](std::string label, std::vector<Polygon> arms) {
    Silhouette s{std::move(label), core};
    s.parts.insert(s.parts.end(), arms.begin(), arms.end());
    return s;
  };
  return {
      with("ArmsDown", {left_down, right_down}),
      with("LeftArmRaised", {left_up, right_down}),
      with("RightArmRaised", {left_down, right_up}),
      with("BothArmsRaised", {left_up, right_up}),
      with("Wave", {left_down, box(62, 37, 92, 43), box(86, 20, 92, 43)}),
  };
}

PixelRect SceneConfig::face_rect(int cx, int cy) const {
  const int a = static_cast<int>(std::lround(face_a));
  const int b = static_cast<int>(std::lround(face_b));
  return {cx - a, cy - b, 2 * a, 2 * b};
}

void SceneConfig::validate() const {
  if (face_width < kMinFrameSide || face_height < kMinFrameSide || body_width < kMinFrameSide ||
      body_height < kMinFrameSide) {
    throw Error(Errc::ConfigError, "scene: frame too small");
  }
  if (!(noise_sigma >= 0)) throw Error(Errc::ConfigError, "scene.noise_sigma must be >= 0");
  if (!(face_a > 0 && face_b > 0)) throw Error(Errc::ConfigError, "scene: face axes must be positive");
  const int margin = sway_amplitude + burst_amplitude;
  const PixelRect r = face_rect(face_width / 2, face_height / 2);
  if (r.x - margin < 0 || r.right() + margin > face_width || r.y < 0 || r.bottom() > face_height) {
    throw Error(Errc::ConfigError, "scene: face does not fit in the frame");
  }
  if (silhouettes.empty()) throw Error(Errc::ConfigError, "scene: no silhouettes");
}

FaceFrame synthesize_face_frame(const ViewerState& state, const SceneConfig& scene, Rng& rng) {
  const double cx = state.x;
  const double cy = state.y;
  const double yaw = std::clamp(state.yaw_degrees, -45.0, 45.0);
  const double shift = yaw / 45.0 * 0.5 * scene.face_a;
  const double shade = scene.shading_per_degree * yaw;
  const double mx0 = cx + shift - scene.mouth_width / 2;
  const double my0 = cy + scene.mouth_dy - scene.mouth_height / 2;

  Frame f(scene.face_width, scene.face_height);
  for (int py = 0; py < scene.face_height; ++py) {
    for (int px = 0; px < scene.face_width; ++px) {
      const double X = px + 0.5;
      const double Y = py + 0.5;
      const double u = (X - cx) / scene.face_a;
      const double v = (Y - cy) / scene.face_b;
      double value = scene.background;
      if (u * u + v * v <= 1.0) {
        value = scene.face_intensity + shade * u;
        for (double side : {-1.0, 1.0}) {
          const double ex = X - (cx + side * scene.eye_dx + shift);
          const double ey = Y - (cy + scene.eye_dy);
          if (ex * ex + ey * ey <= scene.eye_radius * scene.eye_radius) value = scene.eye_intensity;
        }
        if (X >= mx0 && X < mx0 + scene.mouth_width && Y >= my0 && Y < my0 + scene.mouth_height) {
          value = scene.mouth_intensity;
        }
      }
      f(px, py) = to_pixel(value + noise(scene.noise_sigma, rng));
    }
  }
  return {std::move(f), scene.face_rect(state.x, state.y), state.yaw_degrees, state.attending};
}

BodyFrame synthesize_body_frame(const ViewerState& state, const SceneConfig& scene, Rng& rng) {
  const Silhouette* s = state.pose == kNoPerson ? nullptr : &find_silhouette(scene, state.pose);
  return {render_body(scene, s, rng), state.pose};
}

std::vector<Frame> background_frames(const SceneConfig& scene, std::size_t count, Rng& rng) {
  std::vector<Frame> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(render_body(scene, nullptr, rng));
  return out;
}

std::vector<body::PoseReference> pose_references(const SceneConfig& scene,
                                                 const body::DrapeParams& params) {
  SceneConfig clean = scene;
  clean.noise_sigma = 0;
  Rng unused(0);
  const std::vector<Frame> bg{render_body(clean, nullptr, unused), render_body(clean, nullptr, unused)};
  const auto model = body::train_background(bg);
  std::vector<body::PoseReference> out;
  for (const auto& s : clean.silhouettes) {
    const auto mask = body::segment_foreground(model, render_body(clean, &s, unused));
    out.push_back({s.label, body::drape(mask, params)});
  }
  return out;
}

Viewer::Viewer(ViewerProfile profile, const SceneConfig& scene)
    : profile_(std::move(profile)),
      base_x_(scene.face_width / 2),
      base_y_(scene.face_height / 2),
      sway_amplitude_(scene.sway_amplitude),
      sway_period_(std::max(1, scene.sway_period_frames)),
      burst_amplitude_(scene.burst_amplitude) {
  profile_.validate();
  state_.x = base_x_;
  state_.y = base_y_;
}

void Viewer::begin_frame(long tick, Rng& rng) {
  if (burst_left_ == 0 && rng.bernoulli(profile_.erratic_rate)) {
    burst_left_ = profile_.erratic_frames;
    burst_sign_ = 1;
  }
  int offset = 0;
  if (burst_left_ > 0) {
    offset = burst_sign_ * burst_amplitude_;
    burst_sign_ = -burst_sign_;
    --burst_left_;
  }
  const double phase = 2 * std::numbers::pi * static_cast<double>(tick % sway_period_) / sway_period_;
  const int sway = static_cast<int>(std::lround(sway_amplitude_ * std::sin(phase)));
  state_.x = base_x_ + sway + offset;
  state_.y = base_y_;

  if (planned_gesture_ && tick >= gesture_from_ && tick < gesture_until_) {
    state_.gesture = planned_gesture_;
    state_.pose = *planned_gesture_;
  } else {
    if (planned_gesture_ && tick >= gesture_until_) planned_gesture_.reset();
    state_.gesture.reset();
    state_.pose = "ArmsDown";
  }
}

void Viewer::respond(learning::StateId s, Routine a, Rng& rng) {
  state_ = step_viewer(profile_, state_, s, a, rng);
}

void Viewer::on_prompt(const std::string& gesture, const std::vector<std::string>& gestures,
                       long tick, double fps, Rng& rng) {
  const double u = rng.uniform();
  planned_gesture_.reset();
  if (u < profile_.compliance) {
    planned_gesture_ = gesture;
  } else if (u < profile_.compliance + profile_.wrong_gesture_rate && gestures.size() > 1) {
    std::vector<std::string> others;
    for (const auto& g : gestures) {
      if (g != gesture) others.push_back(g);
    }
    planned_gesture_ = others[rng.index(others.size())];
  }
  gesture_from_ = tick + std::lround(profile_.gesture_delay_seconds * fps);
  gesture_until_ = gesture_from_ + std::lround(profile_.gesture_seconds * fps);
}

}  // namespace imime::sim
