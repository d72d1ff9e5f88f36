#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "imime/behavior.hpp"
#include "imime/frame.hpp"
#include "imime/learning.hpp"
#include "imime/rng.hpp"
#include "imime/vision_body.hpp"

namespace imime::sim {

// Ground-truth viewer: the attend probability after each (state, action) pair
// plus the per-frame nuisance behaviour.
struct ViewerProfile {
  std::vector<Routine> routines;
  std::vector<double> p_star;  // [state * actions + action], state = 2 * routine + attending

  double erratic_rate = 0.002;       // per frame, chance a burst starts
  int erratic_frames = 8;
  double compliance = 0.7;           // mimics the prompted gesture
  double wrong_gesture_rate = 0.1;   // shows some other gesture instead
  double gesture_delay_seconds = 1.0;
  double gesture_seconds = 1.5;

  [[nodiscard]] std::size_t action_count() const noexcept { return routines.size(); }
  [[nodiscard]] std::size_t state_count() const noexcept { return 2 * routines.size(); }
  [[nodiscard]] double at(std::size_t state, std::size_t action) const;
  double& at(std::size_t state, std::size_t action);
  [[nodiscard]] std::size_t action_index(Routine r) const;
  [[nodiscard]] learning::TransitionModel as_model() const;

  void validate() const;
};

ViewerProfile constant_profile(std::vector<Routine> routines, double p);

// Four routines; the optimum cycles Mimic, Ponder, Beckon, IdleDrum.
ViewerProfile default_profile();

struct ViewerState {
  bool attending = false;
  double yaw_degrees = 30.0;
  int x = 80;  // face centre in the face camera
  int y = 60;
  std::optional<std::string> gesture;
  std::string pose{"ArmsDown"};

  friend bool operator==(const ViewerState&, const ViewerState&) = default;
};

inline constexpr double kAttendYawLimit = 15.0;

// Draws the response to action `a` taken in state `s`: attend bit, then yaw.
ViewerState step_viewer(const ViewerProfile& profile, const ViewerState& state,
                        learning::StateId s, Routine a, Rng& rng);

using Polygon = std::vector<std::pair<double, double>>;

struct Silhouette {
  std::string label;
  std::vector<Polygon> parts;
};

std::vector<Silhouette> standard_silhouettes();

struct SceneConfig {
  int face_width = 160;
  int face_height = 120;
  int background = 60;
  double noise_sigma = 2.0;
  int face_intensity = 190;
  double face_a = 24;  // horizontal semi-axis
  double face_b = 30;
  int eye_intensity = 110;
  double eye_radius = 3;
  double eye_dx = 7;
  double eye_dy = -6;
  int mouth_intensity = 140;
  double mouth_width = 14;
  double mouth_height = 4;
  double mouth_dy = 14;
  double shading_per_degree = 1.15;  // grey levels across the half-face, brighter toward the turn
  int blob_threshold = 125;

  int sway_amplitude = 3;
  int sway_period_frames = 80;
  int burst_amplitude = 6;

  int body_width = 96;
  int body_height = 72;
  int body_background = 40;
  int silhouette_intensity = 100;
  std::vector<Silhouette> silhouettes = standard_silhouettes();

  [[nodiscard]] PixelRect face_rect(int cx, int cy) const;
  void validate() const;
};

struct FaceFrame {
  Frame frame;
  PixelRect rect;
  double yaw_degrees = 0;
  bool attending = false;
};

FaceFrame synthesize_face_frame(const ViewerState& state, const SceneConfig& scene, Rng& rng);

struct BodyFrame {
  Frame frame;
  std::string label;
};

inline constexpr std::string_view kNoPerson = "None";

// Pose "None" renders the background alone.
BodyFrame synthesize_body_frame(const ViewerState& state, const SceneConfig& scene, Rng& rng);

// Background-only frames for training the body camera model.
std::vector<Frame> background_frames(const SceneConfig& scene, std::size_t count, Rng& rng);

// Noise-free silhouette masks pushed through the drape.
std::vector<body::PoseReference> pose_references(const SceneConfig& scene,
                                                 const body::DrapeParams& params = {});

// Per-frame viewer dynamics around step_viewer: sway, erratic bursts and
// prompted gestures.
class Viewer {
 public:
  Viewer(ViewerProfile profile, const SceneConfig& scene);

  // One erratic-burst draw unless a burst is running; updates position and gesture.
  void begin_frame(long tick, Rng& rng);
  void respond(learning::StateId s, Routine a, Rng& rng);
  // One compliance draw, plus one index draw for a wrong gesture.
  void on_prompt(const std::string& gesture, const std::vector<std::string>& gestures, long tick,
                 double fps, Rng& rng);

  [[nodiscard]] const ViewerState& state() const noexcept { return state_; }
  [[nodiscard]] const ViewerProfile& profile() const noexcept { return profile_; }
  [[nodiscard]] bool in_burst() const noexcept { return burst_left_ > 0; }

 private:
  ViewerProfile profile_;
  int base_x_;
  int base_y_;
  int sway_amplitude_;
  int sway_period_;
  int burst_amplitude_;
  ViewerState state_;
  int burst_left_ = 0;
  int burst_sign_ = 1;
  std::optional<std::string> planned_gesture_;
  long gesture_from_ = 0;
  long gesture_until_ = 0;
};

}  // namespace imime::sim
