#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "imime/attention.hpp"
#include "imime/behavior.hpp"
#include "imime/learning.hpp"
#include "imime/vision_body.hpp"
#include "imime/vision_face.hpp"
#include "imime/viewer_sim.hpp"

namespace imime::harness {

enum class Mode { Labels, Pixels };
enum class Controller { Learning, Random, Fixed };

std::string_view to_string(Mode m) noexcept;
std::string_view to_string(Controller c) noexcept;

struct VisionConfig {
  face::FaceConfig face;
  FusionConfig fusion;
  body::DrapeParams drape;
  double pose_threshold = 0.9;
  double segment_threshold = 3.0;
  double variance_floor = 4.0;
  int background_frames = 20;
  long min_face_area = 200;
};

struct EpisodeConfig {
  Mode mode = Mode::Labels;
  long steps = 40'000;  // frames
  double fps = 10.0;
  double decision_seconds = 2.0;
  std::uint64_t seed = 1;
  double change_probability = 0.5;
  Controller controller = Controller::Learning;
  std::optional<Routine> fixed_routine;
  learning::ValueMode value_mode = learning::ValueMode::Synchronous;

  sim::ViewerProfile profile = sim::default_profile();
  sim::SceneConfig scene;
  learning::PolicyConfig learning;
  BehaviorConfig behavior;
  VisionConfig vision;

  std::optional<std::filesystem::path> warm_start;       // learning CSV
  std::optional<std::filesystem::path> pose_references;  // pose CSV
  std::filesystem::path out_dir;
  bool dump_frames = false;

  [[nodiscard]] long decision_period() const;
  // Also aligns behavior.fps and behavior.selectable with the episode.
  void validate();
};

// Flat "key = value" text with [section] headers. Unknown keys are rejected.
EpisodeConfig load_config(const std::filesystem::path& path);
EpisodeConfig parse_config(const std::string& text,
                           const std::filesystem::path& base_dir = std::filesystem::path("."));

}  // namespace imime::harness
