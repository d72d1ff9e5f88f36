#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "imime/vision_face.hpp"

namespace imime {

enum class Interest { Passive, Interested, Engaged };
std::string_view to_string(Interest i) noexcept;

struct AttentionState {
  bool face_present = false;
  bool attending = false;
  Interest interest = Interest::Passive;
  bool erratic = false;
  std::optional<std::string> gesture;
  std::string expression{face::kNeutral};

  friend bool operator==(const AttentionState&, const AttentionState&) = default;
};

struct FusionConfig {
  double jerk_threshold = 12.0;   // px, fourth-difference units
  int erratic_frames = 3;         // consecutive frames above threshold
  double recent_seconds = 2.0;    // expression memory
  std::string rest_pose = "ArmsDown";
};

// Everything the vision side produced for one tick.
struct PerceptionTick {
  double time_seconds = 0;
  std::optional<face::OrientationEstimate> orientation;  // nullopt = no face
  std::string expression{face::kNeutral};
  face::MotionClass motion = face::MotionClass::Still;
  std::optional<double> jerk;
  std::string pose{"Unknown"};
};

// Owns the expression-recency memory and the erratic run counter.
class AttentionFusion {
 public:
  explicit AttentionFusion(FusionConfig config = {});

  AttentionState evaluate(const PerceptionTick& tick);
  void reset();

  [[nodiscard]] const FusionConfig& config() const noexcept { return config_; }

 private:
  FusionConfig config_;
  int jerk_run_ = 0;
  std::optional<double> last_expression_at_;
  std::string last_expression_{face::kNeutral};
};

}  // namespace imime
