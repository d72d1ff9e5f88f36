#include "imime/attention.hpp"

#include "imime/error.hpp"

namespace imime {

std::string_view to_string(Interest i) noexcept {
  switch (i) {
    case Interest::Passive: return "Passive";
    case Interest::Interested: return "Interested";
    case Interest::Engaged: return "Engaged";
  }
  return "?";
}

AttentionFusion::AttentionFusion(FusionConfig config) : config_(std::move(config)) {
  if (!(config_.jerk_threshold > 0) || config_.erratic_frames < 1 || !(config_.recent_seconds > 0)) {
    throw Error(Errc::ConfigError, "fusion thresholds must be positive");
  }
}

void AttentionFusion::reset() {
  jerk_run_ = 0;
  last_expression_at_.reset();
  last_expression_ = std::string(face::kNeutral);
}

AttentionState AttentionFusion::evaluate(const PerceptionTick& tick) {
  AttentionState st;
  st.face_present = tick.orientation.has_value();
  st.attending = st.face_present && tick.orientation->label == face::Orientation::Frontal;

  if (tick.pose != "Unknown" && tick.pose != config_.rest_pose && !tick.pose.empty()) {
    st.gesture = tick.pose;
  }

  if (st.face_present && tick.jerk && *tick.jerk > config_.jerk_threshold) {
    ++jerk_run_;
  } else {
    jerk_run_ = 0;
  }
  st.erratic = jerk_run_ >= config_.erratic_frames;

  if (st.face_present && tick.expression != face::kNeutral) {
    last_expression_at_ = tick.time_seconds;
    last_expression_ = tick.expression;
  }
  const bool recent_expression =
      last_expression_at_ && tick.time_seconds - *last_expression_at_ <= config_.recent_seconds;
  st.expression = recent_expression ? last_expression_ : std::string(face::kNeutral);

  if (st.attending && st.gesture) {
    st.interest = Interest::Engaged;
  } else if (st.attending && recent_expression) {
    st.interest = Interest::Interested;
  } else {
    st.interest = Interest::Passive;
  }
  return st;
}

}  // namespace imime
