#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imime/frame.hpp"

namespace imime::face {

enum class Region { LeftEyebrow, RightEyebrow, LeftEye, RightEye, LeftCheek, RightCheek, Mouth };
inline constexpr std::size_t kRegionCount = 7;
inline constexpr int kMinFaceSide = 14;

std::string_view to_string(Region r) noexcept;

// Sub-rectangle of the unit square, half-open on the right and bottom.
struct FracRect {
  double x0 = 0;
  double y0 = 0;
  double x1 = 0;
  double y1 = 0;
};

// Seven facial regions as fractions of the face rectangle, in Region order.
struct RegionLayout {
  std::array<FracRect, kRegionCount> regions{};

  static RegionLayout standard();
  // Throws InvalidArgument unless regions are disjoint, inside the unit square and
  // left/right pairs mirror each other.
  void validate() const;
};

std::array<PixelRect, kRegionCount> partition_regions(const PixelRect& face,
                                                       const RegionLayout& layout);

struct FlowVector {
  double dx = 0;
  double dy = 0;
};

struct FlowBlock {
  PixelRect block;
  FlowVector flow;
};

struct FlowField {
  PixelRect region;
  int block_size = 8;
  int search_radius = 7;
  std::vector<FlowBlock> blocks;
};

struct FlowParams {
  int block_size = 8;
  int search_radius = 7;
};

// Exhaustive SAD block matching of `prev` blocks against `cur`.
FlowField block_flow(const Frame& prev, const Frame& cur, const PixelRect& region,
                     const FlowParams& params = {});

// (mean dx, mean dy) for each region, concatenated in Region order.
using CharacteristicFlow = std::array<double, 2 * kRegionCount>;

CharacteristicFlow characteristic_flow(std::span<const FlowField> fields);

struct ExpressionReference {
  std::string label;
  CharacteristicFlow flow{};
};

inline constexpr std::string_view kNeutral = "Neutral";

std::vector<ExpressionReference> standard_expression_references();

std::string classify_expression(const CharacteristicFlow& cf,
                                std::span<const ExpressionReference> refs,
                                double min_similarity = 0.85, double min_magnitude = 1.0);

enum class MotionClass { Still, Rigid, NonRigid };
std::string_view to_string(MotionClass m) noexcept;

struct MotionThresholds {
  double still = 0.3;     // mean block flow magnitude, px
  double zone = 0.5;      // per-region mean flow magnitude, px
  double spread = 0.35;   // peak-position spread over half the region diagonal
  double peak_quantile = 0.75;
};

// Spatial spread of the peak blocks: RMS distance of peak centres from their
// centroid, divided by half of the field's diagonal.
double peak_spread(const FlowField& field, double peak_quantile = 0.75);

MotionClass classify_motion(const FlowField& face_field, const CharacteristicFlow& region_means,
                            const MotionThresholds& thresholds = {});

// Mean absolute left/right mirror difference of the median-filtered face, in [0,1].
double symmetry_score(const Frame& frame, const PixelRect& rect);

// Horizontal offset of the centre of gravity of significant edges, in [-1,1].
// Positive values mean edge mass to the right of the rectangle centre.
double edge_cog_offset(const Frame& frame, const PixelRect& rect, double edge_threshold = 32.0);

enum class Orientation { Left, Frontal, Right };
std::string_view to_string(Orientation o) noexcept;

struct OrientationThresholds {
  double symmetry = 0.06;
  double edge = 0.25;
};

struct OrientationEstimate {
  double symmetry = 0;
  double edge_offset = 0;
  Orientation label = Orientation::Frontal;
  double confidence = 0;
};

OrientationEstimate fuse_orientation(double symmetry, double edge_offset,
                                     const OrientationThresholds& thresholds = {},
                                     std::optional<Orientation> previous = std::nullopt);

struct Point2 {
  double x = 0;
  double y = 0;
};

// Fixed-capacity history of face-rectangle centres, oldest first.
class HeadTrack {
 public:
  explicit HeadTrack(std::size_t capacity = 5);

  void push(Point2 p);
  void clear() noexcept { size_ = 0; }
  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] std::size_t capacity() const noexcept { return buffer_.size(); }
  // i = 0 is the oldest retained sample.
  [[nodiscard]] Point2 at(std::size_t i) const;
  [[nodiscard]] Point2 latest() const { return at(size_ - 1); }

 private:
  std::vector<Point2> buffer_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
};

// Norm of the fourth-order finite difference over the last five samples.
double estimate_jerk(const HeadTrack& track);

// Bounding box of the largest 4-connected component at or above `threshold`.
std::optional<PixelRect> detect_bright_blob(const Frame& frame, int threshold, long min_area);

struct FaceConfig {
  RegionLayout layout = RegionLayout::standard();
  FlowParams flow;
  MotionThresholds motion;
  OrientationThresholds orientation;
  double edge_threshold = 32.0;
  double expression_similarity = 0.85;
  double expression_magnitude = 1.0;
  std::vector<ExpressionReference> references = standard_expression_references();
};

struct FaceObservation {
  std::optional<PixelRect> rect;
  std::optional<OrientationEstimate> orientation;
  MotionClass motion = MotionClass::Still;
  std::string expression{kNeutral};
  std::optional<double> jerk;
  CharacteristicFlow flow{};
};

// Stateful per-camera face pipeline: keeps the previous frame, the head track
// and the last orientation label for hysteresis.
class FaceAnalyzer {
 public:
  explicit FaceAnalyzer(FaceConfig config = {});

  FaceObservation analyze(const Frame& frame, std::optional<PixelRect> rect);
  void reset();

  [[nodiscard]] const FaceConfig& config() const noexcept { return config_; }

 private:
  FaceConfig config_;
  std::optional<Frame> previous_;
  HeadTrack track_;
  std::optional<Orientation> last_label_;
};

}  // namespace imime::face
