#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imime/frame.hpp"

namespace imime::body {

// Per-pixel Gaussian background: sample mean and population variance,
// floored at `variance_floor`.
struct BackgroundModel {
  int width = 0;
  int height = 0;
  double variance_floor = 4.0;
  std::vector<double> mean;
  std::vector<double> variance;
};

BackgroundModel train_background(std::span<const Frame> frames, double variance_floor = 4.0);

class ForegroundMask {
 public:
  ForegroundMask() = default;
  ForegroundMask(int width, int height);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  bool operator()(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  [[nodiscard]] long count() const noexcept;

  // 0/255 image for debugging dumps.
  [[nodiscard]] Frame to_frame() const;

  friend bool operator==(const ForegroundMask&, const ForegroundMask&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// |I - mu| / sigma > threshold, then one 3x3 majority-vote pass.
ForegroundMask segment_foreground(const BackgroundModel& model, const Frame& frame,
                                  double threshold = 3.0);

struct DrapeParams {
  double gravity = 2.0;        // px per iteration
  double coupling = 0.25;      // spring weight toward neighbour average
  double tolerance = 0.05;     // px; stop when max displacement drops below
  int max_iterations = 2000;
};

struct DrapeResult {
  std::vector<double> heights;  // settled row per column, 0 = top
  int iterations = 0;
  bool converged = false;
};

// One cloth node per column, dropped from the top onto the mask.
DrapeResult drape_heights(const ForegroundMask& mask, const DrapeParams& params = {});

using DrapeProfile = std::vector<double>;

// (h - min) / (max - min); all zeros for a constant input.
DrapeProfile normalize_profile(std::span<const double> heights);

DrapeProfile drape(const ForegroundMask& mask, const DrapeParams& params = {});

struct PoseReference {
  std::string label;
  DrapeProfile profile;
};

inline constexpr std::string_view kUnknownPose = "Unknown";

// Pearson correlation; 0 when either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);

std::string classify_pose(std::span<const double> profile, std::span<const PoseReference> refs,
                          double min_correlation = 0.9);

// Background CSV: line 1 "width,height,variance_floor"; then one "mean,<row>,..."
// line per pixel row, then one "variance,<row>,..." line per pixel row.
void write_background_csv(const std::filesystem::path& path, const BackgroundModel& model);
BackgroundModel read_background_csv(const std::filesystem::path& path);

// Pose reference CSV: header "label,h0,h1,...", one row per reference.
void write_pose_references_csv(const std::filesystem::path& path,
                               std::span<const PoseReference> refs);
std::vector<PoseReference> read_pose_references_csv(const std::filesystem::path& path);

}  // namespace imime::body
