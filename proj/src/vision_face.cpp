#include "imime/vision_face.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <queue>
#include <tuple>

#include "imime/error.hpp"

namespace imime::face {

std::string_view to_string(Region r) noexcept {
  switch (r) {
    case Region::LeftEyebrow: return "LeftEyebrow";
    case Region::RightEyebrow: return "RightEyebrow";
    case Region::LeftEye: return "LeftEye";
    case Region::RightEye: return "RightEye";
    case Region::LeftCheek: return "LeftCheek";
    case Region::RightCheek: return "RightCheek";
    case Region::Mouth: return "Mouth";
  }
  return "?";
}

std::string_view to_string(MotionClass m) noexcept {
  switch (m) {
    case MotionClass::Still: return "Still";
    case MotionClass::Rigid: return "Rigid";
    case MotionClass::NonRigid: return "NonRigid";
  }
  return "?";
}

std::string_view to_string(Orientation o) noexcept {
  switch (o) {
    case Orientation::Left: return "Left";
    case Orientation::Frontal: return "Frontal";
    case Orientation::Right: return "Right";
  }
  return "?";
}

RegionLayout RegionLayout::standard() {
  RegionLayout l;
  l.regions[static_cast<std::size_t>(Region::LeftEyebrow)] = {0.10, 0.15, 0.45, 0.30};
  l.regions[static_cast<std::size_t>(Region::RightEyebrow)] = {0.55, 0.15, 0.90, 0.30};
  l.regions[static_cast<std::size_t>(Region::LeftEye)] = {0.10, 0.30, 0.45, 0.45};
  l.regions[static_cast<std::size_t>(Region::RightEye)] = {0.55, 0.30, 0.90, 0.45};
  l.regions[static_cast<std::size_t>(Region::LeftCheek)] = {0.10, 0.50, 0.45, 0.70};
  l.regions[static_cast<std::size_t>(Region::RightCheek)] = {0.55, 0.50, 0.90, 0.70};
  l.regions[static_cast<std::size_t>(Region::Mouth)] = {0.30, 0.70, 0.70, 0.90};
  return l;
}

void RegionLayout::validate() const {
  constexpr double eps = 1e-9;
  for (std::size_t i = 0; i < kRegionCount; ++i) {
    const auto& r = regions[i];
    if (!(r.x0 >= 0 && r.y0 >= 0 && r.x1 <= 1 && r.y1 <= 1 && r.x0 < r.x1 && r.y0 < r.y1)) {
      throw Error(Errc::InvalidArgument,
                  "region " + std::string(to_string(static_cast<Region>(i))) +
                      " is not a proper sub-rectangle of the unit square");
    }
    for (std::size_t j = i + 1; j < kRegionCount; ++j) {
      const auto& o = regions[j];
      const bool overlap = r.x0 < o.x1 - eps && o.x0 < r.x1 - eps && r.y0 < o.y1 - eps &&
                           o.y0 < r.y1 - eps;
      if (overlap) throw Error(Errc::InvalidArgument, "face regions overlap");
    }
  }
  for (std::size_t left = 0; left < 6; left += 2) {
    const auto& l = regions[left];
    const auto& r = regions[left + 1];
    const bool mirrored = std::abs(l.x0 - (1 - r.x1)) < eps && std::abs(l.x1 - (1 - r.x0)) < eps &&
                          std::abs(l.y0 - r.y0) < eps && std::abs(l.y1 - r.y1) < eps;
    if (!mirrored) throw Error(Errc::InvalidArgument, "left/right regions are not mirror images");
  }
}

std::array<PixelRect, kRegionCount> partition_regions(const PixelRect& face,
                                                       const RegionLayout& layout) {
  if (face.w < kMinFaceSide || face.h < kMinFaceSide) {
    throw Error(Errc::RectTooSmall, "face rectangle must be at least 14x14");
  }
  layout.validate();
  std::array<PixelRect, kRegionCount> out{};
  for (std::size_t i = 0; i < kRegionCount; ++i) {
    const auto& f = layout.regions[i];
    const int x0 = face.x + static_cast<int>(std::lround(f.x0 * face.w));
    const int x1 = face.x + static_cast<int>(std::lround(f.x1 * face.w));
    const int y0 = face.y + static_cast<int>(std::lround(f.y0 * face.h));
    const int y1 = face.y + static_cast<int>(std::lround(f.y1 * face.h));
    out[i] = PixelRect{x0, y0, x1 - x0, y1 - y0};
    if (out[i].w <= 0 || out[i].h <= 0 || out[i].area() < 4) {
      throw Error(Errc::RectTooSmall,
                  "region " + std::string(to_string(static_cast<Region>(i))) + " degenerates");
    }
  }
  return out;
}

FlowField block_flow(const Frame& prev, const Frame& cur, const PixelRect& region,
                     const FlowParams& params) {
  if (!prev.same_shape(cur)) throw Error(Errc::DimensionMismatch, "flow frames differ in size");
  if (!prev.contains(region)) throw Error(Errc::InvalidArgument, "flow region outside frame");
  if (params.block_size < 1 || params.search_radius < 0) {
    throw Error(Errc::InvalidArgument, "bad block-flow parameters");
  }

  FlowField field{region, params.block_size, params.search_radius, {}};
  const int B = params.block_size;
  const int R = params.search_radius;
  for (int by = region.y; by < region.bottom(); by += B) {
    const int bh = std::min(B, region.bottom() - by);
    for (int bx = region.x; bx < region.right(); bx += B) {
      const int bw = std::min(B, region.right() - bx);
      // (sad, |d|^2, dy, dx): lexicographic minimum
      std::tuple<long, int, int, int> best{std::numeric_limits<long>::max(), 0, 0, 0};
      for (int dy = -R; dy <= R; ++dy) {
        if (by + dy < 0 || by + dy + bh > cur.height()) continue;
        for (int dx = -R; dx <= R; ++dx) {
          if (bx + dx < 0 || bx + dx + bw > cur.width()) continue;
          long sad = 0;
          const long bound = std::get<0>(best);
          for (int j = 0; j < bh && sad <= bound; ++j) {
            for (int i = 0; i < bw; ++i) {
              sad += std::abs(int{prev(bx + i, by + j)} - int{cur(bx + i + dx, by + j + dy)});
            }
          }
          const std::tuple<long, int, int, int> cand{sad, dx * dx + dy * dy, dy, dx};
          if (cand < best) best = cand;
        }
      }
      field.blocks.push_back(
          {PixelRect{bx, by, bw, bh},
           FlowVector{static_cast<double>(std::get<3>(best)), static_cast<double>(std::get<2>(best))}});
    }
  }
  return field;
}

CharacteristicFlow characteristic_flow(std::span<const FlowField> fields) {
  if (fields.size() != kRegionCount) {
    throw Error(Errc::InvalidArgument, "characteristic flow needs exactly 7 region fields");
  }
  CharacteristicFlow cf{};
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    const auto& blocks = fields[r].blocks;
    if (blocks.empty()) continue;
    double sx = 0;
    double sy = 0;
    for (const auto& b : blocks) {
      sx += b.flow.dx;
      sy += b.flow.dy;
    }
    cf[2 * r] = sx / static_cast<double>(blocks.size());
    cf[2 * r + 1] = sy / static_cast<double>(blocks.size());
  }
  return cf;
}

std::vector<ExpressionReference> standard_expression_references() {
  auto set = [](CharacteristicFlow& cf, Region r, double dx, double dy) {
    cf[2 * static_cast<std::size_t>(r)] = dx;
    cf[2 * static_cast<std::size_t>(r) + 1] = dy;
  };
  ExpressionReference smile{"Smile", {}};
  set(smile.flow, Region::LeftCheek, -0.5, -1.0);
  set(smile.flow, Region::RightCheek, 0.5, -1.0);
  set(smile.flow, Region::Mouth, 0.0, -1.0);

  ExpressionReference frown{"Frown", {}};
  set(frown.flow, Region::LeftEyebrow, 0.5, 1.0);
  set(frown.flow, Region::RightEyebrow, -0.5, 1.0);
  set(frown.flow, Region::Mouth, 0.0, 1.0);

  ExpressionReference raise{"EyebrowRaise", {}};
  set(raise.flow, Region::LeftEyebrow, 0.0, -2.0);
  set(raise.flow, Region::RightEyebrow, 0.0, -2.0);
  return {smile, frown, raise};
}

namespace {

double norm(const CharacteristicFlow& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::string classify_expression(const CharacteristicFlow& cf,
                                std::span<const ExpressionReference> refs,
                                double min_similarity, double min_magnitude) {
  if (refs.empty()) throw Error(Errc::EmptyReferenceSet, "no expression references");
  for (const auto& ref : refs) {
    if (norm(ref.flow) == 0) {
      throw Error(Errc::InvalidArgument, "expression reference '" + ref.label + "' is zero");
    }
  }
  const double cf_norm = norm(cf);
  if (cf_norm < min_magnitude || cf_norm == 0) return std::string(kNeutral);

  const ExpressionReference* best = nullptr;
  double best_sim = -2;
  for (const auto& ref : refs) {
    double dot = 0;
    for (std::size_t i = 0; i < cf.size(); ++i) dot += cf[i] * ref.flow[i];
    const double sim = dot / (cf_norm * norm(ref.flow));
    if (sim > best_sim) {
      best_sim = sim;
      best = &ref;
    }
  }
  return best_sim >= min_similarity ? best->label : std::string(kNeutral);
}

double peak_spread(const FlowField& field, double peak_quantile) {
  std::vector<double> nonzero;
  for (const auto& b : field.blocks) {
    const double m = std::hypot(b.flow.dx, b.flow.dy);
    if (m > 0) nonzero.push_back(m);
  }
  if (nonzero.empty()) return 0;
  std::sort(nonzero.begin(), nonzero.end());
  // nearest-rank quantile
  const auto rank = static_cast<std::size_t>(
      std::ceil(peak_quantile * static_cast<double>(nonzero.size())));
  const double threshold = nonzero[std::clamp<std::size_t>(rank, 1, nonzero.size()) - 1];

  double sx = 0;
  double sy = 0;
  std::size_t n = 0;
  for (const auto& b : field.blocks) {
    if (std::hypot(b.flow.dx, b.flow.dy) >= threshold) {
      sx += b.block.x + b.block.w / 2.0;
      sy += b.block.y + b.block.h / 2.0;
      ++n;
    }
  }
  const double cx = sx / static_cast<double>(n);
  const double cy = sy / static_cast<double>(n);
  double var = 0;
  for (const auto& b : field.blocks) {
    if (std::hypot(b.flow.dx, b.flow.dy) >= threshold) {
      const double ex = b.block.x + b.block.w / 2.0 - cx;
      const double ey = b.block.y + b.block.h / 2.0 - cy;
      var += ex * ex + ey * ey;
    }
  }
  const double half_diag = std::hypot(field.region.w, field.region.h) / 2.0;
  return half_diag > 0 ? std::sqrt(var / static_cast<double>(n)) / half_diag : 0.0;
}

MotionClass classify_motion(const FlowField& face_field, const CharacteristicFlow& region_means,
                            const MotionThresholds& thresholds) {
  if (face_field.blocks.empty()) return MotionClass::Still;
  double total = 0;
  for (const auto& b : face_field.blocks) total += std::hypot(b.flow.dx, b.flow.dy);
  if (total / static_cast<double>(face_field.blocks.size()) < thresholds.still) {
    return MotionClass::Still;
  }
  bool all_zones = true;
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    if (std::hypot(region_means[2 * r], region_means[2 * r + 1]) <= thresholds.zone) {
      all_zones = false;
    }
  }
  if (all_zones && peak_spread(face_field, thresholds.peak_quantile) > thresholds.spread) {
    return MotionClass::Rigid;
  }
  return MotionClass::NonRigid;
}

namespace {

// Pixel accessor clamped to the rectangle.
struct RectView {
  const Frame& frame;
  const PixelRect& rect;
  [[nodiscard]] int at(int x, int y) const {
    x = std::clamp(x, rect.x, rect.right() - 1);
    y = std::clamp(y, rect.y, rect.bottom() - 1);
    return frame(x, y);
  }
};

void require_inside(const Frame& frame, const PixelRect& rect) {
  if (!frame.contains(rect)) throw Error(Errc::InvalidArgument, "face rectangle outside frame");
}

}  // namespace

double symmetry_score(const Frame& frame, const PixelRect& rect) {
  require_inside(frame, rect);
  const RectView view{frame, rect};
  std::vector<int> filtered(static_cast<std::size_t>(rect.area()));
  std::array<int, 9> window{};
  for (int y = 0; y < rect.h; ++y) {
    for (int x = 0; x < rect.w; ++x) {
      std::size_t k = 0;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) window[k++] = view.at(rect.x + x + i, rect.y + y + j);
      std::nth_element(window.begin(), window.begin() + 4, window.end());
      filtered[static_cast<std::size_t>(y * rect.w + x)] = window[4];
    }
  }
  double sum = 0;
  for (int y = 0; y < rect.h; ++y) {
    for (int x = 0; x < rect.w; ++x) {
      const int mirror = rect.w - 1 - x;
      sum += std::abs(filtered[static_cast<std::size_t>(y * rect.w + x)] -
                      filtered[static_cast<std::size_t>(y * rect.w + mirror)]);
    }
  }
  return sum / (255.0 * static_cast<double>(rect.area()));
}

double edge_cog_offset(const Frame& frame, const PixelRect& rect, double edge_threshold) {
  require_inside(frame, rect);
  const RectView v{frame, rect};
  double sum_x = 0;
  long count = 0;
  for (int y = rect.y; y < rect.bottom(); ++y) {
    for (int x = rect.x; x < rect.right(); ++x) {
      const int gx = (v.at(x + 1, y - 1) + 2 * v.at(x + 1, y) + v.at(x + 1, y + 1)) -
                     (v.at(x - 1, y - 1) + 2 * v.at(x - 1, y) + v.at(x - 1, y + 1));
      const int gy = (v.at(x - 1, y + 1) + 2 * v.at(x, y + 1) + v.at(x + 1, y + 1)) -
                     (v.at(x - 1, y - 1) + 2 * v.at(x, y - 1) + v.at(x + 1, y - 1));
      if (std::hypot(gx, gy) >= edge_threshold) {
        sum_x += x + 0.5;
        ++count;
      }
    }
  }
  if (count == 0) return 0.0;
  const double cog = sum_x / static_cast<double>(count);
  const double center = rect.x + rect.w / 2.0;
  return std::clamp((cog - center) / (rect.w / 2.0), -1.0, 1.0);
}

OrientationEstimate fuse_orientation(double symmetry, double edge_offset,
                                     const OrientationThresholds& t,
                                     std::optional<Orientation> previous) {
  OrientationEstimate est;
  est.symmetry = symmetry;
  est.edge_offset = edge_offset;
  const double sym_frac = std::min(1.0, symmetry / t.symmetry);
  const double edge_frac = std::min(1.0, std::abs(edge_offset) / t.edge);
  const double frontal_conf = (1.0 - sym_frac) * (1.0 - edge_frac);

  if (symmetry < t.symmetry && std::abs(edge_offset) < t.edge) {
    est.label = Orientation::Frontal;
    est.confidence = frontal_conf;
    return est;
  }
  if (edge_offset < 0) {
    est.label = Orientation::Left;
  } else if (edge_offset > 0) {
    est.label = Orientation::Right;
  } else {
    // no lateral evidence: keep the previous turned label
    est.label = (previous && *previous != Orientation::Frontal) ? *previous : Orientation::Left;
  }
  est.confidence = 1.0 - frontal_conf;
  return est;
}

HeadTrack::HeadTrack(std::size_t capacity) : buffer_(capacity) {
  if (capacity < 5) throw Error(Errc::InvalidArgument, "head track needs capacity >= 5");
}

void HeadTrack::push(Point2 p) {
  buffer_[head_] = p;
  head_ = (head_ + 1) % buffer_.size();
  size_ = std::min(size_ + 1, buffer_.size());
}

Point2 HeadTrack::at(std::size_t i) const {
  if (i >= size_) throw Error(Errc::InvalidArgument, "head track index out of range");
  const std::size_t oldest = (head_ + buffer_.size() - size_) % buffer_.size();
  return buffer_[(oldest + i) % buffer_.size()];
}

double estimate_jerk(const HeadTrack& track) {
  if (track.size() < 5) {
    throw Error(Errc::InsufficientHistory, "jerk needs five head positions");
  }
  constexpr std::array<double, 5> coeff{1, -4, 6, -4, 1};  // oldest .. newest
  const std::size_t base = track.size() - 5;
  double jx = 0;
  double jy = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto p = track.at(base + i);
    jx += coeff[i] * p.x;
    jy += coeff[i] * p.y;
  }
  return std::hypot(jx, jy);
}

std::optional<PixelRect> detect_bright_blob(const Frame& frame, int threshold, long min_area) {
  const int W = frame.width();
  const int H = frame.height();
  std::vector<char> seen(static_cast<std::size_t>(W) * static_cast<std::size_t>(H), 0);
  std::optional<PixelRect> best;
  long best_area = 0;
  std::queue<std::pair<int, int>> todo;
  for (int y0 = 0; y0 < H; ++y0) {
    for (int x0 = 0; x0 < W; ++x0) {
      const auto idx0 = static_cast<std::size_t>(y0 * W + x0);
      if (seen[idx0] || frame(x0, y0) < threshold) continue;
      seen[idx0] = 1;
      todo.emplace(x0, y0);
      long area = 0;
      int minx = x0, maxx = x0, miny = y0, maxy = y0;
      while (!todo.empty()) {
        const auto [x, y] = todo.front();
        todo.pop();
        ++area;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        constexpr std::array<std::pair<int, int>, 4> nbrs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& [dx, dy] : nbrs) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          const auto idx = static_cast<std::size_t>(ny * W + nx);
          if (seen[idx] || frame(nx, ny) < threshold) continue;
          seen[idx] = 1;
          todo.emplace(nx, ny);
        }
      }
      if (area > best_area) {
        best_area = area;
        best = PixelRect{minx, miny, maxx - minx + 1, maxy - miny + 1};
      }
    }
  }
  if (!best || best_area < min_area || best->w < kMinFaceSide || best->h < kMinFaceSide) {
    return std::nullopt;
  }
  return best;
}

FaceAnalyzer::FaceAnalyzer(FaceConfig config) : config_(std::move(config)) {
  config_.layout.validate();
}

void FaceAnalyzer::reset() {
  previous_.reset();
  track_.clear();
  last_label_.reset();
}

FaceObservation FaceAnalyzer::analyze(const Frame& frame, std::optional<PixelRect> rect) {
  FaceObservation obs;
  if (!rect) {
    track_.clear();
    previous_ = frame;
    return obs;
  }
  obs.rect = rect;

  const double s = symmetry_score(frame, *rect);
  const double e = edge_cog_offset(frame, *rect, config_.edge_threshold);
  obs.orientation = fuse_orientation(s, e, config_.orientation, last_label_);
  last_label_ = obs.orientation->label;

  track_.push({rect->x + rect->w / 2.0, rect->y + rect->h / 2.0});
  if (track_.size() >= 5) obs.jerk = estimate_jerk(track_);

  if (previous_ && previous_->same_shape(frame)) {
    const auto regions = partition_regions(*rect, config_.layout);
    std::array<FlowField, kRegionCount> fields;
    for (std::size_t r = 0; r < kRegionCount; ++r) {
      fields[r] = block_flow(*previous_, frame, regions[r], config_.flow);
    }
    obs.flow = characteristic_flow(fields);
    const auto whole = block_flow(*previous_, frame, *rect, config_.flow);
    obs.motion = classify_motion(whole, obs.flow, config_.motion);
    // expressions are only read off non-rigid motion
    if (obs.motion == MotionClass::NonRigid) {
      obs.expression = classify_expression(obs.flow, config_.references,
                                           config_.expression_similarity,
                                           config_.expression_magnitude);
    }
  }
  previous_ = frame;
  return obs;
}

}  // namespace imime::face
