#include "imime/vision_body.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "imime/error.hpp"

namespace imime::body {

BackgroundModel train_background(std::span<const Frame> frames, double variance_floor) {
  if (frames.size() < 2) throw Error(Errc::TooFewFrames, "background needs at least 2 frames");
  if (!(variance_floor > 0)) throw Error(Errc::InvalidArgument, "variance floor must be positive");
  const Frame& first = frames.front();
  for (const auto& f : frames) {
    if (!f.same_shape(first)) throw Error(Errc::DimensionMismatch, "background frames differ in size");
  }
  BackgroundModel m;
  m.width = first.width();
  m.height = first.height();
  m.variance_floor = variance_floor;
  const std::size_t n = first.pixels().size();
  m.mean.assign(n, 0.0);
  m.variance.assign(n, 0.0);
  // two-pass: mean, then population variance
  for (const auto& f : frames) {
    const auto px = f.pixels();
    for (std::size_t i = 0; i < n; ++i) m.mean[i] += px[i];
  }
  const double count = static_cast<double>(frames.size());
  for (auto& v : m.mean) v /= count;
  for (const auto& f : frames) {
    const auto px = f.pixels();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = px[i] - m.mean[i];
      m.variance[i] += d * d;
    }
  }
  for (auto& v : m.variance) v = std::max(v / count, variance_floor);
  return m;
}

ForegroundMask::ForegroundMask(int width, int height)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {}

long ForegroundMask::count() const noexcept {
  return static_cast<long>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Frame ForegroundMask::to_frame() const {
  Frame f(width_, height_, 0);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) f(x, y) = (*this)(x, y) ? 255 : 0;
  return f;
}

ForegroundMask segment_foreground(const BackgroundModel& model, const Frame& frame,
                                  double threshold) {
  if (frame.width() != model.width || frame.height() != model.height) {
    throw Error(Errc::DimensionMismatch, "frame does not match background model");
  }
  const int W = model.width;
  const int H = model.height;
  ForegroundMask raw(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto i = static_cast<std::size_t>(y * W + x);
      const double z = std::abs(frame(x, y) - model.mean[i]) / std::sqrt(model.variance[i]);
      raw.set(x, y, z > threshold);
    }
  }
  // majority vote over the in-bounds 3x3 neighbourhood (ties keep the pixel)
  ForegroundMask out(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      int on = 0;
      int total = 0;
      for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
          const int nx = x + i;
          const int ny = y + j;
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          ++total;
          on += raw(nx, ny) ? 1 : 0;
        }
      }
      const int off = total - on;
      out.set(x, y, on > off || (on == off && raw(x, y)));
    }
  }
  return out;
}

DrapeResult drape_heights(const ForegroundMask& mask, const DrapeParams& p) {
  const int W = mask.width();
  const int H = mask.height();
  std::vector<double> support(static_cast<std::size_t>(W), static_cast<double>(H));
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) {
      if (mask(x, y)) {
        support[static_cast<std::size_t>(x)] = y;
        break;
      }
    }
  }

  DrapeResult result;
  std::vector<double> y(static_cast<std::size_t>(W), 0.0);
  std::vector<double> fallen(y.size());
  std::vector<double> next(y.size());
  for (int it = 0; it < p.max_iterations; ++it) {
    for (std::size_t c = 0; c < y.size(); ++c) fallen[c] = std::min(y[c] + p.gravity, support[c]);
    double max_move = 0;
    for (std::size_t c = 0; c < y.size(); ++c) {
      double avg;
      if (y.size() == 1) {
        avg = fallen[c];
      } else if (c == 0) {
        avg = fallen[1];
      } else if (c + 1 == y.size()) {
        avg = fallen[c - 1];
      } else {
        avg = 0.5 * (fallen[c - 1] + fallen[c + 1]);
      }
      next[c] = std::min((1.0 - p.coupling) * fallen[c] + p.coupling * avg, support[c]);
      max_move = std::max(max_move, std::abs(next[c] - y[c]));
    }
    y.swap(next);
    result.iterations = it + 1;
    if (max_move < p.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.heights = std::move(y);
  return result;
}

DrapeProfile normalize_profile(std::span<const double> heights) {
  DrapeProfile out(heights.begin(), heights.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (auto& v : out) v = range > 0 ? (v - min) / range : 0.0;
  return out;
}

DrapeProfile drape(const ForegroundMask& mask, const DrapeParams& params) {
  return normalize_profile(drape_heights(mask, params).heights);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "profiles differ in length");
  const auto n = static_cast<double>(a.size());
  if (a.empty()) return 0;
  double ma = 0;
  double mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0;
  double saa = 0;
  double sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 1e-15 * n || sbb <= 1e-15 * n) return 0;
  return sab / std::sqrt(saa * sbb);
}

std::string classify_pose(std::span<const double> profile, std::span<const PoseReference> refs,
                          double min_correlation) {
  if (refs.empty()) throw Error(Errc::EmptyReferenceSet, "no pose references");
  const PoseReference* best = nullptr;
  double best_r = -2;
  for (const auto& ref : refs) {
    const double r = pearson(profile, ref.profile);
    if (r > best_r) {
      best_r = r;
      best = &ref;
    }
  }
  return best_r >= min_correlation ? best->label : std::string(kUnknownPose);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::BadHeader, "non-numeric cell '" + s + "' in " + path.string());
  }
}

}  // namespace

void write_background_csv(const std::filesystem::path& path, const BackgroundModel& m) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "width,height,variance_floor\n";
  out << fmt::format("{},{},{}\n", m.width, m.height, m.variance_floor);
  auto rows = [&](std::string_view kind, const std::vector<double>& v) {
    for (int y = 0; y < m.height; ++y) {
      out << kind << ',' << y;
      for (int x = 0; x < m.width; ++x) out << fmt::format(",{}", v[static_cast<std::size_t>(y * m.width + x)]);
      out << '\n';
    }
  };
  rows("mean", m.mean);
  rows("variance", m.variance);
}

BackgroundModel read_background_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "width,height,variance_floor") throw Error(Errc::BadHeader, "bad background CSV header");
  std::getline(in, line);
  const auto dims = split(line);
  if (dims.size() != 3) throw Error(Errc::BadHeader, "bad background CSV dimensions");
  BackgroundModel m;
  m.width = static_cast<int>(to_double(dims[0], path));
  m.height = static_cast<int>(to_double(dims[1], path));
  m.variance_floor = to_double(dims[2], path);
  const auto n = static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height);
  m.mean.assign(n, 0);
  m.variance.assign(n, 0);
  std::size_t rows_read = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != static_cast<std::size_t>(m.width) + 2) {
      throw Error(Errc::LengthMismatch, "background CSV row has wrong length");
    }
    if (cells[0] != "mean" && cells[0] != "variance") {
      throw Error(Errc::BadHeader, "unknown background CSV row kind '" + cells[0] + "'");
    }
    auto& target = cells[0] == "mean" ? m.mean : m.variance;
    const int y = static_cast<int>(to_double(cells[1], path));
    if (y < 0 || y >= m.height) throw Error(Errc::BadHeader, "background row index out of range");
    for (int x = 0; x < m.width; ++x) {
      target[static_cast<std::size_t>(y * m.width + x)] =
          to_double(cells[static_cast<std::size_t>(x) + 2], path);
    }
    ++rows_read;
  }
  if (rows_read != 2 * static_cast<std::size_t>(m.height)) {
    throw Error(Errc::TruncatedChunk, "background CSV is missing rows");
  }
  return m;
}

void write_pose_references_csv(const std::filesystem::path& path,
                               std::span<const PoseReference> refs) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  const std::size_t n = refs.empty() ? 0 : refs.front().profile.size();
  out << "label";
  for (std::size_t i = 0; i < n; ++i) out << ",h" << i;
  out << '\n';
  for (const auto& r : refs) {
    out << r.label;
    for (double v : r.profile) out << fmt::format(",{}", v);
    out << '\n';
  }
}

std::vector<PoseReference> read_pose_references_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  if (header.empty() || header[0] != "label") throw Error(Errc::BadHeader, "bad pose CSV header");
  std::vector<PoseReference> refs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw Error(Errc::LengthMismatch, "pose CSV row length");
    PoseReference r{cells[0], {}};
    for (std::size_t i = 1; i < cells.size(); ++i) r.profile.push_back(to_double(cells[i], path));
    refs.push_back(std::move(r));
  }
  return refs;
}

}  // namespace imime::body
