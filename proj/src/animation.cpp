#include "imime/animation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "imime/error.hpp"
#include "imime/rng.hpp"

namespace imime::anim {

Mesh blend_morphs(const Mesh& base, std::span<const MorphTarget> targets,
                  std::span<const double> weights) {
  if (targets.size() != weights.size()) {
    throw Error(Errc::LengthMismatch, "one weight per morph target required");
  }
  Mesh out = base;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (targets[j].deltas.size() != base.vertices.size()) {
      throw Error(Errc::LengthMismatch, "morph target '" + targets[j].label +
                                            "' does not match the base mesh");
    }
    const double w = weights[j];
    if (w == 0) continue;
    for (std::size_t i = 0; i < out.vertices.size(); ++i) out.vertices[i] += w * targets[j].deltas[i];
  }
  return out;
}

std::optional<std::size_t> MorphLibrary::find(std::string_view label) const {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].label == label) return i;
  }
  return std::nullopt;
}

namespace {

struct Primitive {
  const char* label;
  double cx, cy, radius;
  double dx, dy, dz;
};

// Feature anchors on a face spanning x in [-1, 1], y in [-1.3, 1.3].
constexpr Primitive kPrimitives[] = {
    {"brow_raise_left", -0.4, 0.55, 0.30, 0, 0.15, 0},
    {"brow_raise_right", 0.4, 0.55, 0.30, 0, 0.15, 0},
    {"brow_lower_left", -0.4, 0.55, 0.30, 0, -0.12, 0},
    {"brow_lower_right", 0.4, 0.55, 0.30, 0, -0.12, 0},
    {"brow_inner_up", 0.0, 0.55, 0.25, 0, 0.12, 0},
    {"brow_outer_up_left", -0.65, 0.55, 0.20, 0, 0.12, 0},
    {"brow_outer_up_right", 0.65, 0.55, 0.20, 0, 0.12, 0},
    {"brow_squeeze", 0.0, 0.5, 0.35, 0, -0.05, 0.05},
    {"eye_blink_left", -0.4, 0.3, 0.18, 0, -0.10, 0},
    {"eye_blink_right", 0.4, 0.3, 0.18, 0, -0.10, 0},
    {"eye_wide_left", -0.4, 0.3, 0.22, 0, 0.06, 0},
    {"eye_wide_right", 0.4, 0.3, 0.22, 0, 0.06, 0},
    {"eye_squint_left", -0.4, 0.22, 0.2, 0, 0.05, 0},
    {"eye_squint_right", 0.4, 0.22, 0.2, 0, 0.05, 0},
    {"mouth_open", 0.0, -0.65, 0.30, 0, -0.20, 0},
    {"mouth_smile_left", -0.3, -0.55, 0.22, -0.08, 0.10, 0},
    {"mouth_smile_right", 0.3, -0.55, 0.22, 0.08, 0.10, 0},
    {"mouth_frown_left", -0.3, -0.55, 0.22, -0.03, -0.10, 0},
    {"mouth_frown_right", 0.3, -0.55, 0.22, 0.03, -0.10, 0},
    {"mouth_pucker", 0.0, -0.55, 0.25, 0, 0, 0.15},
    {"mouth_wide", 0.0, -0.55, 0.45, 0, 0, -0.03},
    {"mouth_funnel", 0.0, -0.55, 0.20, 0, -0.04, 0.10},
    {"mouth_press", 0.0, -0.55, 0.25, 0, 0.02, -0.05},
    {"mouth_left", -0.1, -0.55, 0.35, -0.12, 0, 0},
    {"mouth_right", 0.1, -0.55, 0.35, 0.12, 0, 0},
    {"lip_upper_up", 0.0, -0.45, 0.20, 0, 0.08, 0},
    {"lip_lower_down", 0.0, -0.68, 0.20, 0, -0.08, 0},
    {"jaw_open", 0.0, -1.0, 0.55, 0, -0.25, 0},
    {"tongue_out", 0.0, -0.62, 0.12, 0, -0.05, 0.25},
    {"tongue_up", 0.0, -0.62, 0.12, 0, 0.08, 0.10},
    {"tongue_down", 0.0, -0.62, 0.12, 0, -0.12, 0.10},
    {"tongue_left", 0.0, -0.62, 0.12, -0.12, 0, 0.10},
    {"tongue_right", 0.0, -0.62, 0.12, 0.12, 0, 0.10},
    {"cheek_puff", 0.0, -0.3, 0.60, 0, 0, 0.12},
    {"cheek_raise", 0.0, -0.1, 0.55, 0, 0.06, 0.03},
    {"nose_wrinkle", 0.0, 0.05, 0.20, 0, 0.05, 0.02},
};

// Core expressions as sums of primitives.
struct Composite {
  const char* label;
  std::initializer_list<std::pair<const char*, double>> parts;
};

const Composite kComposites[] = {
    {"smile", {{"mouth_smile_left", 1}, {"mouth_smile_right", 1}, {"cheek_raise", 0.6}}},
    {"frown", {{"mouth_frown_left", 1}, {"mouth_frown_right", 1}, {"brow_lower_left", 0.5},
               {"brow_lower_right", 0.5}}},
    {"surprise", {{"brow_raise_left", 1}, {"brow_raise_right", 1}, {"eye_wide_left", 1},
                  {"eye_wide_right", 1}, {"jaw_open", 0.7}}},
    {"anger", {{"brow_lower_left", 1}, {"brow_lower_right", 1}, {"brow_squeeze", 1},
               {"mouth_press", 1}}},
    {"sadness", {{"brow_inner_up", 1}, {"mouth_frown_left", 0.7}, {"mouth_frown_right", 0.7}}},
    {"disgust", {{"nose_wrinkle", 1}, {"lip_upper_up", 1}, {"brow_squeeze", 0.5}}},
};

}  // namespace

MorphLibrary standard_morph_library() {
  MorphLibrary lib;
  constexpr int kCols = 9;
  constexpr int kRows = 11;
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c < kCols; ++c) {
      const double x = -1.0 + 2.0 * c / (kCols - 1);
      const double y = -1.3 + 2.6 * r / (kRows - 1);
      const double bulge = 1.0 - 0.5 * x * x - 0.3 * y * y;
      lib.base.vertices.emplace_back(x, y, std::max(0.0, bulge));
    }
  }
  for (const auto& p : kPrimitives) {
    MorphTarget t{p.label, {}};
    for (const auto& v : lib.base.vertices) {
      const double d2 = (v.x() - p.cx) * (v.x() - p.cx) + (v.y() - p.cy) * (v.y() - p.cy);
      const double falloff = std::exp(-d2 / (p.radius * p.radius));
      t.deltas.emplace_back(falloff * Vec3(p.dx, p.dy, p.dz));
    }
    lib.targets.push_back(std::move(t));
  }
  for (const auto& comp : kComposites) {
    MorphTarget t{comp.label, std::vector<Vec3>(lib.base.vertices.size(), Vec3::Zero())};
    for (const auto& [label, w] : comp.parts) {
      const auto& src = lib.targets[*lib.find(label)];
      for (std::size_t i = 0; i < t.deltas.size(); ++i) t.deltas[i] += w * src.deltas[i];
    }
    lib.targets.push_back(std::move(t));
  }
  return lib;
}

std::map<std::string, double> expression_weights(std::string_view expression) {
  if (expression == "Smile") return {{"smile", 1.0}};
  if (expression == "Frown") return {{"frown", 1.0}};
  if (expression == "EyebrowRaise") return {{"brow_raise_left", 1.0}, {"brow_raise_right", 1.0}};
  return {};
}

void Skeleton::validate() const {
  int roots = 0;
  for (std::size_t i = 0; i < bones.size(); ++i) {
    const int p = bones[i].parent;
    if (p < 0) {
      ++roots;
    } else if (static_cast<std::size_t>(p) >= i) {
      throw Error(Errc::InvalidArgument, "bone '" + bones[i].name + "' precedes its parent");
    }
    if (bones[i].axis.norm() == 0) throw Error(Errc::InvalidArgument, "zero rotation axis");
  }
  if (roots != 1) throw Error(Errc::InvalidArgument, "skeleton needs exactly one root");
}

std::optional<std::size_t> Skeleton::find(std::string_view name) const {
  for (std::size_t i = 0; i < bones.size(); ++i) {
    if (bones[i].name == name) return i;
  }
  return std::nullopt;
}

Skeleton standard_skeleton() {
  // Bones point along their local +x; the spine runs up the model's +x axis and
  // the arms hang off the top of the spine.
  Skeleton s;
  auto add = [&](std::string name, int parent, Vec3 offset, double length) {
    s.bones.push_back(Bone{std::move(name), parent, offset, length, Vec3::UnitZ()});
  };
  add("pelvis", -1, Vec3::Zero(), 0.2);
  add("spine", 0, Vec3(0.2, 0, 0), 1.0);
  add("neck", 1, Vec3(1.0, 0, 0), 0.25);
  add("head", 2, Vec3(0.25, 0, 0), 0.45);
  add("l_upper_arm", 1, Vec3(0.9, 0.35, 0), 0.6);
  add("l_lower_arm", 4, Vec3(0.6, 0, 0), 0.55);
  add("l_hand", 5, Vec3(0.55, 0, 0), 0.2);
  add("r_upper_arm", 1, Vec3(0.9, -0.35, 0), 0.6);
  add("r_lower_arm", 7, Vec3(0.6, 0, 0), 0.55);
  add("r_hand", 8, Vec3(0.55, 0, 0), 0.2);
  s.validate();
  return s;
}

std::vector<Transform> forward_kinematics(const Skeleton& skel, std::span<const double> angles) {
  if (angles.size() != skel.bones.size()) {
    throw Error(Errc::AngleCountMismatch, fmt::format("expected {} angles, got {}",
                                                      skel.bones.size(), angles.size()));
  }
  std::vector<Transform> global(skel.bones.size(), Transform::Identity());
  for (std::size_t i = 0; i < skel.bones.size(); ++i) {
    const Bone& b = skel.bones[i];
    Transform local = Transform::Identity();
    local.translate(b.rest_offset);
    local.rotate(Eigen::AngleAxisd(angles[i], b.axis.normalized()));
    global[i] = b.parent < 0 ? local : global[static_cast<std::size_t>(b.parent)] * local;
  }
  return global;
}

Vec3 bone_tip(const Skeleton& skel, const std::vector<Transform>& globals, std::size_t bone) {
  return globals.at(bone) * Vec3(skel.bones.at(bone).length, 0, 0);
}

Mesh skin(const Mesh& base, std::span<const Transform> transforms, const SkinWeights& weights,
          std::span<const Transform> rest_transforms) {
  if (weights.size() != base.vertices.size()) {
    throw Error(Errc::LengthMismatch, "one weight list per vertex required");
  }
  if (transforms.size() != rest_transforms.size()) {
    throw Error(Errc::LengthMismatch, "pose and rest transforms differ in count");
  }
  std::vector<Transform> skinning(transforms.size());
  for (std::size_t b = 0; b < transforms.size(); ++b) {
    skinning[b] = transforms[b] * rest_transforms[b].inverse();
  }
  Mesh out;
  out.vertices.reserve(base.vertices.size());
  for (std::size_t i = 0; i < base.vertices.size(); ++i) {
    double sum = 0;
    Vec3 v = Vec3::Zero();
    for (const auto& inf : weights[i]) {
      if (inf.bone >= skinning.size()) throw Error(Errc::InvalidArgument, "influence bone out of range");
      if (inf.weight < 0) throw Error(Errc::WeightSumError, "negative skin weight");
      sum += inf.weight;
      v += inf.weight * (skinning[inf.bone] * base.vertices[i]);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw Error(Errc::WeightSumError, fmt::format("vertex {} weights sum to {}", i, sum));
    }
    out.vertices.push_back(v);
  }
  return out;
}

namespace {

double lattice_gradient(std::uint64_t seed, std::int64_t i) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i)));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

std::uint64_t parameter_seed(std::uint64_t seed, std::size_t k) {
  return splitmix64(seed + 0x632BE59BD9B4E019ULL * (static_cast<std::uint64_t>(k) + 1));
}

}  // namespace

double perlin_1d(std::uint64_t seed, double t) {
  const double cell = std::floor(t);
  const auto i0 = static_cast<std::int64_t>(cell);
  const double f = t - cell;
  const double v0 = lattice_gradient(seed, i0) * f;
  const double v1 = lattice_gradient(seed, i0 + 1) * (f - 1.0);
  const double s = f * f * (3.0 - 2.0 * f);
  return v0 + s * (v1 - v0);
}

double smoothed_noise(std::uint64_t seed, std::size_t parameter, double t,
                      const SmoothingKernel& kernel) {
  const std::uint64_t ps = parameter_seed(seed, parameter);
  const double centre = (static_cast<double>(kernel.taps.size()) - 1.0) / 2.0;
  double acc = 0;
  for (std::size_t j = 0; j < kernel.taps.size(); ++j) {
    acc += kernel.taps[j] * perlin_1d(ps, t + (static_cast<double>(j) - centre) * kernel.step);
  }
  return acc;
}

PoseParams perturb_params(const PoseParams& params, std::uint64_t seed, double t,
                          double amplitude, const SmoothingKernel& kernel) {
  if (amplitude < 0) throw Error(Errc::InvalidArgument, "noise amplitude must be >= 0");
  PoseParams out = params;
  if (amplitude == 0) return out;
  std::size_t k = 0;
  for (auto& a : out.angles) a += amplitude * smoothed_noise(seed, k++, t, kernel);
  for (auto& w : out.weights) {
    w = std::clamp(w + amplitude * smoothed_noise(seed, k++, t, kernel), 0.0, 1.0);
  }
  return out;
}

PoseParams blend_poses(const PoseParams& a, const PoseParams& b, double t) {
  if (a.angles.size() != b.angles.size() || a.weights.size() != b.weights.size()) {
    throw Error(Errc::LayoutMismatch, "poses have different parameter layouts");
  }
  if (t <= 0) return a;
  if (t >= 1) return b;
  constexpr double pi = std::numbers::pi;
  PoseParams out;
  out.angles.resize(a.angles.size());
  out.weights.resize(a.weights.size());
  for (std::size_t i = 0; i < a.angles.size(); ++i) {
    double d = std::remainder(b.angles[i] - a.angles[i], 2 * pi);  // (-pi, pi]
    if (d == -pi) d = pi;
    double v = a.angles[i] + t * d;
    v = std::remainder(v, 2 * pi);
    if (v == -pi) v = pi;
    out.angles[i] = v;
  }
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    out.weights[i] = (1 - t) * a.weights[i] + t * b.weights[i];
  }
  return out;
}

void write_mesh_csv(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "vertex,x,y,z\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << fmt::format("{},{},{},{}\n", i, v.x(), v.y(), v.z());
  }
}

void write_pose_csv(const std::filesystem::path& path, const Skeleton& skel,
                    std::span<const double> angles) {
  const auto g = forward_kinematics(skel, angles);
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "bone,angle,x,y,z\n";
  for (std::size_t i = 0; i < skel.bones.size(); ++i) {
    const Vec3 o = g[i].translation();
    out << fmt::format("{},{},{},{},{}\n", skel.bones[i].name, angles[i], o.x(), o.y(), o.z());
  }
}

}  // namespace imime::anim
