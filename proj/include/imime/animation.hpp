#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Geometry>

namespace imime::anim {

using Vec3 = Eigen::Vector3d;
using Transform = Eigen::Isometry3d;

struct Mesh {
  std::vector<Vec3> vertices;
};

struct MorphTarget {
  std::string label;
  std::vector<Vec3> deltas;  // one per base vertex
};

// v_i = base_i + sum_j w_j * delta_{j,i}
Mesh blend_morphs(const Mesh& base, std::span<const MorphTarget> targets,
                  std::span<const double> weights);

// Low-poly face mesh and its 42 expression primitives.
struct MorphLibrary {
  Mesh base;
  std::vector<MorphTarget> targets;

  [[nodiscard]] std::optional<std::size_t> find(std::string_view label) const;
};
MorphLibrary standard_morph_library();

// Canonical morph weights used to mirror a recognised viewer expression.
std::map<std::string, double> expression_weights(std::string_view expression);

struct Bone {
  std::string name;
  int parent = -1;                      // -1 for the root
  Vec3 rest_offset = Vec3::Zero();      // from the parent's origin, in parent space
  double length = 0;
  Vec3 axis = Vec3::UnitZ();            // rotation axis
};

// Bones in topological order: parent index < child index, exactly one root.
struct Skeleton {
  std::vector<Bone> bones;

  void validate() const;
  [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;
};

// Planar upper-body rig used by the character.
Skeleton standard_skeleton();

std::vector<Transform> forward_kinematics(const Skeleton& skel, std::span<const double> angles);
// Tip of bone b: global(b) applied to (length, 0, 0).
Vec3 bone_tip(const Skeleton& skel, const std::vector<Transform>& globals, std::size_t bone);

struct Influence {
  std::size_t bone = 0;
  double weight = 0;
};
using SkinWeights = std::vector<std::vector<Influence>>;  // per vertex

// Linear blend skinning: v' = sum_b w_b (T_b * T_rest_b^-1) v
Mesh skin(const Mesh& base, std::span<const Transform> transforms, const SkinWeights& weights,
          std::span<const Transform> rest_transforms);

// Classic 1-D gradient noise in [-1, 1], zero on integer lattice points.
double perlin_1d(std::uint64_t seed, double t);

struct PoseParams {
  std::vector<double> angles;   // radians, one per bone
  std::vector<double> weights;  // morph weights in [0, 1]

  friend bool operator==(const PoseParams&, const PoseParams&) = default;
};

struct SmoothingKernel {
  std::vector<double> taps{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  double step = 0.1;  // seconds between taps
};

// p_k += amplitude * (kernel * n_k)(t), n_k = perlin_1d with a per-parameter seed.
PoseParams perturb_params(const PoseParams& params, std::uint64_t seed, double t,
                          double amplitude, const SmoothingKernel& kernel = {});

// The smoothed noise stream for parameter k, as added by perturb_params.
double smoothed_noise(std::uint64_t seed, std::size_t parameter, double t,
                      const SmoothingKernel& kernel = {});

// Shortest-arc interpolation of angles, linear interpolation of weights.
PoseParams blend_poses(const PoseParams& a, const PoseParams& b, double t);

// CSV dumps: "vertex,x,y,z" and "bone,angle,x,y,z" (bone origin in world space).
void write_mesh_csv(const std::filesystem::path& path, const Mesh& mesh);
void write_pose_csv(const std::filesystem::path& path, const Skeleton& skel,
                    std::span<const double> angles);

}  // namespace imime::anim
