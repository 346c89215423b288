#pragma once

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/mesh.hpp"
#include "fluidrecon/random.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

namespace fluidrecon {

enum class SceneKind { TranslatingSphere, MergingSpheres, RotatingBox, Swirl };

/// Throws DomainError for an unknown name.
SceneKind scene_kind_from_string(const std::string& name);
std::string to_string(SceneKind kind);

/// Synthetic scene over t in [0, 1]; everything fits inside [-1, 1]^3.
struct SceneSpec {
  SceneKind kind = SceneKind::TranslatingSphere;
  int n_frames = 8;
  int points_per_frame = 5000;
  std::uint64_t seed = 0;

  // translating_sphere: radius, speed along +x, center starts at (-speed/2, 0, 0).
  // merging_spheres: radius, each center at (+-(separation - speed * t), 0, 0).
  // rotating_box: half_extents, angular_speed about z.
  // swirl: sphere of `radius` at (blob_offset, 0, 0) carried by
  //        v = angular_speed * exp(-(|x| / falloff)^2) * (-y, x, 0).
  double radius = 0.35;
  double speed = 0.7;
  double separation = 0.5;
  Vec3 half_extents = Vec3(0.5, 0.3, 0.2);
  double angular_speed = 1.5707963267948966;
  double falloff = 0.6;
  double blob_offset = 0.45;

  /// Defaults for each kind.
  static SceneSpec for_kind(SceneKind kind);
  void validate() const;
};

/// Analytic ground truth of a scene.
class SceneOracle {
 public:
  virtual ~SceneOracle() = default;
  /// Negative inside. For swirl this is the initial sphere's distance pulled
  /// back through the flow, an exactly transported level set rather than a
  /// true distance.
  virtual double sdf(const Vec3& x, double t) const = 0;
  virtual Vec3 velocity(const Vec3& x, double t) const = 0;
  /// Position at t1 of the material point that sits at x at time t0.
  virtual Vec3 transport(const Vec3& x, double t0, double t1) const = 0;
  /// n oriented samples of the surface at time t with area weights summing to
  /// the surface area.
  virtual OrientedPointCloud sample_surface(double t, int n, Rng& rng) const = 0;
};

std::shared_ptr<const SceneOracle> make_oracle(const SceneSpec& spec);

struct Scene {
  SceneSpec spec;
  FrameSequence frames;  // times i / (n_frames - 1)
  std::shared_ptr<const SceneOracle> oracle;
};

/// Frames are generated in parallel; frame i draws from make_rng({seed, i}).
Scene generate(const SceneSpec& spec);

/// Writes frame_XXX.ply files plus manifest.json (frame paths, times and the
/// spec) into `dir`. Returns the manifest path.
std::filesystem::path write_scene(const Scene& scene, const std::filesystem::path& dir);

/// Marching cubes of the oracle field at time t.
TriMesh oracle_mesh(const SceneOracle& oracle, double t, int resolution, const Aabb& box);

}  // namespace fluidrecon
