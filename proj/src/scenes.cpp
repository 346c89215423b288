#include "fluidrecon/scenes.hpp"

#include "fluidrecon/errors.hpp"
#include "fluidrecon/extraction.hpp"
#include "fluidrecon/io.hpp"
#include "fluidrecon/parallel.hpp"

#include "json.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace fluidrecon {

namespace {

constexpr double kPi = std::numbers::pi;

struct KindName {
  SceneKind kind;
  const char* name;
};
constexpr KindName kKindNames[] = {
    {SceneKind::TranslatingSphere, "translating_sphere"},
    {SceneKind::MergingSpheres, "merging_spheres"},
    {SceneKind::RotatingBox, "rotating_box"},
    {SceneKind::Swirl, "swirl"},
};

Vec3 random_direction(Rng& rng) {
  Vec3 d;
  do {
    d = Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
  } while (d.squaredNorm() < 1e-24);
  return d.normalized();
}

Eigen::Matrix3d rotation_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

OrientedPointCloud allocate_cloud(int n) {
  OrientedPointCloud c;
  c.points.resize(3, n);
  c.normals.resize(3, n);
  c.areas.resize(n);
  return c;
}

class TranslatingSphere final : public SceneOracle {
 public:
  explicit TranslatingSphere(const SceneSpec& s) : r_(s.radius), c_(s.speed, 0.0, 0.0) {}
  Vec3 center(double t) const { return Vec3(-0.5 * c_(0), 0.0, 0.0) + t * c_; }
  double sdf(const Vec3& x, double t) const override { return (x - center(t)).norm() - r_; }
  Vec3 velocity(const Vec3&, double) const override { return c_; }
  Vec3 transport(const Vec3& x, double t0, double t1) const override { return x + (t1 - t0) * c_; }
  OrientedPointCloud sample_surface(double t, int n, Rng& rng) const override {
    OrientedPointCloud cloud = allocate_cloud(n);
    for (int i = 0; i < n; ++i) {
      const Vec3 d = random_direction(rng);
      cloud.points.col(i) = center(t) + r_ * d;
      cloud.normals.col(i) = d;
    }
    cloud.areas.setConstant(4.0 * kPi * r_ * r_ / n);
    return cloud;
  }

 private:
  double r_;
  Vec3 c_;
};

class MergingSpheres final : public SceneOracle {
 public:
  explicit MergingSpheres(const SceneSpec& s) : r_(s.radius), s0_(s.separation), speed_(s.speed) {}
  double half_gap(double t) const { return s0_ - speed_ * t; }
  Vec3 center(int side, double t) const { return Vec3(side * half_gap(t), 0.0, 0.0); }
  double sphere_sdf(int side, const Vec3& x, double t) const { return (x - center(side, t)).norm() - r_; }
  double sdf(const Vec3& x, double t) const override {
    return std::min(sphere_sdf(-1, x, t), sphere_sdf(1, x, t));
  }
  // Each half-space follows its own sphere.
  Vec3 velocity(const Vec3& x, double) const override {
    return Vec3(x(0) < 0.0 ? speed_ : -speed_, 0.0, 0.0);
  }
  Vec3 transport(const Vec3& x, double t0, double t1) const override {
    return x + (t1 - t0) * velocity(x, t0);
  }
  OrientedPointCloud sample_surface(double t, int n, Rng& rng) const override {
    OrientedPointCloud cloud = allocate_cloud(n);
    const double s = half_gap(t);
    // Each sphere loses a cap of height r - s once they overlap.
    const double cap = s < r_ ? 2.0 * kPi * r_ * (r_ - s) : 0.0;
    const double visible = 2.0 * (4.0 * kPi * r_ * r_ - cap);
    int i = 0;
    while (i < n) {
      const int side = uniform01(rng) < 0.5 ? -1 : 1;
      const Vec3 d = random_direction(rng);
      const Vec3 p = center(side, t) + r_ * d;
      if (sphere_sdf(-side, p, t) <= 0.0) continue;
      cloud.points.col(i) = p;
      cloud.normals.col(i) = d;
      ++i;
    }
    cloud.areas.setConstant(visible / n);
    return cloud;
  }

 private:
  double r_, s0_, speed_;
};

class RotatingBox final : public SceneOracle {
 public:
  explicit RotatingBox(const SceneSpec& s) : b_(s.half_extents), w_(s.angular_speed) {}
  double sdf(const Vec3& x, double t) const override {
    const Vec3 q = (rotation_z(-w_ * t) * x).cwiseAbs() - b_;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
  Vec3 velocity(const Vec3& x, double) const override { return w_ * Vec3(-x(1), x(0), 0.0); }
  Vec3 transport(const Vec3& x, double t0, double t1) const override {
    return rotation_z(w_ * (t1 - t0)) * x;
  }
  OrientedPointCloud sample_surface(double t, int n, Rng& rng) const override {
    OrientedPointCloud cloud = allocate_cloud(n);
    const Eigen::Matrix3d rot = rotation_z(w_ * t);
    // Face pair along axis a has area 4 * b_u * b_v each.
    double face_area[3];
    for (int a = 0; a < 3; ++a) face_area[a] = 4.0 * b_((a + 1) % 3) * b_((a + 2) % 3);
    const double total = 2.0 * (face_area[0] + face_area[1] + face_area[2]);
    for (int i = 0; i < n; ++i) {
      double u = uniform01(rng) * total;
      int face = 0;
      while (face < 5 && u >= face_area[face / 2]) u -= face_area[face / 2], ++face;
      const int axis = face / 2;
      const double sign = face % 2 == 0 ? -1.0 : 1.0;
      Vec3 p, nrm = Vec3::Zero();
      p(axis) = sign * b_(axis);
      nrm(axis) = sign;
      for (int k = 1; k <= 2; ++k) {
        const int other = (axis + k) % 3;
        p(other) = uniform(rng, -b_(other), b_(other));
      }
      cloud.points.col(i) = rot * p;
      cloud.normals.col(i) = rot * nrm;
    }
    cloud.areas.setConstant(total / n);
    return cloud;
  }

 private:
  Vec3 b_;
  double w_;
};

// Rotation about z by an angle that depends only on |x|, which the rotation
// preserves; the flow map is therefore R(w s(|x|) t) x and volume preserving.
class Swirl final : public SceneOracle {
 public:
  explicit Swirl(const SceneSpec& s)
      : r0_(s.radius), c0_(s.blob_offset, 0.0, 0.0), w_(s.angular_speed), falloff_(s.falloff) {}
  double falloff(double r) const { return std::exp(-(r / falloff_) * (r / falloff_)); }
  Vec3 flow(const Vec3& x, double dt) const { return rotation_z(w_ * falloff(x.norm()) * dt) * x; }
  double sdf(const Vec3& x, double t) const override { return (flow(x, -t) - c0_).norm() - r0_; }
  Vec3 velocity(const Vec3& x, double) const override {
    return w_ * falloff(x.norm()) * Vec3(-x(1), x(0), 0.0);
  }
  Vec3 transport(const Vec3& x, double t0, double t1) const override { return flow(x, t1 - t0); }
  OrientedPointCloud sample_surface(double t, int n, Rng& rng) const override {
    OrientedPointCloud cloud = allocate_cloud(n);
    const double base_area = 4.0 * kPi * r0_ * r0_ / n;
    for (int i = 0; i < n; ++i) {
      const Vec3 normal0 = random_direction(rng);
      const Vec3 p = c0_ + r0_ * normal0;
      // F = R + (dR/dtheta p) grad(theta)^T with theta = w t s(|p|).
      const double theta = w_ * falloff(p.norm()) * t;
      const Eigen::Matrix3d rot = rotation_z(theta);
      const Vec3 x = rot * p;
      const Vec3 grad_theta = w_ * t * falloff(p.norm()) * (-2.0 / (falloff_ * falloff_)) * p;
      const Eigen::Matrix3d jac = rot + Vec3(-x(1), x(0), 0.0) * grad_theta.transpose();
      // det F = 1, so the area element scales by |F^-T N|.
      const Vec3 mapped = jac.inverse().transpose() * normal0;
      cloud.points.col(i) = x;
      cloud.normals.col(i) = mapped.normalized();
      cloud.areas(i) = base_area * mapped.norm();
    }
    return cloud;
  }

 private:
  double r0_;
  Vec3 c0_;
  double w_, falloff_;
};

}  // namespace

SceneKind scene_kind_from_string(const std::string& name) {
  for (const auto& k : kKindNames) {
    if (name == k.name) return k.kind;
  }
  throw DomainError("unknown scene kind '" + name + "'");
}

std::string to_string(SceneKind kind) {
  for (const auto& k : kKindNames) {
    if (kind == k.kind) return k.name;
  }
  throw DomainError("unknown scene kind");
}

SceneSpec SceneSpec::for_kind(SceneKind kind) {
  SceneSpec s;
  s.kind = kind;
  switch (kind) {
    case SceneKind::TranslatingSphere:
      break;
    case SceneKind::MergingSpheres:
      s.radius = 0.3;
      s.separation = 0.5;
      s.speed = 0.3;
      break;
    case SceneKind::RotatingBox:
      break;
    case SceneKind::Swirl:
      s.radius = 0.25;
      s.angular_speed = kPi;
      break;
  }
  return s;
}

void SceneSpec::validate() const {
  if (n_frames < 2) throw DomainError("scene needs at least 2 frames");
  if (points_per_frame < 100) throw DomainError("scene needs at least 100 points per frame");
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string("scene ") + what + " must be positive");
  };
  switch (kind) {
    case SceneKind::TranslatingSphere:
      positive(radius, "radius");
      if (!std::isfinite(speed)) throw DomainError("scene speed must be finite");
      break;
    case SceneKind::MergingSpheres:
      positive(radius, "radius");
      positive(separation - speed, "final half separation");
      if (!std::isfinite(speed)) throw DomainError("scene speed must be finite");
      break;
    case SceneKind::RotatingBox:
      positive(half_extents.minCoeff(), "box half extent");
      if (!std::isfinite(angular_speed)) throw DomainError("scene angular speed must be finite");
      break;
    case SceneKind::Swirl:
      positive(radius, "radius");
      positive(falloff, "falloff");
      if (!std::isfinite(angular_speed)) throw DomainError("scene angular speed must be finite");
      break;
  }
}

std::shared_ptr<const SceneOracle> make_oracle(const SceneSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case SceneKind::TranslatingSphere:
      return std::make_shared<TranslatingSphere>(spec);
    case SceneKind::MergingSpheres:
      return std::make_shared<MergingSpheres>(spec);
    case SceneKind::RotatingBox:
      return std::make_shared<RotatingBox>(spec);
    case SceneKind::Swirl:
      return std::make_shared<Swirl>(spec);
  }
  throw DomainError("unknown scene kind");
}

Scene generate(const SceneSpec& spec) {
  Scene scene{spec, {}, make_oracle(spec)};
  std::vector<OrientedPointCloud> frames(static_cast<std::size_t>(spec.n_frames));
  std::vector<double> times(frames.size());
  for (int i = 0; i < spec.n_frames; ++i) times[i] = linear_time(i, spec.n_frames);
  parallel_for(spec.n_frames, [&](std::ptrdiff_t i) {
    Rng rng = make_rng({spec.seed, static_cast<std::uint64_t>(i)});
    frames[i] = scene.oracle->sample_surface(times[i], spec.points_per_frame, rng);
  });
  scene.frames = make_sequence(std::move(frames), std::move(times));
  return scene;
}

std::filesystem::path write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const SceneSpec& s = scene.spec;
  nlohmann::json doc;
  doc["spec"] = {{"kind", to_string(s.kind)},
                 {"n_frames", s.n_frames},
                 {"points_per_frame", s.points_per_frame},
                 {"seed", s.seed},
                 {"radius", s.radius},
                 {"speed", s.speed},
                 {"separation", s.separation},
                 {"half_extents", {s.half_extents(0), s.half_extents(1), s.half_extents(2)}},
                 {"angular_speed", s.angular_speed},
                 {"falloff", s.falloff},
                 {"blob_offset", s.blob_offset}};
  doc["frames"] = nlohmann::json::array();
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.ply", i);
    write_oriented_cloud(scene.frames.frames[i], dir / name);
    doc["frames"].push_back({{"path", name}, {"time", scene.frames.times[i]}});
  }
  const auto manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + manifest.string());
  return manifest;
}

TriMesh oracle_mesh(const SceneOracle& oracle, double t, int resolution, const Aabb& box) {
  return marching_cubes(sample_grid([&](const Vec3& x) { return oracle.sdf(x, t); }, resolution, box));
}

}  // namespace fluidrecon
