#pragma once

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/random.hpp"
#include "fluidrecon/siren.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

using fluidrecon::ParamGradient;
using fluidrecon::SirenParams;

inline std::vector<double*> parameter_slots(SirenParams& p) {
  std::vector<double*> out;
  for (auto& layer : p.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) out.push_back(layer.weight.data() + i);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out.push_back(layer.bias.data() + i);
  }
  return out;
}

inline std::vector<double> flatten(const ParamGradient& g) {
  std::vector<double> out;
  for (const auto& layer : g.layers) {
    out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return out;
}

/// Central differences of a scalar function of the parameters, one entry per parameter.
inline std::vector<double> finite_difference_gradient(SirenParams params,
                                                      const std::function<double(const SirenParams&)>& loss,
                                                      double h) {
  std::vector<double> out;
  for (double* slot : parameter_slots(params)) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = loss(params);
    *slot = saved - h;
    const double down = loss(params);
    *slot = saved;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

/// max_i |a_i - b_i| / max_i |b_i|.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

inline Eigen::Matrix4Xd random_points4(int n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  fluidrecon::Rng rng = fluidrecon::make_rng({seed});
  Eigen::Matrix4Xd pts(4, n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 4; ++a) pts(a, i) = fluidrecon::uniform(rng, lo, hi);
  return pts;
}

inline Eigen::Matrix3Xd random_points3(int n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return random_points4(n, seed, lo, hi).topRows(3);
}

/// n uniform samples of a sphere with normals and equal areas summing to 4 pi r^2.
inline fluidrecon::OrientedPointCloud sphere_cloud(int n, double radius, std::uint64_t seed,
                                                   const fluidrecon::Vec3& center = fluidrecon::Vec3::Zero()) {
  fluidrecon::Rng rng = fluidrecon::make_rng({seed});
  fluidrecon::OrientedPointCloud c;
  c.points.resize(3, n);
  c.normals.resize(3, n);
  for (int i = 0; i < n; ++i) {
    fluidrecon::Vec3 d(fluidrecon::standard_normal(rng), fluidrecon::standard_normal(rng),
                       fluidrecon::standard_normal(rng));
    d.normalize();
    c.normals.col(i) = d;
    c.points.col(i) = center + radius * d;
  }
  c.areas = Eigen::VectorXd::Constant(n, 4.0 * 3.14159265358979323846 * radius * radius / n);
  return c;
}

}  // namespace testutil
