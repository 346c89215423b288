#pragma once

// Serial per-point Siren evaluation in plain loops. Kept as the oracle for the
// batched kernels and as the baseline in the benchmark.

#include "fluidrecon/siren.hpp"

#include <array>
#include <vector>

namespace fluidrecon::reference {

struct PointEval {
  std::vector<double> value;                    // out
  std::vector<std::array<double, 4>> jacobian;  // out rows of d/d(x,y,z,t)
};

PointEval evaluate(const SirenParams& params, const std::array<double, 4>& point);

/// Gradient of  sum_o gv[o]*value[o] + sum_{o,j} gj[o][j]*jacobian[o][j]  at one point.
ParamGradient backprop_point(const SirenParams& params, const std::array<double, 4>& point,
                             const std::vector<double>& g_value,
                             const std::vector<std::array<double, 4>>& g_jacobian);

}  // namespace fluidrecon::reference
