// Serial reference kernels against the batched OpenMP ones.
// Range arguments: batch size, then thread count for the parallel variants.

#include "fluidrecon/geometry.hpp"
#include "fluidrecon/parallel.hpp"
#include "fluidrecon/random.hpp"
#include "fluidrecon/reference/siren_reference.hpp"
#include "fluidrecon/siren.hpp"

#include <benchmark/benchmark.h>

#include <array>
#include <numbers>

using namespace fluidrecon;

namespace {

Eigen::Matrix4Xd random_points(Eigen::Index n, std::uint64_t seed) {
  Rng rng = make_rng({seed});
  Eigen::Matrix4Xd pts(4, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int a = 0; a < 4; ++a) pts(a, i) = uniform(rng, -1.0, 1.0);
  return pts;
}

OrientedPointCloud sphere(int n) {
  Rng rng = make_rng({7});
  OrientedPointCloud c;
  c.points.resize(3, n);
  c.normals.resize(3, n);
  for (int i = 0; i < n; ++i) {
    const Vec3 d = Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng)).normalized();
    c.points.col(i) = d;
    c.normals.col(i) = d;
  }
  c.areas = Eigen::VectorXd::Constant(n, 4.0 * std::numbers::pi / n);
  return c;
}

const SirenParams& net() {
  static const SirenParams p = init_siren(3, 64, 4, 3, 30.0, 1);
  return p;
}

std::array<double, 4> as_array(const Eigen::Matrix4Xd& pts, Eigen::Index i) {
  return {pts(0, i), pts(1, i), pts(2, i), pts(3, i)};
}

void BM_JacobianReference(benchmark::State& state) {
  const Eigen::Matrix4Xd pts = random_points(state.range(0), 1);
  for (auto _ : state) {
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      benchmark::DoNotOptimize(reference::evaluate(net(), as_array(pts, i)));
    }
  }
  state.SetItemsProcessed(state.iterations() * pts.cols());
}

void BM_JacobianBatched(benchmark::State& state) {
  const Eigen::Matrix4Xd pts = random_points(state.range(0), 1);
  set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    parallel_chunks(pts.cols(), kDefaultChunk, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
      const SirenTape tape(net(), pts.middleCols(b, e - b), true);
      benchmark::DoNotOptimize(tape.jacobian().data());
    });
  }
  state.SetItemsProcessed(state.iterations() * pts.cols());
}

void BM_BackpropReference(benchmark::State& state) {
  const Eigen::Matrix4Xd pts = random_points(state.range(0), 2);
  const std::vector<double> gv{1.0, -0.5, 0.25};
  const std::vector<std::array<double, 4>> gj(3, {0.1, 0.2, 0.3, 0.4});
  for (auto _ : state) {
    ParamGradient total = ParamGradient::zeros_like(net());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const ParamGradient g = reference::backprop_point(net(), as_array(pts, i), gv, gj);
      for (std::size_t k = 0; k < g.layers.size(); ++k) {
        total.layers[k].weight += g.layers[k].weight;
        total.layers[k].bias += g.layers[k].bias;
      }
    }
    benchmark::DoNotOptimize(total.layers.back().bias.data());
  }
  state.SetItemsProcessed(state.iterations() * pts.cols());
}

void BM_BackpropBatched(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const Eigen::Matrix4Xd pts = random_points(n, 2);
  set_num_threads(static_cast<int>(state.range(1)));
  Upstream up;
  up.value = Eigen::MatrixXd(3, n);
  up.value.colwise() = Eigen::Vector3d(1.0, -0.5, 0.25);
  up.jacobian = Eigen::MatrixXd(3, 4 * n);
  for (int j = 0; j < 4; ++j) up.jacobian.middleCols(j * n, n).setConstant(0.1 * (j + 1));
  for (auto _ : state) {
    const ParamGradient g = backprop(net(), pts, up);
    benchmark::DoNotOptimize(g.layers.back().bias.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_WindingReference(benchmark::State& state) {
  const OrientedPointCloud cloud = sphere(10000);
  const Eigen::Matrix3Xd q = 1.5 * random_points(state.range(0), 3).topRows(3);
  for (auto _ : state) {
    for (Eigen::Index i = 0; i < q.cols(); ++i) benchmark::DoNotOptimize(winding_number(q.col(i), cloud));
  }
  state.SetItemsProcessed(state.iterations() * q.cols());
}

void BM_WindingParallel(benchmark::State& state) {
  const OrientedPointCloud cloud = sphere(10000);
  const SdfOracle oracle(cloud);
  const Eigen::Matrix3Xd q = 1.5 * random_points(state.range(0), 3).topRows(3);
  set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    const Eigen::VectorXd w = oracle.winding_numbers(q);
    benchmark::DoNotOptimize(w.data());
  }
  state.SetItemsProcessed(state.iterations() * q.cols());
}

void thread_sweep(benchmark::internal::Benchmark* b) {
  const int max = max_threads();
  for (int t = 1; t <= max; t *= 2) b->Args({4096, t});
  if ((max & (max - 1)) != 0) b->Args({4096, max});
}

}  // namespace

BENCHMARK(BM_JacobianReference)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_JacobianBatched)->Apply(thread_sweep)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BackpropReference)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackpropBatched)->Apply(thread_sweep)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_WindingReference)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WindingParallel)->Apply(thread_sweep)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
