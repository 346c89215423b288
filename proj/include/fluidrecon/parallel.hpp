#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace fluidrecon {

/// Number of OpenMP threads used by the kernels.
int max_threads();
void set_num_threads(int n);

/// Fixed-size chunking independent of the thread count, so reductions over
/// per-chunk partial results are bit-reproducible.
inline constexpr std::ptrdiff_t kDefaultChunk = 256;

inline std::ptrdiff_t chunk_count(std::ptrdiff_t n, std::ptrdiff_t chunk = kDefaultChunk) {
  return (n + chunk - 1) / chunk;
}

/// Calls fn(chunk_index, begin, end) for every chunk of [0, n), in parallel.
template <typename Fn>
void parallel_chunks(std::ptrdiff_t n, std::ptrdiff_t chunk, Fn&& fn) {
  const std::ptrdiff_t chunks = chunk_count(n, chunk);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::ptrdiff_t begin = c * chunk;
    fn(c, begin, std::min(n, begin + chunk));
  }
}

/// Calls fn(i) for every i in [0, n), in parallel.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

}  // namespace fluidrecon
