#pragma once

#include <algorithm>
#include <exception>
#include <string>
#include <vector>

#include "ldpnn/mc.hpp"

namespace ldpnn {

/// Outcome of one grid point; `error` is set when the solver threw.
template <class R>
struct SweepPoint {
  R result{};
  std::string error;
};

/// Evaluates solve(point, warm) over consecutive chunks of chunk_size points. Each chunk starts
/// cold and warm-starts its later points from the previous result, so the output depends only on
/// the chunking, never on the thread count. The serial path runs the same chunks in order.
template <class R, class Solve>
std::vector<SweepPoint<R>> chunked_sweep(const std::vector<double>& points, int chunk_size, Execution exec,
                                         Solve solve) {
  const int n = static_cast<int>(points.size());
  const int chunk = std::max(1, chunk_size);
  const int n_chunks = (n + chunk - 1) / chunk;
  std::vector<SweepPoint<R>> out(n);
  auto run_chunk = [&](int c) {
    const R* prev = nullptr;
    for (int i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
      try {
        out[i].result = solve(points[i], prev);
        prev = &out[i].result;
      } catch (const std::exception& e) {
        out[i].error = e.what();
        prev = nullptr;
      }
    }
  };
  if (exec == Execution::serial) {
    for (int c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (int c = 0; c < n_chunks; ++c) run_chunk(c);
  }
  return out;
}

template <class R, class Solve>
std::vector<SweepPoint<R>> serial_sweep(const std::vector<double>& points, int chunk_size, Solve solve) {
  return chunked_sweep<R>(points, chunk_size, Execution::serial, solve);
}

}  // namespace ldpnn
