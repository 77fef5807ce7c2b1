#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hmmlab {

// Execution policy for replicate loops. threads == 1 selects the plain
// serial loop that is kept as the reference implementation; threads == 0
// lets OpenMP pick the hardware default. Loop bodies write to disjoint
// slots and every replicate owns its RNG stream, so results are identical
// across modes and thread counts.
struct Exec {
  int threads = 0;

  static Exec serial() { return Exec{1}; }
  static Exec parallel(int threads = 0) { return Exec{threads}; }
};

template <class F>
void parallel_for(std::size_t count, const Exec& exec, F&& body) {
  if (exec.threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
#ifdef _OPENMP
  std::exception_ptr error;
  std::mutex error_mutex;
  const int nt = exec.threads > 0 ? exec.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      // exceptions must not unwind through the OpenMP region
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
#else
  for (std::size_t i = 0; i < count; ++i) body(i);
#endif
}

}  // namespace hmmlab
