#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace ictext::detail {

// Runs body(i) for i in [0, n) across OpenMP threads. Exceptions cannot
// cross the parallel region, so they are captured per index and the one
// with the lowest index is rethrown, matching what a serial loop would report.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace ictext::detail
