#pragma once

namespace ictext {

/// True when the library was built with OpenMP.
bool parallel_enabled() noexcept;

/// Sets the worker count for the parallel kernels. Values < 1 restore the
/// OpenMP default. No-op without OpenMP.
void set_num_threads(int n) noexcept;
int max_threads() noexcept;

}  // namespace ictext
