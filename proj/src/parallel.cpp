#include "ictext/parallel.hpp"

#ifdef ICTEXT_HAVE_OPENMP
#include <omp.h>
#endif

namespace ictext {

#ifdef ICTEXT_HAVE_OPENMP

namespace {
int g_default_threads = omp_get_max_threads();
}

bool parallel_enabled() noexcept { return true; }

void set_num_threads(int n) noexcept { omp_set_num_threads(n >= 1 ? n : g_default_threads); }

int max_threads() noexcept { return omp_get_max_threads(); }

#else

bool parallel_enabled() noexcept { return false; }
void set_num_threads(int) noexcept {}
int max_threads() noexcept { return 1; }

#endif

}  // namespace ictext
