#include "partfuse/numerics/allocator.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace partfuse {

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  mallopt(M_TOP_PAD, 64 * 1024 * 1024);
#endif
}

}  // namespace partfuse
