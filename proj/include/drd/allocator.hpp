#pragma once

#include <malloc.h>

namespace drd {

// Training allocates and frees many short-lived multi-megabyte buffers;
// glibc's default would mmap/munmap each of them and trim the heap after
// every free. Keep them on the heap instead.
inline void tune_allocator() {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
}

}  // namespace drd
