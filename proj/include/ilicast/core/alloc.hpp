#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ilicast {

/// Keeps large training buffers on the heap instead of fresh mmap pages.
/// Each minibatch allocates and frees the same megabyte-sized matrices;
/// glibc's defaults return them to the kernel every time, and the resulting
/// page faults roughly double LSTM training time. Call once from main.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

} // namespace ilicast
