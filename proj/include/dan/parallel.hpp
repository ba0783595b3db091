#pragma once

#include <cstddef>
#include <functional>

namespace dan {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// count, capped by the DAN_THREADS environment variable when set.
std::size_t thread_count();

/// Override the worker count (0 restores the default). Used by determinism tests.
void set_thread_count(std::size_t n);

/// Static range split: fn(begin, end) runs on each of at most thread_count()
/// contiguous chunks of [begin, end). Chunk boundaries depend only on the range
/// and worker count, and every index is owned by exactly one chunk, so callers
/// writing disjoint outputs get run-to-run identical results.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn);

/// As parallel_for, but splits [0, total_work) by per-index cost weights given
/// through `cost(i)`; used to balance triangular updates.
void parallel_for_weighted(std::size_t begin, std::size_t end,
                           const std::function<double(std::size_t)>& cost,
                           const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace dan
