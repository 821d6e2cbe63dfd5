#pragma once

#include <cstddef>
#include <functional>

namespace bdflow {

/// Worker count for `jobs`: 0 means one per hardware thread.
std::size_t resolve_jobs(std::size_t jobs) noexcept;

/// Calls fn(i) for i in [0, count) on up to `jobs` threads. Tasks are handed
/// out in index order; the first exception stops further dispatch and is
/// rethrown after all workers have joined.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace bdflow
