#pragma once

#include <cstddef>
#include <functional>

namespace hierfdr {

/// Number of worker threads to use when the caller passes 0.
std::size_t default_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// visited exactly once; results must be written to per-index slots so the
/// output does not depend on scheduling. The first exception thrown by any
/// body is rethrown after all workers have joined.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace hierfdr
