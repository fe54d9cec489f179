#pragma once

#include <cstddef>
#include <functional>

namespace sbbts {

/// Process-wide worker count used by the parallel library paths.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(chunk) for chunk in [0, n_chunks). Chunks are independent, so
/// callers that partition work into a fixed number of chunks get the same
/// result for every thread count.
void parallel_for(std::size_t n_chunks, const std::function<void(std::size_t)>& body);

}  // namespace sbbts
