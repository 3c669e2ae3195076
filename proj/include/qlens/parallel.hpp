#ifndef QLENS_PARALLEL_HPP
#define QLENS_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace qlens {

/// Worker count: QLENS_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write results into per-index slots so output is independent of threading.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace qlens

#endif  // QLENS_PARALLEL_HPP
