#pragma once

#include <cstddef>
#include <functional>

namespace tcf {

/// Worker count: TCF_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous index ranges;
/// callers must only write state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t min_per_worker = 1);

}  // namespace tcf
