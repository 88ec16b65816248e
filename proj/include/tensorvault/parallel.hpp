// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace tv {

unsigned resolve_threads(unsigned requested);

// Runs fn(0..n-1) across `threads` workers. Work item i always owns result
// slot i, so aggregation order (and therefore output) is run-to-run
// identical regardless of thread count. The first exception thrown by any
// worker is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

} // namespace tv
