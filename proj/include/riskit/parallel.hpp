// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace riskit {

// Worker count: RISKIT_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

// Runs fn(i) for i in [0, n). Results must be written to per-index slots by the
// caller so that output order never depends on scheduling. The first exception
// thrown by any worker is rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace riskit
