// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace talm {

/// Worker count for a request of `requested` jobs (0 = hardware concurrency),
/// capped by `limit` and at least 1.
[[nodiscard]] std::size_t effective_jobs(std::size_t requested, std::size_t limit);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. If any call throws,
/// remaining work is abandoned and the exception from the smallest index that
/// failed is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace talm
