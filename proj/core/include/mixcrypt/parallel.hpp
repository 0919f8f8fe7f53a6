// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace mixcrypt {

/// Worker count: MIXCRYPT_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t thread_budget();

/// Calls fn(i) for every i in [0, n) on up to `threads` workers. Indices are
/// split into contiguous blocks; fn must only write state owned by index i.
/// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t threads = thread_budget());

}  // namespace mixcrypt
