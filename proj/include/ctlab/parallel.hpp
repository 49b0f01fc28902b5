#pragma once

#include <cstddef>
#include <functional>

namespace ctlab {

/// Worker count used by parallel_for. Zero selects hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(i) for every i in [0, n). Each index is visited exactly once,
/// so callers that write only slot i get scheduling-independent results.
/// The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ctlab
