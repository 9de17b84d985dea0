#pragma once

#include <cstddef>
#include <functional>

namespace denoiserank {

// Runs body(i) for i in [0, n) on up to `workers` threads (0 picks the
// hardware concurrency). The first exception thrown by any call is rethrown
// after all threads finish; remaining indices are skipped once one fails.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace denoiserank
