#pragma once

#include <cstddef>
#include <functional>

namespace dgpg {

// Runs fn(i) for every i in [0, n) on up to `threads` workers. Work is handed
// out by index, so results written to per-index slots do not depend on the
// thread count. The first exception thrown by any call is rethrown here.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace dgpg
