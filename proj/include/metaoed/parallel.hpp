#pragma once

#include <cstddef>
#include <functional>

namespace metaoed {

// Worker count from META_OED_THREADS; 0 or unset means std::thread::hardware_concurrency().
std::size_t worker_count();

// Runs body(i) for i in [0, n). Each index is processed exactly once; callers write results
// into index-addressed slots so output is independent of scheduling. The first exception
// thrown by any worker is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t workers = 0);

}  // namespace metaoed
