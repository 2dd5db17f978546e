#pragma once

#include <cstddef>
#include <functional>

namespace softlearn {

/// Runs task(i) for i in [0, count) on up to `jobs` threads. Tasks must write
/// to disjoint state. The first exception (lowest task index) is rethrown
/// after all threads join.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task);

}  // namespace softlearn
