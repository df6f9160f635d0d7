#pragma once

#include <cstddef>
#include <functional>

namespace lumisplat {

/// Worker count: hardware concurrency, capped by LUMISPLAT_THREADS when set.
std::size_t threadCount();

/// Runs body(i) for i in [begin, end). Each index must write only its own
/// outputs; results are then independent of the thread count.
void parallelFor(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body);

}  // namespace lumisplat
