#pragma once

#include <tbb/blocked_range.h>
#include <tbb/info.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <cstddef>

namespace panosplat {

/// Runs body(i) for i in [0, n). Iterations must be independent. `workers` > 0 bounds the
/// thread count for this call; 0 uses the ambient scheduler.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body, std::size_t grain = 1) {
    if (n == 0) return;
    auto run = [&] {
        tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, grain),
                          [&](const tbb::blocked_range<std::size_t>& r) {
                              for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
                          });
    };
    // Asking for more threads than the machine has only triggers scheduler warnings.
    workers = std::min(workers, tbb::info::default_concurrency());
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
    } else if (workers > 1) {
        tbb::task_arena arena(workers);
        arena.execute(run);
    } else {
        run();
    }
}

} // namespace panosplat
