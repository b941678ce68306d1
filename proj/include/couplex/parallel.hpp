#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace couplex {

/// Worker count: an explicit positive request wins, then COUPLEX_WORKERS,
/// then 1.
unsigned resolve_workers(int requested);

/// Calls fn(i) for i in [0, n), split into contiguous chunks over `workers`
/// threads. If any call throws, the exception from the lowest failing index
/// is rethrown, independent of the worker count.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(n, w * chunk);
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Pairwise (tree) summation in index order.
double pairwise_sum(std::span<const double> xs) noexcept;

/// Reduces leaves over fixed-size blocks of [0, n): leaf(lo, hi) builds the
/// block accumulator, merge(a, b) combines them along a pairwise tree in
/// block order. Blocks are computed in parallel; the result does not depend
/// on the worker count.
template <class Acc, class Leaf, class Merge>
Acc tree_reduce(std::size_t n, std::size_t block, unsigned workers, Leaf&& leaf, Merge&& merge) {
    const std::size_t nblocks = std::max<std::size_t>(1, (n + block - 1) / block);
    std::vector<Acc> parts(nblocks);
    parallel_for(nblocks, workers, [&](std::size_t b) {
        parts[b] = leaf(std::min(n, b * block), std::min(n, (b + 1) * block));
    });
    for (std::size_t width = 1; width < nblocks; width *= 2)
        for (std::size_t i = 0; i + width < nblocks; i += 2 * width) merge(parts[i], parts[i + width]);
    return std::move(parts[0]);
}

}  // namespace couplex
