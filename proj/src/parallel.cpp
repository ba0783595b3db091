#include "dan/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace dan {

namespace {

std::size_t default_threads() {
    std::size_t n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("DAN_THREADS")) {
        long v = std::atol(env);
        if (v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    }
    return n;
}

std::size_t g_override = 0;

}  // namespace

std::size_t thread_count() {
    if (g_override) return g_override;
    static const std::size_t n = default_threads();
    return n;
}

void set_thread_count(std::size_t n) { g_override = n; }

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (begin >= end) return;
    const std::size_t n = end - begin;
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        fn(begin, end);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        std::size_t lo = begin + w * chunk;
        std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    fn(begin, std::min(end, begin + chunk));
    for (auto& t : pool) t.join();
}

void parallel_for_weighted(std::size_t begin, std::size_t end,
                           const std::function<double(std::size_t)>& cost,
                           const std::function<void(std::size_t, std::size_t)>& fn) {
    if (begin >= end) return;
    const std::size_t workers = std::min(thread_count(), end - begin);
    if (workers <= 1) {
        fn(begin, end);
        return;
    }
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) total += cost(i);
    // Cut points at equal cumulative cost.
    std::vector<std::size_t> cuts{begin};
    double acc = 0.0;
    std::size_t next = 1;
    for (std::size_t i = begin; i < end && next < workers; ++i) {
        acc += cost(i);
        if (acc >= total * static_cast<double>(next) / static_cast<double>(workers)) {
            cuts.push_back(i + 1);
            ++next;
        }
    }
    cuts.push_back(end);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w + 1 < cuts.size(); ++w) {
        std::size_t lo = cuts[w], hi = cuts[w + 1];
        if (lo < hi) pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    if (cuts[0] < cuts[1]) fn(cuts[0], cuts[1]);
    for (auto& t : pool) t.join();
}

}  // namespace dan
