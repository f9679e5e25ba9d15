#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace scexp {

inline int default_workers() {
    if (const char* env = std::getenv("SCEXP_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Deterministic chunked parallel loop: f(i) must only touch slot i of its
// output. Chunk boundaries depend on (n, workers) alone, never on timing.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
    if (workers <= 0) workers = default_workers();
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t lo = n * t / w, hi = n * (t + 1) / w;
        pool.emplace_back([lo, hi, &f] {
            for (std::size_t i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace scexp
