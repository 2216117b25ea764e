#ifndef NSLET_PARALLEL_HPP
#define NSLET_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

// Deterministic work sharing. Ranges are cut into fixed-size chunks and every
// chunk writes its partial result into a slot indexed by chunk id; partials
// are then combined in slot order. The combination tree therefore depends
// only on the range and chunk size, never on the worker count or scheduling,
// so results are bit-identical for 1 and N threads.

namespace nslet {

inline int worker_count() {
    if (const char* env = std::getenv("NSLET_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// body(begin, end) is called for disjoint chunks covering [0, n).
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk, const Body& body) {
    if (n == 0) return;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    const int workers = std::min<std::size_t>(worker_count(), nchunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) body(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            body(c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

template <class Body>
void parallel_for(std::size_t n, const Body& body) {
    parallel_chunks(n, 1024, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) body(i);
    });
}

// Pairwise reduction over a fixed chunk grid. term(i) must be pure.
// Acc needs operator+=; partials are folded pairwise in index order, which
// both bounds rounding error and keeps the reduction tree fixed.
template <class Acc, class Term>
Acc parallel_reduce(std::size_t n, Acc zero, const Term& term) {
    constexpr std::size_t chunk = 1024;
    if (n == 0) return zero;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    std::vector<Acc> partial(nchunks, zero);
    parallel_chunks(n, chunk, [&](std::size_t b, std::size_t e) {
        Acc acc = zero;
        for (std::size_t i = b; i < e; ++i) acc += term(i);
        partial[b / chunk] = acc;
    });
    // pairwise fold, stable order
    std::vector<Acc> level = std::move(partial);
    while (level.size() > 1) {
        std::vector<Acc> up;
        up.reserve((level.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
            Acc a = level[i];
            a += level[i + 1];
            up.push_back(a);
        }
        if (level.size() % 2) up.push_back(level.back());
        level = std::move(up);
    }
    return level[0];
}

} // namespace nslet

#endif
