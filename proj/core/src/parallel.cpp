#include "fbdual/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace fbdual {

namespace {
std::atomic<int> g_max_threads{0};

int effective_threads() {
    int n = g_max_threads.load();
    if (n <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        n = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return n;
}

// Fixed chunking: independent of the number of worker threads so that any
// chunk-ordered reduction is reproducible.
constexpr std::size_t kMinChunk = 1024;

std::size_t chunk_size_for(std::size_t n) {
    std::size_t target_chunks = 64;
    std::size_t size = (n + target_chunks - 1) / target_chunks;
    return std::max(size, kMinChunk);
}
} // namespace

void set_max_threads(int n) { g_max_threads.store(n); }
int max_threads() { return effective_threads(); }

void parallel_for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t chunk = chunk_size_for(n);
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    const int threads = std::min<std::size_t>(effective_threads(), n_chunks);

    if (threads <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (int i = 0; i < threads - 1; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    parallel_for_chunks(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

void parallel_for_tasks(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const int threads = std::min<std::size_t>(effective_threads(), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (int i = 0; i < threads - 1; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

double parallel_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& chunk_sum) {
    if (n == 0) return 0.0;
    const std::size_t chunk = chunk_size_for(n);
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<double> partials(n_chunks, 0.0);
    parallel_for_chunks(n, [&](std::size_t b, std::size_t e) {
        partials[b / chunk] = chunk_sum(b, e);
    });
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
}

} // namespace fbdual
