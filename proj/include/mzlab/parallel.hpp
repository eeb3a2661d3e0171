#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

// Deterministic block-parallel execution.
//
// Work items [0,n) are split into fixed-size blocks; workers pull whole
// blocks from an atomic counter and write into per-block storage indexed
// by block number. Because the block decomposition is independent of the
// worker count and callers combine per-block results in block order,
// results are bitwise identical for any number of workers.

namespace mzlab {

inline std::size_t default_workers() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1;
}

constexpr std::size_t kDefaultBlock = 128;

// job(begin, end, block_index) is called once per block, on some worker.
template <typename Job>
void parallel_blocks(std::size_t n, std::size_t block_size, std::size_t n_workers, Job&& job) {
    if (n == 0) return;
    if (block_size == 0) block_size = 1;
    const std::size_t n_blocks = (n + block_size - 1) / block_size;
    if (n_workers <= 1 || n_blocks == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            job(b * block_size, std::min(n, (b + 1) * block_size), b);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            job(b * block_size, std::min(n, (b + 1) * block_size), b);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min(n_workers, n_blocks);
    pool.reserve(spawn);
    for (std::size_t w = 0; w < spawn; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
}

inline std::size_t n_blocks_for(std::size_t n, std::size_t block_size) {
    if (block_size == 0) block_size = 1;
    return n == 0 ? 0 : (n + block_size - 1) / block_size;
}

}  // namespace mzlab
