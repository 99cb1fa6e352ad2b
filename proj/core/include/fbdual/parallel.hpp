#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace fbdual {

// Maximum number of worker threads used by parallel loops. 0 = hardware default.
// Results are bitwise independent of this setting: work is split into a fixed
// chunk layout and all reductions combine chunk partials in chunk order.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over [0, n) split into chunks. The chunk layout depends
// only on n, never on the thread count.
void parallel_for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// Convenience per-index version.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Task-parallel per-index loop (chunk size 1) for small counts of heavyweight
// independent tasks. Each index's work must be self-contained for results to
// stay deterministic.
void parallel_for_tasks(std::size_t n, const std::function<void(std::size_t)>& fn);

// Deterministic sum reduction: accumulates fn over each chunk, then adds the
// chunk partials in chunk order.
double parallel_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& chunk_sum);

} // namespace fbdual
