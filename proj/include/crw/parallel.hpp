#pragma once

#include <cstddef>
#include <functional>

namespace crw {

/// Serial runs the reference loops; parallel runs the OpenMP kernels.
/// Both produce bitwise-identical results for a fixed input, independent
/// of the thread count.
enum class Execution { serial, parallel };

/// Work is always split into this many contiguous chunks, whatever the
/// thread count, so reductions combine partial sums in a fixed order.
inline constexpr std::size_t kReductionChunks = 64;

struct ChunkRange {
    std::size_t begin;
    std::size_t end;
};

ChunkRange chunk_range(std::size_t n, std::size_t chunk, std::size_t n_chunks = kReductionChunks);

/// Sum of f(i) over i in [0, n) with a thread-count-independent order.
double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& f, Execution exec);

/// Calls f(i) for every i in [0, n); iterations must be independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f, Execution exec);

int max_threads();
void set_threads(int n);

} // namespace crw
