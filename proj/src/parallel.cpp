#include "crw/parallel.hpp"

#include <omp.h>

#include <array>

namespace crw {

ChunkRange chunk_range(std::size_t n, std::size_t chunk, std::size_t n_chunks) {
    const std::size_t base = n / n_chunks;
    const std::size_t extra = n % n_chunks;
    const std::size_t begin = chunk * base + (chunk < extra ? chunk : extra);
    const std::size_t end = begin + base + (chunk < extra ? 1 : 0);
    return {begin, end};
}

double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& f, Execution exec) {
    std::array<double, kReductionChunks> partial{};
    const auto run_chunk = [&](std::size_t c) {
        const auto r = chunk_range(n, c);
        double s = 0.0;
        for (std::size_t i = r.begin; i < r.end; ++i) s += f(i);
        partial[c] = s;
    };
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
        for (std::size_t c = 0; c < kReductionChunks; ++c) run_chunk(c);
    } else {
        for (std::size_t c = 0; c < kReductionChunks; ++c) run_chunk(c);
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f, Execution exec) {
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::size_t i = 0; i < n; ++i) f(i);
    } else {
        for (std::size_t i = 0; i < n; ++i) f(i);
    }
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

} // namespace crw
