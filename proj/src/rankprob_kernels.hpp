#pragma once

// Inner loops of the rank-probability integrals. Each kernel has a plain
// serial reference and an OpenMP version; the OpenMP versions reduce over
// a fixed chunking so their output does not depend on the thread count.

#include "crw/rankprob.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace crw::detail {

/// Query covariate values with their integration weights, plus the
/// exceedance probabilities of each competitor group at that value.
struct NodeSet {
    std::vector<double> t;
    std::vector<double> weight;
    std::vector<double> q0; // P(null covariate > t)
    std::vector<double> p0; // 1 - q0
    std::vector<double> q1; // P(alt covariate > t)
    std::vector<double> p1;

    std::size_t size() const { return t.size(); }
};

/// Nodes obtained by mapping a Gauss-Legendre rule through the inverse of
/// the pooled covariate CDF (all m covariates). The weights absorb the
/// density ratio query/pooled, so sum_j weight_j * g(t_j) ~= E[g(T)],
/// T ~ N(tau_query, 1).
NodeSet pooled_nodes(const RankModel& model, std::size_t n);

/// Exceedance probabilities at explicit covariate values (unit weights).
NodeSet values_as_nodes(const RankModel& model, const std::vector<double>& t);

/// log k! for k = 0..n.
std::vector<double> log_factorials(std::size_t n);

/// Binomial(n, q) pmf on its numerically non-negligible support.
/// `first` is the count of the first entry.
struct TrimmedPmf {
    std::size_t first = 0;
    std::vector<double> mass;
};

TrimmedPmf binomial_pmf(std::size_t n, double q, double p, const std::vector<double>& lfact);

/// Adds scale * (A conv B) into out, indexed by count a + b.
void add_convolution(const TrimmedPmf& a, const TrimmedPmf& b, double scale, std::vector<double>& out);

/// sum_j weight_j * P(1 + A_j + B_j = k) for all k, as a length-m vector.
std::vector<double> exact_rank_serial(const RankModel& model, const NodeSet& nodes);
std::vector<double> exact_rank_omp(const RankModel& model, const NodeSet& nodes);

/// sum_j weight_j * N(k | mu_j, sigma_j^2) at the requested ranks (1-based).
std::vector<double> normal_rank_serial(const RankModel& model, const NodeSet& nodes,
                                       const std::vector<std::size_t>& ranks);
std::vector<double> normal_rank_omp(const RankModel& model, const NodeSet& nodes,
                                    const std::vector<std::size_t>& ranks);

struct McAccumulator {
    std::vector<double> sum;
    std::vector<double> sum_sq;
};

/// Monte Carlo over t ~ N(tau_query, 1): per-rank sums of the conditional
/// pmf and of its square. Draws are split into kReductionChunks streams.
McAccumulator mc_rank_serial(const RankModel& model, std::size_t draws, std::uint64_t seed);
McAccumulator mc_rank_omp(const RankModel& model, std::size_t draws, std::uint64_t seed);

} // namespace crw::detail
