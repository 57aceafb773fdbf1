#pragma once

#include "crw/parallel.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace crw {

/// Two-component covariate model: m0 null covariates ~ N(0, 1) and m1
/// alternative covariates ~ N(tau_alt, 1). The queried test has covariate
/// effect tau_query and belongs to the alternatives iff tau_query > 0.
struct RankModel {
    std::size_t m0 = 0;
    std::size_t m1 = 0;
    double tau_alt = 0.0;
    double tau_query = 0.0;

    std::size_t m() const { return m0 + m1; }
    bool query_is_alternative() const { return tau_query > 0.0; }

    /// Other tests competing with the query, by group.
    std::size_t null_competitors() const { return query_is_alternative() ? m0 : m0 - 1; }
    std::size_t alt_competitors() const { return query_is_alternative() ? m1 - 1 : m1; }

    /// Throws ConfigError on an invalid model (empty, negative effects,
    /// or a query whose group is empty).
    void validate() const;
};

enum class RankMethod { exact_convolution, normal_approx, monte_carlo, grid };

std::string to_string(RankMethod method);
RankMethod rank_method_from_string(const std::string& name);

struct IntegrationMeta {
    std::size_t nodes = 0;     // quadrature nodes (0 for Monte Carlo)
    std::size_t draws = 0;     // Monte Carlo draws (0 otherwise)
    std::uint64_t seed = 0;
    std::size_t grid_size = 0; // grid mode only
    std::vector<std::string> warnings;
};

/// probs[k - 1] = P(rank = k | tau_query), rank 1 = largest covariate.
struct RankDistribution {
    std::vector<double> probs;
    RankMethod method = RankMethod::exact_convolution;
    IntegrationMeta meta;
    std::vector<double> std_errors; // per-rank Monte Carlo standard errors

    std::size_t size() const { return probs.size(); }
};

/// Null covariate CDF, F0(t) = Phi(t).
double null_cdf_at(double t);

/// Alternative covariate CDF with a point-mass effect, F1(t) = Phi(t - tau_alt).
double alt_cdf_at(double t, double tau_alt);

inline constexpr std::size_t kExactRankCap = 2000;
inline constexpr std::size_t kNormalApproxFloor = 10;

/// Quadrature nodes used when RankOptions::nodes is 0; grows like sqrt(m)
/// so that every rank's integrand is resolved.
std::size_t default_node_count(std::size_t m);

struct RankOptions {
    std::size_t nodes = 0;
    Execution exec = Execution::parallel;
};

/// Binomial-convolution rank distribution, integrated over the query's
/// covariate value. Throws CapacityError when m > kExactRankCap.
RankDistribution rank_prob_exact(const RankModel& model, const RankOptions& opts = {});

/// Normal approximation of the binomial sum at each covariate value,
/// renormalized. Warns (in meta) when m < kNormalApproxFloor.
RankDistribution rank_prob_normal_approx(const RankModel& model, const RankOptions& opts = {});

/// Monte Carlo over the query covariate t ~ N(tau_query, 1); deterministic
/// in (model, draws, seed) for any thread count. Requires draws >= 1000.
RankDistribution rank_prob_mc(const RankModel& model, std::size_t draws, std::uint64_t seed,
                              Execution exec = Execution::parallel);

/// Normal approximation on grid_size evenly spaced ranks, PCHIP-interpolated
/// in between. Falls back to the full evaluation when m <= grid_size.
RankDistribution rank_prob_grid(const RankModel& model, std::size_t grid_size,
                                const RankOptions& opts = {});

/// Dispatch by method name; `mc` uses draws/seed, `grid` uses grid_size.
struct RankRequest {
    RankMethod method = RankMethod::normal_approx;
    std::size_t grid_size = 512;
    std::size_t draws = 100000;
    std::uint64_t seed = 1;
    RankOptions options;
};

RankDistribution rank_prob(const RankModel& model, const RankRequest& request);

/// Picks exact convolution for small m, full normal approximation for
/// moderate m and grid mode beyond that.
RankRequest auto_rank_request(std::size_t m);

} // namespace crw
