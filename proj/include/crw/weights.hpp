#pragma once

#include "crw/parallel.hpp"
#include "crw/rankprob.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace crw {

enum class WeightMode { continuous, binary };

std::string to_string(WeightMode mode);
WeightMode weight_mode_from_string(const std::string& name);

/// Parameters of the rank-weight formula. In binary mode mean_effect is the
/// fixed alternative effect and m1 the number of alternatives.
struct WeightConfig {
    std::size_t m = 0;
    double alpha = 0.05;
    double mean_effect = 1.0;
    std::size_t m1 = 0;
    WeightMode mode = WeightMode::continuous;

    void validate() const;
};

/// Per-rank weights, index k - 1 for covariate rank k.
struct WeightVector {
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double mean() const;
};

enum class DeltaSolver { newton_raphson, grid, bisection };

std::string to_string(DeltaSolver solver);

struct DeltaSolution {
    double delta = 0.0;
    DeltaSolver solver = DeltaSolver::bisection;
    std::size_t iterations = 0;
    double residual = 0.0;          // |mean weight - 1| at delta
    std::size_t zero_prob_ranks = 0; // ranks with P = 0, given weight 0
};

inline constexpr double kDeltaResidualTol = 1e-6;
inline constexpr double kDeltaMin = 1e-30;
inline constexpr double kDeltaMax = 1e30;

/// Weight of a test whose rank has probability rank_prob, at normalizer
/// delta. rank_prob <= 0 gives 0; the result never exceeds m / alpha.
double weight_at(double rank_prob, double delta, const WeightConfig& cfg);

/// delta that makes every weight equal to 1 when all rank probabilities
/// are 1/m (inverts the weight formula at w = 1).
double uniform_delta(const WeightConfig& cfg);

struct DeltaOptions {
    /// Overrides the default choice (Newton-Raphson when mean_effect >= 1,
    /// grid scan + bisection otherwise).
    std::optional<DeltaSolver> solver;
    Execution exec = Execution::parallel;
};

/// Finds delta with mean weight 1. Throws SolverError when the mean weight
/// does not cross 1 inside [kDeltaMin, kDeltaMax] or the residual stays
/// above kDeltaResidualTol.
DeltaSolution solve_delta(const RankDistribution& rank_dist, const WeightConfig& cfg,
                          const DeltaOptions& opts = {});

std::pair<WeightVector, DeltaSolution> crw_weights(const RankDistribution& rank_dist, const WeightConfig& cfg,
                                                   const DeltaOptions& opts = {});

/// Distribution of the alternative test effect used by exact_weights.
struct EffectDensity {
    enum class Kind { point_mass, truncated_normal };
    Kind kind = Kind::point_mass;
    double mean = 1.0;      // point mass location, or mean of the untruncated normal
    double sd = 1.0;        // truncated normal only, truncated to (0, inf)
    std::size_t nodes = 32; // quadrature nodes for the truncated normal

    static EffectDensity point_mass(double effect);
    static EffectDensity truncated_normal(double mean, double sd, std::size_t nodes = 32);
};

/// Rank distribution of a test whose alternative effect is `effect`.
using RankProbabilityFn = std::function<RankDistribution(double effect)>;

/// Weights from the full stationarity condition, integrating over the effect
/// density rather than evaluating at its mean. The normalizer is found so
/// that the weights sum to m within 1e-4 * m.
std::pair<WeightVector, DeltaSolution> exact_weights(const RankProbabilityFn& rank_at, const EffectDensity& density,
                                                     const WeightConfig& cfg, Execution exec = Execution::parallel);

/// Mean power over tests at the point effect cfg.mean_effect, with weighted
/// Bonferroni thresholds alpha * w / m.
double average_power(const WeightVector& weights, const RankDistribution& rank_dist, const WeightConfig& cfg);

/// Oracle weights for known per-test effects: (m / alpha) * sf(e/2 + c/e) for
/// e > 0, else 0, with c chosen so the weights sum to m. Throws
/// DegenerateInput when no effect is positive.
WeightVector rdw_weights(std::span<const double> effect_sizes, double alpha);

} // namespace crw
