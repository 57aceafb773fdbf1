#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crw {

/// Data-driven calibration summary. Per-test vectors have length m and
/// are index-aligned with the input p-values.
struct EffectEstimate {
    double pi0_hat = 1.0;
    std::size_t m0_hat = 0;
    std::size_t m1_hat = 0;
    std::vector<double> eps_hat;   // 0 outside the estimated alternatives
    std::vector<std::size_t> alt_indices; // the m1_hat smallest p-values
    double mean_alt_effect = 0.0;
    std::vector<double> power_hat; // filled by posthoc_power
};

struct RegressionFit {
    double intercept = 0.0;
    double slope = 0.0;
    double residual_sd = 0.0;
    double tau_at_mean = 0.0;
    std::size_t n = 0;
    double intercept_se = 0.0;
    double slope_se = 0.0;
};

inline constexpr double kStoreyLambda = 0.5;
inline constexpr double kPvalueFloor = 1e-15;

/// Storey's tail estimate min(1, #{p > lambda} / (m (1 - lambda))).
double estimate_pi0(std::span<const double> pvalues, double lambda = kStoreyLambda);

/// round(m * (1 - pi0)).
std::size_t m1_from_pi0(double pi0, std::size_t m);

/// One-sided normal inversion sf^-1(p), clamped at 0, for the m1_hat
/// smallest p-values (ties by index). p below kPvalueFloor is floored.
EffectEstimate estimate_effects(std::span<const double> pvalues, std::size_t m1_hat);

/// sf(z_{alpha/m} - eps) for the estimated alternatives, 0 elsewhere.
/// Also stored into estimate.power_hat.
std::vector<double> posthoc_power(EffectEstimate& estimate, double alpha);

/// OLS of covariate effects on test effects; tau_at_mean is the fitted
/// covariate effect at mean_alt_effect. Throws DegenerateInput when the
/// test effects have zero variance.
RegressionFit fit_covariate_regression(std::span<const double> test_effects,
                                       std::span<const double> covariate_effects, double mean_alt_effect);

/// max(0, covariate) for the m1_hat largest covariates, 0 elsewhere.
std::vector<double> estimate_covariate_effects(std::span<const double> covariate_stats, std::size_t m1_hat);

/// Linear-interpolated sample quantile (type 7).
double quantile(std::vector<double> values, double prob);

} // namespace crw
