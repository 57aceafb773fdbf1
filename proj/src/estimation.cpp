#include "crw/estimation.hpp"

#include "crw/errors.hpp"
#include "crw/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crw {

namespace {

// Indices of the n entries that come first under `before`, ties by index.
template <class Before>
std::vector<std::size_t> top_indices(std::size_t size, std::size_t n, Before before) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), before);
    idx.resize(std::min(n, size));
    return idx;
}

} // namespace

double estimate_pi0(std::span<const double> pvalues, double lambda) {
    if (pvalues.empty()) throw ConfigError("estimate_pi0: no p-values");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("Storey lambda must lie in (0, 1)");
    std::size_t above = 0;
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("estimate_pi0: p-value outside [0, 1]");
        if (p > lambda) ++above;
    }
    const double pi0 = static_cast<double>(above) / (static_cast<double>(pvalues.size()) * (1.0 - lambda));
    return std::min(1.0, pi0);
}

std::size_t m1_from_pi0(double pi0, std::size_t m) {
    const double m1 = std::round(static_cast<double>(m) * (1.0 - pi0));
    return static_cast<std::size_t>(std::clamp(m1, 0.0, static_cast<double>(m)));
}

EffectEstimate estimate_effects(std::span<const double> pvalues, std::size_t m1_hat) {
    const std::size_t m = pvalues.size();
    if (m1_hat < 1 || m1_hat > m) throw ConfigError("estimate_effects needs 1 <= m1_hat <= m");
    EffectEstimate est;
    est.m1_hat = m1_hat;
    est.m0_hat = m - m1_hat;
    est.pi0_hat = static_cast<double>(est.m0_hat) / static_cast<double>(m);
    est.eps_hat.assign(m, 0.0);
    est.alt_indices = top_indices(m, m1_hat, [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
    double sum = 0.0;
    for (std::size_t i : est.alt_indices) {
        const double p = std::max(pvalues[i], kPvalueFloor);
        est.eps_hat[i] = std::max(0.0, norm_isf(p));
        sum += est.eps_hat[i];
    }
    est.mean_alt_effect = sum / static_cast<double>(m1_hat);
    return est;
}

std::vector<double> posthoc_power(EffectEstimate& estimate, double alpha) {
    const std::size_t m = estimate.eps_hat.size();
    const double z = norm_isf(alpha / static_cast<double>(m));
    std::vector<double> power(m, 0.0);
    for (std::size_t i : estimate.alt_indices) power[i] = norm_sf(z - estimate.eps_hat[i]);
    estimate.power_hat = power;
    return power;
}

RegressionFit fit_covariate_regression(std::span<const double> test_effects,
                                       std::span<const double> covariate_effects, double mean_alt_effect) {
    const std::size_t n = test_effects.size();
    if (n != covariate_effects.size()) throw ConfigError("regression vectors differ in length");
    if (n < 3) throw DataError("covariate regression needs at least 3 points");
    const double nd = static_cast<double>(n);
    const double mx = std::accumulate(test_effects.begin(), test_effects.end(), 0.0) / nd;
    const double my = std::accumulate(covariate_effects.begin(), covariate_effects.end(), 0.0) / nd;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (test_effects[i] - mx) * (test_effects[i] - mx);
        sxy += (test_effects[i] - mx) * (covariate_effects[i] - my);
    }
    if (!(sxx > 1e-12 * nd * std::max(1.0, mx * mx)))
        throw DegenerateInput("covariate regression: test effects have zero variance");
    RegressionFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = covariate_effects[i] - fit.intercept - fit.slope * test_effects[i];
        sse += r * r;
    }
    const double s2 = sse / (nd - 2.0);
    fit.residual_sd = std::sqrt(s2);
    fit.slope_se = std::sqrt(s2 / sxx);
    fit.intercept_se = std::sqrt(s2 * (1.0 / nd + mx * mx / sxx));
    fit.tau_at_mean = fit.intercept + fit.slope * mean_alt_effect;
    return fit;
}

std::vector<double> estimate_covariate_effects(std::span<const double> covariate_stats, std::size_t m1_hat) {
    const std::size_t m = covariate_stats.size();
    std::vector<double> tau(m, 0.0);
    const auto top = top_indices(m, m1_hat,
                                 [&](std::size_t a, std::size_t b) { return covariate_stats[a] > covariate_stats[b]; });
    for (std::size_t i : top) tau[i] = std::max(0.0, covariate_stats[i]);
    return tau;
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

} // namespace crw
