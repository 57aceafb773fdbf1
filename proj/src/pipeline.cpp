#include "crw/pipeline.hpp"

#include "crw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crw {

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const SolverError& e) {
        throw SolverError(std::string(name) + ": " + e.what(), e.best_residual());
    } catch (const DegenerateInput& e) {
        throw DegenerateInput(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const CapacityError& e) {
        throw CapacityError(std::string(name) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    }
}

void set_uniform(Calibration& cal, std::size_t m, std::string reason) {
    cal.uniform = true;
    cal.fallback_reason = std::move(reason);
    cal.weights.weights.assign(m, 1.0);
    cal.delta = DeltaSolution{};
}

void solve_weights(Calibration& cal, Execution exec) {
    auto [w, sol] = stage("weights", [&] {
        DeltaOptions dopts;
        dopts.exec = exec;
        return crw_weights(cal.rank_dist, cal.weight_config, dopts);
    });
    cal.weights = std::move(w);
    cal.delta = sol;
}

} // namespace

Calibration calibrate_crw(const std::vector<TestRecord>& records, const CalibrationOptions& opts) {
    const std::size_t m = records.size();
    if (m == 0) throw DataError("calibration: no tests");
    std::vector<double> p(m);
    std::vector<double> cov(m);
    for (std::size_t i = 0; i < m; ++i) {
        p[i] = records[i].pvalue;
        cov[i] = records[i].covariate;
    }

    Calibration cal;
    cal.weight_config.m = m;
    cal.weight_config.alpha = opts.alpha;
    cal.weight_config.mode = opts.mode;
    cal.pi0_hat = stage("estimate_pi0", [&] { return estimate_pi0(p, opts.lambda); });
    const std::size_t m1 = m1_from_pi0(cal.pi0_hat, m);
    cal.estimate.pi0_hat = cal.pi0_hat;
    cal.estimate.m1_hat = m1;
    cal.estimate.m0_hat = m - m1;
    if (m1 == 0 || m1 == m) {
        set_uniform(cal, m, m1 == 0 ? "estimated no alternatives (pi0_hat = 1)" : "estimated no nulls (pi0_hat = 0)");
        return cal;
    }
    cal.estimate = stage("estimate_effects", [&] { return estimate_effects(p, m1); });
    cal.estimate.pi0_hat = cal.pi0_hat;
    posthoc_power(cal.estimate, opts.alpha);

    if (std::all_of(cov.begin(), cov.end(), [&](double c) { return c == cov.front(); })) {
        set_uniform(cal, m, "covariate is constant");
        return cal;
    }

    const auto tau_top = estimate_covariate_effects(cov, m1);
    cal.mean_covariate_effect = std::accumulate(tau_top.begin(), tau_top.end(), 0.0) / static_cast<double>(m1);

    // Regression pairs: the estimated alternatives, each test's own clamped
    // covariate against its estimated test effect.
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i : cal.estimate.alt_indices) {
        x.push_back(cal.estimate.eps_hat[i]);
        y.push_back(std::max(0.0, cov[i]));
    }
    try {
        cal.fit = fit_covariate_regression(x, y, cal.estimate.mean_alt_effect);
        cal.tau_at_mean = cal.fit->tau_at_mean;
    } catch (const DataError&) {
        // too few points or constant test effects: the fitted value at the
        // mean effect reduces to the mean covariate effect
        cal.tau_at_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    }

    if (!(cal.estimate.mean_alt_effect > 0.0)) {
        set_uniform(cal, m, "estimated mean alternative effect is 0");
        return cal;
    }
    if (!(cal.tau_at_mean > 0.0)) {
        set_uniform(cal, m, "estimated covariate effect at the mean test effect is <= 0");
        return cal;
    }

    cal.model = RankModel{m - m1, m1, cal.tau_at_mean, cal.tau_at_mean};
    RankRequest req = opts.rank.value_or(auto_rank_request(m));
    req.options.exec = opts.exec;
    cal.rank_dist = stage("rank_probability", [&] { return rank_prob(cal.model, req); });

    cal.weight_config.mean_effect = cal.estimate.mean_alt_effect;
    cal.weight_config.m1 = m1;
    solve_weights(cal, opts.exec);
    return cal;
}

Calibration recalibrate_alpha(const Calibration& base, double alpha, Execution exec) {
    Calibration cal = base;
    cal.weight_config.alpha = alpha;
    if (cal.uniform) return cal;
    solve_weights(cal, exec);
    return cal;
}

std::vector<double> alpha_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
}

} // namespace crw
