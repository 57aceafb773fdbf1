#include "../oracles.hpp"

#include "crw/errors.hpp"
#include "crw/estimation.hpp"
#include "crw/pipeline.hpp"
#include "crw/simharness.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace crw;

TEST_CASE("Storey estimate by hand") {
    const std::vector<double> p{0.01, 0.2, 0.55, 0.7, 0.9, 0.4, 0.51, 0.03};
    // 4 of 8 above 0.5 -> 4 / (8 * 0.5) = 1
    CHECK(estimate_pi0(p) == doctest::Approx(1.0));
    CHECK(estimate_pi0(p, 0.8) == doctest::Approx(1.0 / (8 * 0.2)));
    const std::vector<double> q{0.001, 0.002, 0.003, 0.6, 0.8, 0.01, 0.02, 0.7, 0.04, 0.05};
    CHECK(estimate_pi0(q) == doctest::Approx(0.6));
    CHECK(m1_from_pi0(0.6, 10) == 4);
    CHECK(m1_from_pi0(1.0, 10) == 0);
    CHECK_THROWS_AS(estimate_pi0(std::vector<double>{0.5, 1.2}), DataError);
    CHECK_THROWS_AS(estimate_pi0(q, 1.0), ConfigError);
}

TEST_CASE("Storey estimate is close to the truth on uniform nulls") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(20000);
    for (auto& x : p) x = u(gen);
    CHECK(std::abs(estimate_pi0(p) - 1.0) < 0.03);
}

TEST_CASE("effect estimates invert the smallest p-values") {
    const std::vector<double> p{0.5, 0.001, 0.9, 1e-20, 0.02};
    const auto est = estimate_effects(p, 2);
    CHECK(est.alt_indices == std::vector<std::size_t>{3, 1});
    CHECK(est.eps_hat[1] == doctest::Approx(3.090232306).epsilon(1e-9));
    // floored at 1e-15
    CHECK(est.eps_hat[3] == doctest::Approx(7.941345326).epsilon(1e-9));
    CHECK(est.eps_hat[0] == 0.0);
    CHECK(est.mean_alt_effect == doctest::Approx((est.eps_hat[1] + est.eps_hat[3]) / 2));
    auto e2 = est;
    const auto pw = posthoc_power(e2, 0.05);
    const double z = 2.3263478740408408; // upper 0.01 quantile, alpha / m = 0.05 / 5
    CHECK(pw[1] == doctest::Approx(oracle::sf(z - est.eps_hat[1])).epsilon(1e-9));
    CHECK(pw[0] == 0.0);
    CHECK(e2.power_hat == pw);
    CHECK_THROWS_AS(estimate_effects(p, 0), ConfigError);
}

TEST_CASE("regression by hand") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{1.0, 3.0, 2.0, 5.0};
    const auto fit = fit_covariate_regression(x, y, 2.5);
    // slope = Sxy / Sxx = 5.5 / 5, and the line passes through (2.5, 2.75)
    CHECK(fit.slope == doctest::Approx(1.1));
    CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.tau_at_mean == doctest::Approx(2.75));
    const double sse = 0.01 + 0.64 + 1.69 + 0.36;
    CHECK(fit.residual_sd == doctest::Approx(std::sqrt(sse / 2)));
    CHECK(fit.slope_se == doctest::Approx(std::sqrt(sse / 2 / 5)));
    CHECK_THROWS_AS(fit_covariate_regression(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}, 1.0),
                    DegenerateInput);
    CHECK_THROWS_AS(fit_covariate_regression(std::vector<double>{1, 2}, std::vector<double>{1, 2}, 1.0), DataError);
}

TEST_CASE("covariate effects keep the largest covariates, clamped at zero") {
    const std::vector<double> c{-1.0, 2.0, 0.5, -0.2, 3.0};
    const auto t = estimate_covariate_effects(c, 3);
    CHECK(t == std::vector<double>{0.0, 2.0, 0.5, 0.0, 3.0});
    const auto all = estimate_covariate_effects(c, 5);
    CHECK(all[0] == 0.0);
}

TEST_CASE("type-7 quantiles") {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("calibration on simulated data recovers the generating model") {
    SimConfig cfg;
    cfg.m = 10000;
    cfg.pi0 = 0.8;
    cfg.mu_eps = 2.0;
    cfg.seed = 17;
    const auto ds = generate_dataset(cfg, 0);
    const auto cal = calibrate_crw(ds.records, {});
    CHECK(std::abs(cal.pi0_hat - 0.8) < 0.05);
    CHECK_FALSE(cal.uniform);
    CHECK(cal.weights.mean() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cal.tau_at_mean > 0.5);
    REQUIRE(cal.fit);
    const auto again = recalibrate_alpha(cal, 0.01, Execution::serial);
    CHECK(again.weight_config.alpha == 0.01);
    CHECK(again.weights.mean() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(alpha_grid().size() == 10);
    CHECK(alpha_grid().back() == doctest::Approx(0.10));
}

TEST_CASE("calibration falls back to unit weights without signal") {
    SimConfig cfg;
    cfg.m = 2000;
    cfg.pi0 = 1.0;
    cfg.seed = 5;
    auto ds = generate_dataset(cfg, 0);
    const auto cal = calibrate_crw(ds.records, {});
    if (cal.uniform) {
        for (double w : cal.weights.weights) CHECK(w == 1.0);
        CHECK_FALSE(cal.fallback_reason.empty());
    } else {
        CHECK(cal.weights.mean() == doctest::Approx(1.0).epsilon(1e-6));
    }
    for (auto& r : ds.records) r.covariate = 1.0;
    rank_by_covariate(ds.records);
    for (auto& r : ds.records) r.pvalue = r.pvalue * 0.01;
    const auto flat = calibrate_crw(ds.records, {});
    CHECK(flat.weights.size() == 2000);
}
