#include "../oracles.hpp"

#include "crw/errors.hpp"
#include "crw/rankprob.hpp"
#include "crw/weights.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace crw;

namespace {

WeightConfig config(std::size_t m, double effect, double alpha = 0.05) {
    WeightConfig c;
    c.m = m;
    c.alpha = alpha;
    c.mean_effect = effect;
    return c;
}

RankDistribution uniform_dist(std::size_t m) {
    RankDistribution d;
    d.probs.assign(m, 1.0 / static_cast<double>(m));
    return d;
}

} // namespace

TEST_CASE("weight formula evaluated by hand") {
    auto cfg = config(100, 2.0);
    // (m / alpha) * sf(E/2 + log(delta / (alpha p)) / E)
    const double p = 0.03, delta = 1e-4;
    const double arg = 1.0 + std::log(delta / (0.05 * p)) / 2.0;
    CHECK(weight_at(p, delta, cfg) == doctest::Approx(2000.0 * oracle::sf(arg)).epsilon(1e-12));
    CHECK(weight_at(0.0, delta, cfg) == 0.0);
    CHECK(weight_at(p, 0.0, cfg) == 2000.0);
    cfg.mode = WeightMode::binary;
    cfg.m1 = 10;
    const double arg_bin = 1.0 + (std::log(delta / (0.05 * p)) + std::log(10.0)) / 2.0;
    CHECK(weight_at(p, delta, cfg) == doctest::Approx(2000.0 * oracle::sf(arg_bin)).epsilon(1e-12));
}

TEST_CASE("uniform rank probabilities give unit weights") {
    for (double e : {0.3, 1.0, 2.5}) {
        const auto cfg = config(500, e);
        const double d = uniform_delta(cfg);
        CHECK(weight_at(1.0 / 500, d, cfg) == doctest::Approx(1.0).epsilon(1e-10));
        const auto [w, sol] = crw_weights(uniform_dist(500), cfg);
        for (double x : w.weights) CHECK(x == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(sol.delta == doctest::Approx(d).epsilon(1e-5));
    }
}

TEST_CASE("weights average one and do not increase along ranks") {
    const auto dist = rank_prob_exact({50, 50, 2.0, 2.0});
    const auto [w, sol] = crw_weights(dist, config(100, 2.0));
    CHECK(std::accumulate(w.weights.begin(), w.weights.end(), 0.0) == doctest::Approx(100.0).epsilon(1e-6));
    CHECK(sol.residual <= kDeltaResidualTol);
    for (std::size_t k = 1; k < w.size(); ++k) CHECK(w.weights[k] <= w.weights[k - 1] + 1e-12);
    CHECK(w.weights.front() > 1.0);
    CHECK(w.weights.back() < 1.0);
}

TEST_CASE("delta solvers agree") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 12; ++rep) {
        const std::size_t m1 = 5 + static_cast<std::size_t>(u(gen) * 100);
        const std::size_t m0 = 20 + static_cast<std::size_t>(u(gen) * 400);
        const double tau = 0.2 + 3.0 * u(gen);
        const double e = 0.2 + 3.5 * u(gen);
        const auto dist = rank_prob_normal_approx({m0, m1, tau, tau});
        const auto cfg = config(m0 + m1, e, 0.01 + 0.09 * u(gen));
        DeltaOptions bis;
        bis.solver = DeltaSolver::bisection;
        DeltaOptions grid;
        grid.solver = DeltaSolver::grid;
        const auto a = solve_delta(dist, cfg);
        const auto b = solve_delta(dist, cfg, bis);
        const auto c = solve_delta(dist, cfg, grid);
        CHECK(a.delta == doctest::Approx(b.delta).epsilon(1e-6));
        CHECK(c.delta == doctest::Approx(b.delta).epsilon(1e-6));
        CHECK(a.residual <= kDeltaResidualTol);
        CHECK(a.solver == (e >= 1.0 ? DeltaSolver::newton_raphson : DeltaSolver::grid));
    }
}

TEST_CASE("binary and continuous weights coincide after normalization") {
    const auto dist = rank_prob_exact({80, 20, 1.5, 1.5});
    auto cfg = config(100, 1.5);
    const auto [wc, sc] = crw_weights(dist, cfg);
    cfg.mode = WeightMode::binary;
    cfg.m1 = 20;
    const auto [wb, sb] = crw_weights(dist, cfg);
    for (std::size_t k = 0; k < 100; ++k) CHECK(wb.weights[k] == doctest::Approx(wc.weights[k]).epsilon(1e-6));
    CHECK(sb.delta == doctest::Approx(sc.delta * 20.0 / 100.0).epsilon(1e-5));
}

TEST_CASE("top weight grows as nulls become more common") {
    double previous = 0.0;
    for (double pi0 : {0.2, 0.5, 0.8, 0.9}) {
        const std::size_t m0 = static_cast<std::size_t>(std::lround(10000 * pi0));
        const auto dist = rank_prob_grid({m0, 10000 - m0, 2.0, 2.0}, 512);
        const auto [w, sol] = crw_weights(dist, config(10000, 2.0));
        CHECK(w.weights.front() > previous);
        previous = w.weights.front();
    }
}

TEST_CASE("CRW weights beat random normalized perturbations") {
    const auto dist = rank_prob_normal_approx({900, 100, 1.5, 1.5});
    const auto cfg = config(1000, 2.0);
    const auto [w, sol] = crw_weights(dist, cfg);
    const double best = average_power(w, dist, cfg);
    std::mt19937_64 gen(8);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        WeightVector v = w;
        for (auto& x : v.weights) x = std::max(0.0, x * std::exp(0.1 * z(gen)));
        const double mean = v.mean();
        for (auto& x : v.weights) x /= mean;
        CHECK(average_power(v, dist, cfg) <= best + 1e-12);
    }
    CHECK(average_power(WeightVector{std::vector<double>(1000, 1.0)}, dist, cfg) < best);
}

TEST_CASE("exact weights with a point mass reproduce the approximate weights") {
    const std::size_t m0 = 90, m1 = 10;
    const auto cfg = config(100, 2.0);
    const auto at = [&](double e) { return rank_prob_exact({m0, m1, e, e}); };
    const auto [approx, s1] = crw_weights(at(2.0), cfg);
    const auto [exact, s2] = exact_weights(at, EffectDensity::point_mass(2.0), cfg);
    for (std::size_t k = 0; k < 100; ++k) CHECK(exact.weights[k] == doctest::Approx(approx.weights[k]).epsilon(1e-4));

    const auto [spread, s3] = exact_weights(at, EffectDensity::truncated_normal(2.0, 0.5, 16), cfg);
    CHECK(spread.mean() == doctest::Approx(1.0).epsilon(1e-4));
    for (std::size_t k = 1; k < 100; ++k) CHECK(spread.weights[k] <= spread.weights[k - 1] + 1e-9);
}

TEST_CASE("oracle weights match a grid search for the normalizer") {
    const std::vector<double> eff{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 0.0, 4.0, 1.2};
    const double alpha = 0.05;
    const auto w = rdw_weights(eff, alpha);
    CHECK(std::accumulate(w.weights.begin(), w.weights.end(), 0.0) == doctest::Approx(10.0).epsilon(1e-9));
    // independent scan: bracket c on a fine grid, then compare weights
    auto total = [&](double c) {
        double s = 0.0;
        for (double e : eff)
            if (e > 0.0) s += 200.0 * oracle::sf(0.5 * e + c / e);
        return s;
    };
    double c = -50.0;
    for (double step = 1.0; step > 1e-13; step /= 10.0)
        while (total(c + step) > 10.0) c += step;
    for (std::size_t i = 0; i < eff.size(); ++i) {
        const double expect = eff[i] > 0.0 ? 200.0 * oracle::sf(0.5 * eff[i] + c / eff[i]) : 0.0;
        CHECK(w.weights[i] == doctest::Approx(expect).epsilon(1e-6));
    }
    CHECK_THROWS_AS(rdw_weights(std::vector<double>(5, 0.0), alpha), DegenerateInput);
    std::vector<double> sparse(1000, 0.0);
    sparse[3] = 1.0;
    const auto single = rdw_weights(sparse, alpha);
    CHECK(single.weights[3] == doctest::Approx(1000.0).epsilon(1e-9));
    CHECK(single.weights[0] == 0.0);
}

TEST_CASE("zero rank probabilities get zero weight") {
    auto dist = rank_prob_exact({50, 50, 2.0, 2.0});
    dist.probs.back() = 0.0;
    const auto [w, sol] = crw_weights(dist, config(100, 2.0));
    CHECK(w.weights.back() == 0.0);
    CHECK(sol.zero_prob_ranks == 1);
}

TEST_CASE("weight configuration is validated") {
    CHECK_THROWS_AS(crw_weights(uniform_dist(10), config(10, 1.0, 1.5)), ConfigError);
    CHECK_THROWS_AS(crw_weights(uniform_dist(10), config(10, -1.0)), ConfigError);
    CHECK_THROWS_AS(crw_weights(uniform_dist(9), config(10, 1.0)), ConfigError);
    auto bin = config(10, 1.0);
    bin.mode = WeightMode::binary;
    CHECK_THROWS_AS(crw_weights(uniform_dist(10), bin), ConfigError);
    CHECK(weight_mode_from_string(to_string(WeightMode::binary)) == WeightMode::binary);
}

TEST_CASE("uniform weights give single-test Bonferroni power") {
    WeightVector w;
    w.weights.assign(200, 1.0);
    for (double e : {0.5, 1.0, 2.5}) {
        const auto cfg = config(200, e);
        const double z = oracle::isf_bisect(0.05 / 200.0);
        CHECK(average_power(w, uniform_dist(200), cfg) == doctest::Approx(oracle::sf(z - e)).epsilon(1e-9));
    }
}

TEST_CASE("exact weights with uniform rank probabilities are all one") {
    const auto flat = [](double) { return uniform_dist(300); };
    const auto [w, sol] = exact_weights(flat, EffectDensity::point_mass(1.5), config(300, 1.5));
    for (double x : w.weights) CHECK(x == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("newton and bisection agree at large m") {
    const auto dist = rank_prob_normal_approx({9900, 100, 1.0, 1.0});
    const auto cfg = config(10000, 1.0);
    DeltaOptions nr, bis;
    nr.solver = DeltaSolver::newton_raphson;
    bis.solver = DeltaSolver::bisection;
    const auto a = solve_delta(dist, cfg, nr);
    const auto b = solve_delta(dist, cfg, bis);
    CHECK(a.delta == doctest::Approx(b.delta).epsilon(1e-6));
    CHECK(a.residual <= kDeltaResidualTol);
}
