#include "../oracles.hpp"

#include "crw/normal.hpp"
#include "crw/parallel.hpp"
#include "crw/quadrature.hpp"
#include "crw/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace crw;

TEST_CASE("normal cdf and tail match the series oracle") {
    for (double x = -6.0; x <= 6.0; x += 0.25) {
        CHECK(norm_cdf(x) == doctest::Approx(1.0 - oracle::sf(x)).epsilon(1e-12));
        CHECK(norm_sf(x) == doctest::Approx(oracle::sf(x)).epsilon(1e-12));
    }
    for (double x : {8.0, 12.0, 20.0, 30.0}) CHECK(norm_sf(x) == doctest::Approx(oracle::sf(x)).epsilon(1e-12));
}

TEST_CASE("normal quantiles invert the tail") {
    for (double q : {1e-300, 1e-100, 1e-20, 1e-8, 0.001, 0.025, 0.3, 0.5, 0.9, 0.999}) {
        const double z = norm_isf(q);
        CHECK(norm_sf(z) == doctest::Approx(q).epsilon(1e-12));
        CHECK(norm_ppf(q) == doctest::Approx(-z).epsilon(1e-14));
    }
    CHECK(norm_isf(0.0) == INFINITY);
    CHECK(norm_isf(1.0) == -INFINITY);
    CHECK(norm_isf(0.05 / 10000) == doctest::Approx(4.4171734).epsilon(1e-7));
}

TEST_CASE("log density matches the density") {
    for (double x : {-5.0, -1.0, 0.0, 2.5, 30.0}) CHECK(std::exp(log_norm_pdf(x)) == doctest::Approx(norm_pdf(x)));
    CHECK(norm_pdf(0.0) == doctest::Approx(oracle::pdf(0.0)).epsilon(1e-15));
}

TEST_CASE("Gauss-Legendre rules are exact for polynomials up to degree 2n-1") {
    for (std::size_t n : {1u, 2u, 5u, 16u, 64u, 257u}) {
        const auto rule = gauss_legendre_unit(n);
        REQUIRE(rule->size() == n);
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            wsum += rule->weight[i];
            CHECK(rule->lower[i] + rule->upper[i] == doctest::Approx(1.0).epsilon(1e-15));
            if (i > 0) CHECK(rule->lower[i] > rule->lower[i - 1]);
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
        const std::size_t deg = std::min<std::size_t>(2 * n - 1, 40);
        for (std::size_t d = 0; d <= deg; ++d) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += rule->weight[i] * std::pow(rule->lower[i], static_cast<double>(d));
            CHECK(s == doctest::Approx(1.0 / (d + 1.0)).epsilon(1e-12));
        }
    }
    CHECK(gauss_legendre_unit(64) == gauss_legendre_unit(64));
}

TEST_CASE("deterministic_sum does not depend on thread count or execution") {
    const std::size_t n = 100003;
    auto f = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 1e-3 + 1.0 / (1.0 + i); };
    const double ref = deterministic_sum(n, f, Execution::serial);
    const int saved = max_threads();
    for (int t : {1, 2, 3, 8}) {
        set_threads(t);
        CHECK(deterministic_sum(n, f, Execution::parallel) == ref);
    }
    set_threads(saved);
    double naive = 0.0;
    for (std::size_t i = 0; i < n; ++i) naive += f(i);
    CHECK(ref == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("chunk ranges tile the index space") {
    for (std::size_t n : {0u, 1u, 63u, 64u, 1000u}) {
        std::size_t next = 0;
        for (std::size_t c = 0; c < kReductionChunks; ++c) {
            const auto r = chunk_range(n, c);
            CHECK(r.begin == next);
            next = r.end;
        }
        CHECK(next == n);
    }
}

TEST_CASE("parallel_for visits every index once") {
    std::vector<int> hits(5000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, Execution::parallel);
    CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 5000);
    CHECK(*std::min_element(hits.begin(), hits.end()) == 1);
}

TEST_CASE("Rng streams are reproducible and distinct") {
    Rng a(42, 3), b(42, 3), c(42, 4);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        CHECK(x == b.normal());
        differs = differs || x != c.normal();
    }
    CHECK(differs);

    Rng r(7, 0);
    const int n = 200000;
    double s = 0.0, s2 = 0.0, umin = 1.0, umax = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
        const double u = r.uniform();
        umin = std::min(umin, u);
        umax = std::max(umax, u);
    }
    CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(umin > 0.0);
    CHECK(umax < 1.0);
}
