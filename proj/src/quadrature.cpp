#include "crw/quadrature.hpp"

#include "crw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace crw {

namespace {

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(std::size_t n, double x, double& p, double& dp) {
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
    }
    p = p1;
    dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
}

UnitRule build(std::size_t n) {
    UnitRule rule;
    rule.lower.resize(n);
    rule.upper.resize(n);
    rule.weight.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        // Newton in the angle, x = cos(theta), theta in (0, pi/2].
        double theta = std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5);
        double p = 0.0;
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            legendre(n, std::cos(theta), p, dp);
            const double step = p / (-std::sin(theta) * dp);
            theta -= step;
            if (std::abs(step) <= 1e-16 * theta) break;
        }
        legendre(n, std::cos(theta), p, dp);
        const double s = std::sin(theta);
        const double w = 1.0 / (s * s * dp * dp);  // 2/((1-x^2)P'^2) halved for [0, 1]
        const double near_one = std::cos(0.5 * theta) * std::cos(0.5 * theta);
        const double near_zero = std::sin(0.5 * theta) * std::sin(0.5 * theta);
        // node i sits near 1, its mirror n-1-i near 0
        rule.lower[i] = near_one;
        rule.upper[i] = near_zero;
        rule.weight[i] = w;
        rule.lower[n - 1 - i] = near_zero;
        rule.upper[n - 1 - i] = near_one;
        rule.weight[n - 1 - i] = w;
    }
    if (n % 2 == 1) {
        rule.lower[n / 2] = 0.5;
        rule.upper[n / 2] = 0.5;
    }
    // ascending order in `lower`
    std::reverse(rule.lower.begin(), rule.lower.end());
    std::reverse(rule.upper.begin(), rule.upper.end());
    std::reverse(rule.weight.begin(), rule.weight.end());
    return rule;
}

} // namespace

std::shared_ptr<const UnitRule> gauss_legendre_unit(std::size_t n) {
    if (n == 0) throw ConfigError("quadrature rule needs at least one node");
    static std::mutex mutex;
    static std::map<std::size_t, std::shared_ptr<const UnitRule>> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto rule = std::make_shared<const UnitRule>(build(n));
    cache.emplace(n, rule);
    return rule;
}

} // namespace crw
