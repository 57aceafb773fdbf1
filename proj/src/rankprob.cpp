#include "crw/rankprob.hpp"

#include "crw/errors.hpp"
#include "crw/normal.hpp"
#include "rankprob_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crw {

void RankModel::validate() const {
    if (m() == 0) throw ConfigError("rank model needs at least one test (m0 + m1 >= 1)");
    if (!(tau_alt >= 0.0) || !std::isfinite(tau_alt)) throw ConfigError("tau_alt must be finite and >= 0");
    if (!(tau_query >= 0.0) || !std::isfinite(tau_query)) throw ConfigError("tau_query must be finite and >= 0");
    if (query_is_alternative() && m1 == 0)
        throw ConfigError("query has a positive effect but m1 = 0: no alternative slot to occupy");
    if (!query_is_alternative() && m0 == 0)
        throw ConfigError("query is null (tau_query = 0) but m0 = 0");
}

std::string to_string(RankMethod method) {
    switch (method) {
    case RankMethod::exact_convolution: return "exact";
    case RankMethod::normal_approx: return "approx";
    case RankMethod::monte_carlo: return "mc";
    case RankMethod::grid: return "grid";
    }
    return "unknown";
}

RankMethod rank_method_from_string(const std::string& name) {
    if (name == "exact") return RankMethod::exact_convolution;
    if (name == "approx") return RankMethod::normal_approx;
    if (name == "mc") return RankMethod::monte_carlo;
    if (name == "grid") return RankMethod::grid;
    throw ConfigError("unknown rank-probability method '" + name + "' (expected exact, approx, mc or grid)");
}

double null_cdf_at(double t) { return norm_cdf(t); }

double alt_cdf_at(double t, double tau_alt) { return norm_cdf(t - tau_alt); }

std::size_t default_node_count(std::size_t m) {
    const auto scaled = static_cast<std::size_t>(std::ceil(8.0 * std::sqrt(static_cast<double>(m))));
    return std::max<std::size_t>(256, scaled);
}

namespace {

std::size_t node_count(const RankModel& model, const RankOptions& opts) {
    return opts.nodes > 0 ? opts.nodes : default_node_count(model.m());
}

void renormalize(std::vector<double>& probs) {
    for (auto& p : probs) p = std::max(p, 0.0);
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (total > 0.0)
        for (auto& p : probs) p /= total;
}

std::vector<std::size_t> all_ranks(std::size_t m) {
    std::vector<std::size_t> ranks(m);
    std::iota(ranks.begin(), ranks.end(), std::size_t{1});
    return ranks;
}

std::vector<double> normal_at_ranks(const RankModel& model, const detail::NodeSet& nodes,
                                    const std::vector<std::size_t>& ranks, Execution exec) {
    return exec == Execution::parallel ? detail::normal_rank_omp(model, nodes, ranks)
                                       : detail::normal_rank_serial(model, nodes, ranks);
}

// Fritsch-Carlson slopes for a shape-preserving piecewise cubic.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> h(n - 1);
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        delta[i] = (y[i + 1] - y[i]) / h[i];
    }
    std::vector<double> d(n, 0.0);
    if (n == 2) {
        d[0] = d[1] = delta[0];
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) continue;
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    const auto end_slope = [](double h0, double h1, double del0, double del1) {
        double s = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
        if (s * del0 <= 0.0) {
            s = 0.0;
        } else if (del0 * del1 <= 0.0 && std::abs(s) > 3.0 * std::abs(del0)) {
            s = 3.0 * del0;
        }
        return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
}

} // namespace

RankDistribution rank_prob_exact(const RankModel& model, const RankOptions& opts) {
    model.validate();
    if (model.m() > kExactRankCap)
        throw CapacityError("exact rank convolution supports m <= " + std::to_string(kExactRankCap) +
                            " (got m = " + std::to_string(model.m()) + "); use the approx or grid method");
    const std::size_t n = node_count(model, opts);
    const auto nodes = detail::pooled_nodes(model, n);
    RankDistribution out;
    out.method = RankMethod::exact_convolution;
    out.meta.nodes = n;
    out.probs = opts.exec == Execution::parallel ? detail::exact_rank_omp(model, nodes)
                                                  : detail::exact_rank_serial(model, nodes);
    renormalize(out.probs);
    return out;
}

RankDistribution rank_prob_normal_approx(const RankModel& model, const RankOptions& opts) {
    model.validate();
    const std::size_t n = node_count(model, opts);
    const auto nodes = detail::pooled_nodes(model, n);
    RankDistribution out;
    out.method = RankMethod::normal_approx;
    out.meta.nodes = n;
    if (model.m() < kNormalApproxFloor)
        out.meta.warnings.push_back("normal approximation used with m = " + std::to_string(model.m()) +
                                    " < " + std::to_string(kNormalApproxFloor));
    out.probs = normal_at_ranks(model, nodes, all_ranks(model.m()), opts.exec);
    renormalize(out.probs);
    return out;
}

RankDistribution rank_prob_mc(const RankModel& model, std::size_t draws, std::uint64_t seed, Execution exec) {
    model.validate();
    if (draws < 1000) throw ConfigError("Monte Carlo rank probabilities need at least 1000 draws");
    if (model.m() > kExactRankCap)
        throw CapacityError("Monte Carlo rank probabilities support m <= " + std::to_string(kExactRankCap));
    const auto acc = exec == Execution::parallel ? detail::mc_rank_omp(model, draws, seed)
                                                 : detail::mc_rank_serial(model, draws, seed);
    const double n = static_cast<double>(draws);
    RankDistribution out;
    out.method = RankMethod::monte_carlo;
    out.meta.draws = draws;
    out.meta.seed = seed;
    out.probs.resize(model.m());
    out.std_errors.resize(model.m());
    for (std::size_t k = 0; k < model.m(); ++k) {
        const double mean = acc.sum[k] / n;
        const double var = std::max(0.0, (acc.sum_sq[k] / n - mean * mean) * n / (n - 1.0));
        out.probs[k] = mean;
        out.std_errors[k] = std::sqrt(var / n);
    }
    renormalize(out.probs);
    return out;
}

RankDistribution rank_prob_grid(const RankModel& model, std::size_t grid_size, const RankOptions& opts) {
    model.validate();
    if (grid_size < 64) throw ConfigError("grid mode needs grid_size >= 64");
    const std::size_t m = model.m();
    if (m <= grid_size) {
        auto full = rank_prob_normal_approx(model, opts);
        full.meta.grid_size = grid_size;
        return full;
    }
    // half the points evenly spaced, half log-spaced to resolve the top ranks
    std::vector<std::size_t> ranks;
    const std::size_t half = grid_size / 2;
    const double span = static_cast<double>(m - 1);
    for (std::size_t i = 0; i < grid_size - half; ++i) {
        const double pos = 1.0 + static_cast<double>(i) * span / static_cast<double>(grid_size - half - 1);
        ranks.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
    for (std::size_t i = 0; i < half; ++i) {
        const double pos = std::exp(static_cast<double>(i) * std::log(static_cast<double>(m)) / static_cast<double>(half - 1));
        ranks.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(pos)), 1, m));
    }
    std::sort(ranks.begin(), ranks.end());
    ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());

    const std::size_t n = node_count(model, opts);
    const auto nodes = detail::pooled_nodes(model, n);
    const auto values = normal_at_ranks(model, nodes, ranks, opts.exec);

    std::vector<double> x(ranks.begin(), ranks.end());
    const auto slopes = pchip_slopes(x, values);
    RankDistribution out;
    out.method = RankMethod::grid;
    out.meta.nodes = n;
    out.meta.grid_size = grid_size;
    out.probs.assign(m, 0.0);
    for (std::size_t i = 0; i + 1 < ranks.size(); ++i) {
        const double h = x[i + 1] - x[i];
        for (std::size_t k = ranks[i]; k < ranks[i + 1]; ++k) {
            const double s = (static_cast<double>(k) - x[i]) / h;
            const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            const double h10 = s * (1.0 - s) * (1.0 - s);
            const double h01 = s * s * (3.0 - 2.0 * s);
            const double h11 = s * s * (s - 1.0);
            out.probs[k - 1] = h00 * values[i] + h10 * h * slopes[i] + h01 * values[i + 1] + h11 * h * slopes[i + 1];
        }
    }
    out.probs[m - 1] = values.back();
    renormalize(out.probs);
    return out;
}

RankDistribution rank_prob(const RankModel& model, const RankRequest& request) {
    switch (request.method) {
    case RankMethod::exact_convolution: return rank_prob_exact(model, request.options);
    case RankMethod::normal_approx: return rank_prob_normal_approx(model, request.options);
    case RankMethod::monte_carlo: return rank_prob_mc(model, request.draws, request.seed, request.options.exec);
    case RankMethod::grid: return rank_prob_grid(model, request.grid_size, request.options);
    }
    throw ConfigError("unknown rank method");
}

RankRequest auto_rank_request(std::size_t m) {
    RankRequest req;
    if (m <= 200) {
        req.method = RankMethod::exact_convolution;
    } else if (m <= 4096) {
        req.method = RankMethod::normal_approx;
    } else {
        req.method = RankMethod::grid;
        req.grid_size = 512;
    }
    return req;
}

} // namespace crw
