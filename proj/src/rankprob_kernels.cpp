#include "rankprob_kernels.hpp"

#include "crw/errors.hpp"
#include "crw/normal.hpp"
#include "crw/quadrature.hpp"
#include "crw/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace crw::detail {

namespace {

constexpr double kLogPmfCut = 45.0; // drop terms below exp(-45) of the mode

struct Component {
    double count;
    double shift;
};

std::array<Component, 3> pooled_components(const RankModel& model) {
    return {Component{static_cast<double>(model.null_competitors()), 0.0},
            Component{static_cast<double>(model.alt_competitors()), model.tau_alt},
            Component{1.0, model.tau_query}};
}

// Solves log H(t) = log(lower) when lower <= 1/2, else log S(t) = log(upper),
// with H the pooled CDF and S = 1 - H.
double invert_pooled(const std::array<Component, 3>& comps, double m, double lower, double upper) {
    const bool use_lower = lower <= 0.5;
    const double target = std::log(use_lower ? lower : upper);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : comps) {
        if (c.count <= 0.0) continue;
        lo = std::min(lo, c.shift - 15.0);
        hi = std::max(hi, c.shift + 15.0);
    }
    const auto eval = [&](double t, double& f, double& df) {
        double tail = 0.0;
        double dens = 0.0;
        for (const auto& c : comps) {
            if (c.count <= 0.0) continue;
            tail += c.count * (use_lower ? norm_cdf(t - c.shift) : norm_sf(t - c.shift));
            dens += c.count * norm_pdf(t - c.shift);
        }
        tail /= m;
        dens /= m;
        f = std::log(tail) - target;
        df = (use_lower ? dens : -dens) / tail;
        if (!use_lower) f = -f, df = -df; // make f increasing in t
    };
    double t = 0.5 * (lo + hi);
    {
        double guess = use_lower ? norm_ppf(lower) : norm_isf(upper);
        double mean_shift = 0.0;
        for (const auto& c : comps) mean_shift += c.count * c.shift;
        guess += mean_shift / m;
        if (guess > lo && guess < hi) t = guess;
    }
    for (int iter = 0; iter < 200; ++iter) {
        double f = 0.0;
        double df = 0.0;
        eval(t, f, df);
        if (!std::isfinite(f)) {
            // tail underflow; f is increasing so the sign says which side
            if (f < 0.0) lo = t; else hi = t;
            t = 0.5 * (lo + hi);
            continue;
        }
        if (f == 0.0) return t;
        if (f < 0.0) lo = t; else hi = t;
        double next = t - f / df;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-14 * (1.0 + std::abs(t))) return next;
        t = next;
    }
    return t;
}

} // namespace

NodeSet values_as_nodes(const RankModel& model, const std::vector<double>& t) {
    NodeSet nodes;
    nodes.t = t;
    nodes.weight.assign(t.size(), 1.0);
    nodes.q0.resize(t.size());
    nodes.p0.resize(t.size());
    nodes.q1.resize(t.size());
    nodes.p1.resize(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
        nodes.q0[j] = norm_sf(t[j]);
        nodes.p0[j] = norm_cdf(t[j]);
        nodes.q1[j] = norm_sf(t[j] - model.tau_alt);
        nodes.p1[j] = norm_cdf(t[j] - model.tau_alt);
    }
    return nodes;
}

NodeSet pooled_nodes(const RankModel& model, std::size_t n) {
    const auto rule = gauss_legendre_unit(n);
    const auto comps = pooled_components(model);
    const double m = static_cast<double>(model.m());
    std::vector<double> t(n);
    for (std::size_t j = 0; j < n; ++j) t[j] = invert_pooled(comps, m, rule->lower[j], rule->upper[j]);
    NodeSet nodes = values_as_nodes(model, t);
    for (std::size_t j = 0; j < n; ++j) {
        // query density over pooled density, in logs to survive the tails
        const double lq = log_norm_pdf(t[j] - model.tau_query);
        double denom = 0.0;
        for (const auto& c : comps) {
            if (c.count <= 0.0) continue;
            denom += c.count * std::exp(log_norm_pdf(t[j] - c.shift) - lq);
        }
        nodes.weight[j] = rule->weight[j] * m / denom;
    }
    return nodes;
}

std::vector<double> log_factorials(std::size_t n) {
    std::vector<double> lf(n + 1, 0.0);
    for (std::size_t k = 2; k <= n; ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
    return lf;
}

TrimmedPmf binomial_pmf(std::size_t n, double q, double p, const std::vector<double>& lfact) {
    if (n == 0 || q <= 0.0) return {0, {1.0}};
    if (p <= 0.0) return {n, {1.0}};
    const double lq = std::log(q);
    const double lp = std::log(p);
    const auto logpmf = [&](std::size_t k) {
        return lfact[n] - lfact[k] - lfact[n - k] + static_cast<double>(k) * lq +
               static_cast<double>(n - k) * lp;
    };
    auto mode = static_cast<std::size_t>(std::floor((static_cast<double>(n) + 1.0) * q));
    mode = std::min(mode, n);
    const double lmax = logpmf(mode);
    std::size_t first = mode;
    while (first > 0 && logpmf(first - 1) > lmax - kLogPmfCut) --first;
    std::size_t last = mode;
    while (last < n && logpmf(last + 1) > lmax - kLogPmfCut) ++last;
    TrimmedPmf pmf;
    pmf.first = first;
    pmf.mass.resize(last - first + 1);
    for (std::size_t k = first; k <= last; ++k) pmf.mass[k - first] = std::exp(logpmf(k));
    return pmf;
}

void add_convolution(const TrimmedPmf& a, const TrimmedPmf& b, double scale, std::vector<double>& out) {
    const std::size_t offset = a.first + b.first;
    for (std::size_t i = 0; i < a.mass.size(); ++i) {
        const double ai = scale * a.mass[i];
        double* dst = out.data() + offset + i;
        for (std::size_t j = 0; j < b.mass.size(); ++j) dst[j] += ai * b.mass[j];
    }
}

namespace {

void exact_node(const RankModel& model, const NodeSet& nodes, std::size_t j,
                const std::vector<double>& lfact, std::vector<double>& out) {
    const auto a = binomial_pmf(model.null_competitors(), nodes.q0[j], nodes.p0[j], lfact);
    const auto b = binomial_pmf(model.alt_competitors(), nodes.q1[j], nodes.p1[j], lfact);
    add_convolution(a, b, nodes.weight[j], out);
}

} // namespace

std::vector<double> exact_rank_serial(const RankModel& model, const NodeSet& nodes) {
    const auto lfact = log_factorials(model.m());
    const std::size_t m = model.m();
    std::vector<double> out(m, 0.0);
    std::vector<double> part(m);
    // same chunked summation order as the OpenMP kernel
    for (std::size_t c = 0; c < kReductionChunks; ++c) {
        const auto r = chunk_range(nodes.size(), c);
        if (r.begin == r.end) continue;
        std::fill(part.begin(), part.end(), 0.0);
        for (std::size_t j = r.begin; j < r.end; ++j) exact_node(model, nodes, j, lfact, part);
        for (std::size_t k = 0; k < m; ++k) out[k] += part[k];
    }
    return out;
}

std::vector<double> exact_rank_omp(const RankModel& model, const NodeSet& nodes) {
    const auto lfact = log_factorials(model.m());
    const std::size_t m = model.m();
    std::vector<std::vector<double>> partial(kReductionChunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t c = 0; c < kReductionChunks; ++c) {
        const auto r = chunk_range(nodes.size(), c);
        if (r.begin == r.end) continue;
        partial[c].assign(m, 0.0);
        for (std::size_t j = r.begin; j < r.end; ++j) exact_node(model, nodes, j, lfact, partial[c]);
    }
    std::vector<double> out(m, 0.0);
    for (const auto& part : partial) {
        if (part.empty()) continue;
        for (std::size_t k = 0; k < m; ++k) out[k] += part[k];
    }
    return out;
}

namespace {

struct NormalNode {
    double mu;
    double inv_two_var; // 0 marks a degenerate (zero-variance) node
    double coef;
    double reach;       // |k - mu| beyond which the term underflows
};

std::vector<NormalNode> normal_nodes(const RankModel& model, const NodeSet& nodes) {
    const double n0 = static_cast<double>(model.null_competitors());
    const double n1 = static_cast<double>(model.alt_competitors());
    std::vector<NormalNode> out(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        // mean and variance of 1 + A + B, A ~ Bin(n0, q0), B ~ Bin(n1, q1)
        const double mu = 1.0 + n0 * nodes.q0[j] + n1 * nodes.q1[j];
        const double var = n0 * nodes.q0[j] * nodes.p0[j] + n1 * nodes.q1[j] * nodes.p1[j];
        if (var < 1e-12) {
            out[j] = {mu, 0.0, nodes.weight[j], 0.5};
        } else {
            out[j] = {mu, 0.5 / var, nodes.weight[j] / std::sqrt(2.0 * std::numbers::pi * var),
                      std::sqrt(2.0 * 745.0 * var)};
        }
    }
    return out;
}

double normal_rank_at(const std::vector<NormalNode>& nn, std::size_t rank) {
    const double k = static_cast<double>(rank);
    double s = 0.0;
    for (const auto& n : nn) {
        const double d = k - n.mu;
        if (std::abs(d) > n.reach) continue;
        if (n.inv_two_var == 0.0) {
            s += n.coef;
        } else {
            s += n.coef * std::exp(-d * d * n.inv_two_var);
        }
    }
    return s;
}

} // namespace

std::vector<double> normal_rank_serial(const RankModel& model, const NodeSet& nodes,
                                       const std::vector<std::size_t>& ranks) {
    const auto nn = normal_nodes(model, nodes);
    std::vector<double> out(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) out[i] = normal_rank_at(nn, ranks[i]);
    return out;
}

std::vector<double> normal_rank_omp(const RankModel& model, const NodeSet& nodes,
                                    const std::vector<std::size_t>& ranks) {
    const auto nn = normal_nodes(model, nodes);
    std::vector<double> out(ranks.size());
    const std::size_t n = ranks.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) out[i] = normal_rank_at(nn, ranks[i]);
    return out;
}

namespace {

void mc_chunk(const RankModel& model, std::size_t draws, std::uint64_t seed, std::size_t chunk,
              const std::vector<double>& lfact, McAccumulator& acc) {
    const std::size_t m = model.m();
    acc.sum.assign(m, 0.0);
    acc.sum_sq.assign(m, 0.0);
    const auto r = chunk_range(draws, chunk);
    Rng rng(seed, chunk);
    std::vector<double> pmf(m, 0.0);
    for (std::size_t d = r.begin; d < r.end; ++d) {
        const double t = model.tau_query + rng.normal();
        const auto a = binomial_pmf(model.null_competitors(), norm_sf(t), norm_cdf(t), lfact);
        const auto b = binomial_pmf(model.alt_competitors(), norm_sf(t - model.tau_alt),
                                    norm_cdf(t - model.tau_alt), lfact);
        add_convolution(a, b, 1.0, pmf);
        const std::size_t lo = a.first + b.first;
        const std::size_t hi = std::min(m, lo + a.mass.size() + b.mass.size() - 1);
        for (std::size_t k = lo; k < hi; ++k) {
            acc.sum[k] += pmf[k];
            acc.sum_sq[k] += pmf[k] * pmf[k];
            pmf[k] = 0.0;
        }
    }
}

McAccumulator combine(const std::vector<McAccumulator>& parts, std::size_t m) {
    McAccumulator total{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
    for (const auto& p : parts) {
        for (std::size_t k = 0; k < m; ++k) {
            total.sum[k] += p.sum[k];
            total.sum_sq[k] += p.sum_sq[k];
        }
    }
    return total;
}

} // namespace

McAccumulator mc_rank_serial(const RankModel& model, std::size_t draws, std::uint64_t seed) {
    const auto lfact = log_factorials(model.m());
    std::vector<McAccumulator> parts(kReductionChunks);
    for (std::size_t c = 0; c < kReductionChunks; ++c) mc_chunk(model, draws, seed, c, lfact, parts[c]);
    return combine(parts, model.m());
}

McAccumulator mc_rank_omp(const RankModel& model, std::size_t draws, std::uint64_t seed) {
    const auto lfact = log_factorials(model.m());
    std::vector<McAccumulator> parts(kReductionChunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t c = 0; c < kReductionChunks; ++c) mc_chunk(model, draws, seed, c, lfact, parts[c]);
    return combine(parts, model.m());
}

} // namespace crw::detail
