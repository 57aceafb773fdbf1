#include "crw/weights.hpp"

#include "crw/errors.hpp"
#include "crw/normal.hpp"
#include "crw/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace crw {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_delta_min() { return std::log(kDeltaMin); }
double log_delta_max() { return std::log(kDeltaMax); }

// Weight argument without its log(delta)/effect term. The weight of rank k is
// (m / alpha) * sf(base[k] + log(delta) / effect); base is +inf for P = 0.
struct WeightArgs {
    std::vector<double> base;
    double effect;
    double scale; // m / alpha
    std::size_t zero_ranks = 0;
};

WeightArgs weight_args(const std::vector<double>& probs, const WeightConfig& cfg) {
    WeightArgs args;
    args.effect = cfg.mean_effect;
    args.scale = static_cast<double>(cfg.m) / cfg.alpha;
    double shift = -std::log(cfg.alpha);
    if (cfg.mode == WeightMode::binary)
        shift += std::log(static_cast<double>(cfg.m)) - std::log(static_cast<double>(cfg.m1));
    args.base.resize(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] > 0.0) {
            args.base[k] = 0.5 * args.effect + (shift - std::log(probs[k])) / args.effect;
        } else {
            args.base[k] = std::numeric_limits<double>::infinity();
            ++args.zero_ranks;
        }
    }
    return args;
}

struct MeanWeight {
    double value; // mean weight - 1
    double slope; // d(mean weight) / d log(delta)
};

MeanWeight mean_weight(const WeightArgs& args, double log_delta, Execution exec) {
    const double shift = log_delta / args.effect;
    const std::size_t n = args.base.size();
    const double sf_sum = deterministic_sum(n, [&](std::size_t k) { return norm_sf(args.base[k] + shift); }, exec);
    const double pdf_sum = deterministic_sum(n, [&](std::size_t k) { return norm_pdf(args.base[k] + shift); }, exec);
    const double per = args.scale / static_cast<double>(n);
    return {per * sf_sum - 1.0, -per * pdf_sum / args.effect};
}

[[noreturn]] void no_root(const MeanWeight& lo, const MeanWeight& hi) {
    std::ostringstream msg;
    msg << "delta solver: mean weight does not cross 1 on [" << kDeltaMin << ", " << kDeltaMax
        << "] (mean weight - 1 = " << lo.value << " at the low end, " << hi.value << " at the high end)";
    throw SolverError(msg.str(), std::min(std::abs(lo.value), std::abs(hi.value)));
}

// Shrinks [lo, hi] (f(lo) >= 0 >= f(hi)) to adjacent doubles.
double bisect(const WeightArgs& args, double lo, double hi, Execution exec, std::size_t& iterations) {
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        ++iterations;
        const double f = mean_weight(args, mid, exec).value;
        if (f == 0.0) return mid;
        if (f > 0.0) lo = mid; else hi = mid;
    }
    const double flo = std::abs(mean_weight(args, lo, exec).value);
    const double fhi = std::abs(mean_weight(args, hi, exec).value);
    return flo <= fhi ? lo : hi;
}

double newton(const WeightArgs& args, double start, double lo, double hi, Execution exec, std::size_t& iterations) {
    double x = std::clamp(start, lo, hi);
    for (int i = 0; i < 200; ++i) {
        ++iterations;
        const auto mw = mean_weight(args, x, exec);
        if (mw.value == 0.0) return x;
        if (mw.value > 0.0) lo = x; else hi = x;
        double next = mw.slope < 0.0 ? x - mw.value / mw.slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi); // safeguard
        if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) return next;
        if (next <= lo || next >= hi) return x;
        x = next;
    }
    return x;
}

} // namespace

std::string to_string(WeightMode mode) { return mode == WeightMode::binary ? "binary" : "continuous"; }

WeightMode weight_mode_from_string(const std::string& name) {
    if (name == "continuous") return WeightMode::continuous;
    if (name == "binary") return WeightMode::binary;
    throw ConfigError("unknown weight mode '" + name + "' (expected continuous or binary)");
}

std::string to_string(DeltaSolver solver) {
    switch (solver) {
    case DeltaSolver::newton_raphson: return "newton-raphson";
    case DeltaSolver::grid: return "grid";
    case DeltaSolver::bisection: return "bisection";
    }
    return "unknown";
}

void WeightConfig::validate() const {
    if (m == 0) throw ConfigError("weight config needs m >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(mean_effect > 0.0) || !std::isfinite(mean_effect)) throw ConfigError("mean effect must be finite and > 0");
    if (mode == WeightMode::binary && (m1 < 1 || m1 > m)) throw ConfigError("binary mode needs 1 <= m1 <= m");
}

double WeightVector::mean() const {
    if (weights.empty()) return 0.0;
    return std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(weights.size());
}

double weight_at(double rank_prob, double delta, const WeightConfig& cfg) {
    if (!(rank_prob > 0.0)) return 0.0;
    if (delta < 0.0) throw ConfigError("delta must be >= 0");
    const double scale = static_cast<double>(cfg.m) / cfg.alpha;
    if (delta == 0.0) return scale;
    const double e = cfg.mean_effect;
    double log_ratio = std::log(delta) - std::log(cfg.alpha) - std::log(rank_prob);
    if (cfg.mode == WeightMode::binary)
        log_ratio += std::log(static_cast<double>(cfg.m)) - std::log(static_cast<double>(cfg.m1));
    return scale * norm_sf(0.5 * e + log_ratio / e);
}

double uniform_delta(const WeightConfig& cfg) {
    const double m = static_cast<double>(cfg.m);
    const double e = cfg.mean_effect;
    double delta = (cfg.alpha / m) * std::exp(e * (norm_isf(cfg.alpha / m) - 0.5 * e));
    if (cfg.mode == WeightMode::binary) delta *= static_cast<double>(cfg.m1) / m;
    return delta;
}

DeltaSolution solve_delta(const RankDistribution& rank_dist, const WeightConfig& cfg, const DeltaOptions& opts) {
    cfg.validate();
    if (rank_dist.size() != cfg.m)
        throw ConfigError("rank distribution has " + std::to_string(rank_dist.size()) + " ranks but m = " +
                          std::to_string(cfg.m));
    const auto args = weight_args(rank_dist.probs, cfg);
    if (args.zero_ranks == args.base.size()) throw SolverError("every rank probability is zero");

    DeltaSolution sol;
    sol.zero_prob_ranks = args.zero_ranks;
    sol.solver = opts.solver.value_or(cfg.mean_effect >= 1.0 ? DeltaSolver::newton_raphson : DeltaSolver::grid);

    double lo = log_delta_min();
    double hi = log_delta_max();
    const auto at_lo = mean_weight(args, lo, opts.exec);
    const auto at_hi = mean_weight(args, hi, opts.exec);
    if (at_lo.value < 0.0 || at_hi.value > 0.0) no_root(at_lo, at_hi);

    double root = 0.0;
    switch (sol.solver) {
    case DeltaSolver::newton_raphson: {
        const double start = std::log(uniform_delta(cfg));
        root = newton(args, std::isfinite(start) ? start : 0.0, lo, hi, opts.exec, sol.iterations);
        break;
    }
    case DeltaSolver::grid: {
        constexpr std::size_t kGridPoints = 200;
        double prev = lo;
        for (std::size_t i = 1; i < kGridPoints; ++i) {
            const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kGridPoints - 1);
            ++sol.iterations;
            if (mean_weight(args, x, opts.exec).value <= 0.0) {
                lo = prev;
                hi = x;
                break;
            }
            prev = x;
        }
        root = bisect(args, lo, hi, opts.exec, sol.iterations);
        break;
    }
    case DeltaSolver::bisection:
        root = bisect(args, lo, hi, opts.exec, sol.iterations);
        break;
    }

    sol.delta = std::exp(root);
    sol.residual = std::abs(mean_weight(args, root, opts.exec).value);
    if (!(sol.residual <= kDeltaResidualTol)) {
        throw SolverError("delta solver (" + to_string(sol.solver) + ") stopped with residual " +
                              std::to_string(sol.residual) + " after " + std::to_string(sol.iterations) +
                              " iterations",
                          sol.residual);
    }
    return sol;
}

std::pair<WeightVector, DeltaSolution> crw_weights(const RankDistribution& rank_dist, const WeightConfig& cfg,
                                                   const DeltaOptions& opts) {
    const auto sol = solve_delta(rank_dist, cfg, opts);
    WeightVector wv;
    wv.weights.resize(cfg.m);
    parallel_for(cfg.m, [&](std::size_t k) { wv.weights[k] = weight_at(rank_dist.probs[k], sol.delta, cfg); },
                 opts.exec);
    return {std::move(wv), sol};
}

EffectDensity EffectDensity::point_mass(double effect) {
    EffectDensity d;
    d.kind = Kind::point_mass;
    d.mean = effect;
    return d;
}

EffectDensity EffectDensity::truncated_normal(double mean, double sd, std::size_t nodes) {
    EffectDensity d;
    d.kind = Kind::truncated_normal;
    d.mean = mean;
    d.sd = sd;
    d.nodes = nodes;
    return d;
}

namespace {

struct EffectNodes {
    std::vector<double> effect;
    std::vector<double> log_weight;
};

EffectNodes effect_nodes(const EffectDensity& density) {
    EffectNodes out;
    if (density.kind == EffectDensity::Kind::point_mass) {
        if (!(density.mean > 0.0)) throw ConfigError("point-mass effect must be > 0");
        out.effect = {density.mean};
        out.log_weight = {0.0};
        return out;
    }
    if (!(density.sd > 0.0)) throw ConfigError("truncated-normal effect density needs sd > 0");
    const auto rule = gauss_legendre_unit(density.nodes);
    // inverse CDF of N(mean, sd^2) restricted to (0, inf), through its survival function
    const double tail = norm_sf(-density.mean / density.sd);
    for (std::size_t j = 0; j < rule->size(); ++j) {
        const double e = density.mean + density.sd * norm_isf(rule->upper[j] * tail);
        if (!(e > 0.0) || !std::isfinite(e)) continue;
        out.effect.push_back(e);
        out.log_weight.push_back(std::log(rule->weight[j]));
    }
    if (out.effect.empty()) throw SolverError("effect quadrature produced no finite nodes");
    return out;
}

// Solves log sum_j exp(c[j] + z * e[j]) = target for z; the left side is
// convex and increasing in z because every e[j] > 0.
struct InnerRoot {
    double z;
    double slope; // d(log G)/dz at the root
};

InnerRoot solve_inner(const std::vector<double>& c, const std::vector<double>& e, double target) {
    const auto eval = [&](double z, double& f, double& df) {
        double mx = kNegInf;
        for (std::size_t j = 0; j < c.size(); ++j) mx = std::max(mx, c[j] + z * e[j]);
        double s = 0.0;
        double se = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double w = std::exp(c[j] + z * e[j] - mx);
            s += w;
            se += w * e[j];
        }
        f = mx + std::log(s) - target;
        df = se / s;
    };
    if (c.size() == 1) return {(target - c[0]) / e[0], e[0]};
    // bracket
    double lo = -1.0;
    double hi = 1.0;
    double f = 0.0;
    double df = 0.0;
    // |z| beyond kInnerLimit pins the weight at 0 or m / alpha
    constexpr double kInnerLimit = 1e4;
    for (eval(lo, f, df); f > 0.0; eval(lo, f, df)) {
        if (lo < -kInnerLimit) return {lo, df};
        lo *= 2.0;
    }
    for (eval(hi, f, df); f < 0.0; eval(hi, f, df)) {
        if (hi > kInnerLimit) return {hi, df};
        hi *= 2.0;
    }
    double z = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        eval(z, f, df);
        if (f == 0.0) break;
        if (f < 0.0) lo = z; else hi = z;
        double next = z - f / df;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - z) <= 1e-14 * std::max(1.0, std::abs(z))) {
            z = next;
            break;
        }
        z = next;
    }
    eval(z, f, df);
    return {z, df};
}

} // namespace

std::pair<WeightVector, DeltaSolution> exact_weights(const RankProbabilityFn& rank_at, const EffectDensity& density,
                                                     const WeightConfig& cfg, Execution exec) {
    cfg.validate();
    const auto nodes = effect_nodes(density);
    const std::size_t m = cfg.m;
    const std::size_t n_eff = nodes.effect.size();

    // c[k][j] = log f_j - e_j^2 / 2 + log P(r_k | e_j)
    std::vector<std::vector<double>> coef(m, std::vector<double>(n_eff, kNegInf));
    for (std::size_t j = 0; j < n_eff; ++j) {
        const auto dist = rank_at(nodes.effect[j]);
        if (dist.size() != m)
            throw ConfigError("rank distribution for effect " + std::to_string(nodes.effect[j]) + " has " +
                              std::to_string(dist.size()) + " ranks, expected " + std::to_string(m));
        const double base = nodes.log_weight[j] - 0.5 * nodes.effect[j] * nodes.effect[j];
        for (std::size_t k = 0; k < m; ++k)
            if (dist.probs[k] > 0.0) coef[k][j] = base + std::log(dist.probs[k]);
    }
    // drop P = 0 terms per rank
    std::vector<std::vector<double>> c(m);
    std::vector<std::vector<double>> e(m);
    std::size_t zero_ranks = 0;
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < n_eff; ++j) {
            if (coef[k][j] == kNegInf) continue;
            c[k].push_back(coef[k][j]);
            e[k].push_back(nodes.effect[j]);
        }
        if (c[k].empty()) ++zero_ranks;
    }
    if (zero_ranks == m) throw SolverError("exact weights: every rank probability is zero");

    const double scale = static_cast<double>(m) / cfg.alpha;
    const double log_alpha = std::log(cfg.alpha);
    std::vector<double> w(m);
    std::vector<double> dw(m);
    std::vector<int> failed(m, 0);
    // sum_k w_k - m and its derivative in log(delta)
    const auto total = [&](double log_delta, double& f, double& df) {
        const double target = log_delta - log_alpha;
        parallel_for(m, [&](std::size_t k) {
            if (c[k].empty()) {
                w[k] = 0.0;
                dw[k] = 0.0;
                return;
            }
            const auto root = solve_inner(c[k], e[k], target);
            if (!std::isfinite(root.z) || !(root.slope > 0.0)) failed[k] = 1;
            w[k] = scale * norm_sf(root.z);
            dw[k] = -scale * norm_pdf(root.z) / root.slope;
        }, exec);
        for (std::size_t k = 0; k < m; ++k)
            if (failed[k]) throw SolverError("exact weights: inner root-finding failed at rank " + std::to_string(k + 1));
        f = deterministic_sum(m, [&](std::size_t k) { return w[k]; }, exec) - static_cast<double>(m);
        df = deterministic_sum(m, [&](std::size_t k) { return dw[k]; }, exec);
        if (!std::isfinite(f)) throw SolverError("exact weights: non-finite weight sum");
    };

    DeltaSolution sol;
    sol.solver = DeltaSolver::bisection;
    sol.zero_prob_ranks = zero_ranks;
    double lo = log_delta_min();
    double hi = log_delta_max();
    double f = 0.0;
    double df = 0.0;
    total(lo, f, df);
    if (f < 0.0) throw SolverError("exact weights: weight sum below m at the smallest delta", std::abs(f) / m);
    total(hi, f, df);
    if (f > 0.0) throw SolverError("exact weights: weight sum above m at the largest delta", std::abs(f) / m);

    // bisection, accelerated by Newton steps that stay inside the bracket
    double x = std::clamp(std::log(uniform_delta(cfg)), lo, hi);
    for (int i = 0; i < 300; ++i) {
        ++sol.iterations;
        total(x, f, df);
        if (std::abs(f) <= 1e-12 * static_cast<double>(m)) break;
        if (f > 0.0) lo = x; else hi = x;
        double next = df < 0.0 ? x - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x || hi - lo <= 1e-15 * std::max(1.0, std::abs(x))) break;
        x = next;
    }
    total(x, f, df);
    sol.delta = std::exp(x);
    sol.residual = std::abs(f) / static_cast<double>(m);
    if (!(sol.residual <= 1e-4))
        throw SolverError("exact weights: normalization residual " + std::to_string(sol.residual), sol.residual);
    return {WeightVector{w}, sol};
}

double average_power(const WeightVector& weights, const RankDistribution& rank_dist, const WeightConfig& cfg) {
    const std::size_t m = weights.size();
    if (rank_dist.size() != m) throw ConfigError("weights and rank distribution differ in length");
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (!(weights.weights[k] > 0.0)) continue;
        const double q = std::min(1.0, cfg.alpha * weights.weights[k] / static_cast<double>(m));
        total += norm_sf(norm_isf(q) - cfg.mean_effect) * rank_dist.probs[k];
    }
    return total;
}

WeightVector rdw_weights(std::span<const double> effect_sizes, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const std::size_t m = effect_sizes.size();
    const double scale = static_cast<double>(m) / alpha;
    std::size_t positive = 0;
    for (double e : effect_sizes)
        if (e > 0.0) ++positive;
    if (positive == 0) throw DegenerateInput("all effect sizes are zero; use unit weights");

    const auto sum_at = [&](double c) {
        double s = 0.0;
        for (double e : effect_sizes)
            if (e > 0.0) s += scale * norm_sf(0.5 * e + c / e);
        return s - static_cast<double>(m);
    };
    double lo = -1.0;
    double hi = 1.0;
    while (sum_at(lo) < 0.0) lo *= 2.0;
    while (sum_at(hi) > 0.0) hi *= 2.0;
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (sum_at(mid) > 0.0) lo = mid; else hi = mid;
    }
    const double c = std::abs(sum_at(lo)) <= std::abs(sum_at(hi)) ? lo : hi;
    WeightVector wv;
    wv.weights.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double e = effect_sizes[i];
        wv.weights[i] = e > 0.0 ? scale * norm_sf(0.5 * e + c / e) : 0.0;
    }
    return wv;
}

} // namespace crw
