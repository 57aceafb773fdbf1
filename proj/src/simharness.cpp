#include "crw/simharness.hpp"

#include "crw/errors.hpp"
#include "crw/normal.hpp"
#include "crw/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace crw {

std::string to_string(EffectModel model) { return model == EffectModel::normal ? "normal" : "point-mass"; }

EffectModel effect_model_from_string(const std::string& name) {
    if (name == "point-mass") return EffectModel::point_mass;
    if (name == "normal") return EffectModel::normal;
    throw ConfigError("unknown effect model '" + name + "' (expected point-mass or normal)");
}

std::string to_string(SimMethod method) {
    switch (method) {
    case SimMethod::crw: return "crw";
    case SimMethod::bh: return "bh";
    case SimMethod::rdw: return "rdw";
    case SimMethod::external: return "external";
    }
    return "unknown";
}

SimMethod sim_method_from_string(const std::string& name) {
    if (name == "crw") return SimMethod::crw;
    if (name == "bh") return SimMethod::bh;
    if (name == "rdw") return SimMethod::rdw;
    if (name == "external" || name == "external-weights") return SimMethod::external;
    throw ConfigError("unknown simulation method '" + name + "'");
}

void SimConfig::validate() const {
    if (m < 10) throw ConfigError("simulation needs m >= 10");
    if (replicates < 1) throw ConfigError("simulation needs at least one replicate");
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw ConfigError("pi0 must lie in [0, 1]");
    if (!(noise_cv >= 0.0)) throw ConfigError("noise_cv must be >= 0");
    if (n_groups < 1) throw ConfigError("n_groups must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
    if (!std::isfinite(mu_eps)) throw ConfigError("mu_eps must be finite");
}

SimDataset generate_dataset(const SimConfig& cfg, std::size_t replicate) {
    cfg.validate();
    Rng rng(cfg.seed, replicate);
    const std::size_t m0 = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.m) * cfg.pi0));
    SimDataset ds;
    ds.records.resize(cfg.m);
    ds.truth.resize(cfg.m);
    ds.test_effect.resize(cfg.m);
    ds.covariate_effect.resize(cfg.m);
    const double shared = cfg.rho > 0.0 ? rng.normal() : 0.0;
    const double own_sd = std::sqrt(1.0 - cfg.rho);
    const double shared_sd = std::sqrt(cfg.rho);
    for (std::size_t i = 0; i < cfg.m; ++i) {
        const bool alt = i >= m0;
        double tau = 0.0;
        double eps = 0.0;
        if (alt) {
            tau = cfg.effect_model == EffectModel::normal ? rng.normal(cfg.mu_eps, 1.0) : cfg.mu_eps;
            eps = tau;
            if (cfg.noise_cv > 0.0) eps = std::max(0.0, rng.normal(tau, cfg.noise_cv * std::abs(tau)));
        }
        const double stat = eps + shared_sd * shared + own_sd * rng.normal();
        const double covariate = tau + rng.normal();
        auto& rec = ds.records[i];
        rec.id = std::to_string(i);
        rec.test_stat = stat;
        rec.pvalue = norm_sf(stat);
        rec.covariate = covariate;
        rec.truth = alt ? Truth::alternative : Truth::null;
        ds.truth[i] = *rec.truth;
        ds.test_effect[i] = eps;
        ds.covariate_effect[i] = tau;
    }
    rank_by_covariate(ds.records);
    return ds;
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe out;
    if (v.empty()) return out;
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    double s2 = 0.0;
    for (double x : v) {
        s += x;
        s2 += x * x;
    }
    out.mean = s / n;
    if (v.size() > 1) out.se = std::sqrt(std::max(0.0, (s2 / n - out.mean * out.mean) * n / (n - 1.0)) / n);
    return out;
}

// replicate-level loops own one result slot each, so the aggregate does
// not depend on scheduling
template <class F>
void for_replicates(std::size_t n, Execution exec, F&& f) {
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::size_t r = 0; r < n; ++r) f(r);
    } else {
        for (std::size_t r = 0; r < n; ++r) f(r);
    }
}

} // namespace

std::vector<DilutionRecord> run_dilution_study(const DilutionGrid& grid, const SimConfig& base, Execution exec) {
    if (base.n_groups < 2) throw ConfigError("dilution study needs n_groups >= 2");
    std::vector<DilutionRecord> out;
    for (double pi0 : grid.pi0) {
        for (double mu : grid.mu_eps) {
            SimConfig cfg = base;
            cfg.pi0 = pi0;
            cfg.mu_eps = mu;
            cfg.validate();
            std::vector<double> frac(cfg.replicates);
            std::vector<double> eff(cfg.replicates);
            const std::size_t top = cfg.m / cfg.n_groups;
            for_replicates(cfg.replicates, exec, [&](std::size_t r) {
                const auto ds = generate_dataset(cfg, r);
                std::size_t alts = 0;
                double effect = 0.0;
                for (std::size_t i = 0; i < cfg.m; ++i) {
                    if (ds.records[i].rank > top) continue;
                    if (ds.truth[i] == Truth::alternative) ++alts;
                    effect += ds.test_effect[i];
                }
                frac[r] = static_cast<double>(alts) / static_cast<double>(top);
                eff[r] = effect / static_cast<double>(top);
            });
            const auto f = mean_se(frac);
            const auto e = mean_se(eff);
            out.push_back({pi0, mu, f.mean, f.se, e.mean, e.se, cfg.replicates});
        }
    }
    return out;
}

WeightVector rdw_group_weights(const std::vector<TestRecord>& records, std::size_t n_groups, double alpha) {
    const std::size_t m = records.size();
    std::vector<double> group_sum(n_groups, 0.0);
    std::vector<std::size_t> group_n(n_groups, 0);
    const auto group_of = [&](std::size_t rank) { return (rank - 1) * n_groups / m; };
    for (const auto& rec : records) {
        const std::size_t g = group_of(rec.rank);
        group_sum[g] += std::max(0.0, rec.test_stat.value_or(norm_isf(rec.pvalue)));
        ++group_n[g];
    }
    // effects indexed by rank
    std::vector<double> effects(m);
    for (std::size_t k = 1; k <= m; ++k) {
        const std::size_t g = group_of(k);
        effects[k - 1] = group_sum[g] / static_cast<double>(group_n[g]);
    }
    try {
        return rdw_weights(effects, alpha);
    } catch (const DegenerateInput&) {
        return WeightVector{std::vector<double>(m, 1.0)};
    }
}

std::vector<PowerRecord> run_power_comparison(const PowerGrid& grid, const SimConfig& base, const PowerOptions& opts,
                                              Execution exec) {
    WeightVector external;
    const bool want_external =
        std::find(opts.methods.begin(), opts.methods.end(), SimMethod::external) != opts.methods.end();
    if (want_external) {
        if (!opts.external_weights) throw ConfigError("external-weights method selected but no weights supplied");
        external = *opts.external_weights;
        const double mean = external.mean();
        if (!(mean > 0.0)) throw ConfigError("external weights must have a positive mean");
        for (auto& w : external.weights) w /= mean;
    }

    // (method, procedure) slots scored per replicate
    struct Slot {
        SimMethod method;
        Procedure procedure;
    };
    std::vector<Slot> slots;
    for (auto method : opts.methods) {
        if (method == SimMethod::bh) {
            slots.push_back({method, Procedure::bh});
        } else {
            slots.push_back({method, Procedure::weighted_bonferroni});
            slots.push_back({method, Procedure::weighted_bh});
        }
    }

    std::vector<PowerRecord> out;
    for (double pi0 : grid.pi0) {
        for (double mu : grid.mu_eps) {
            for (double cv : grid.noise_cv) {
                SimConfig cfg = base;
                cfg.pi0 = pi0;
                cfg.mu_eps = mu;
                cfg.noise_cv = cv;
                cfg.validate();
                if (want_external && external.size() != cfg.m)
                    throw ConfigError("external weights have " + std::to_string(external.size()) +
                                      " entries but m = " + std::to_string(cfg.m));
                const std::size_t n_rep = cfg.replicates;
                std::vector<std::vector<ReplicateOutcome>> outcomes(slots.size(), std::vector<ReplicateOutcome>(n_rep));
                std::vector<char> failed(n_rep, 0);

                for_replicates(n_rep, exec, [&](std::size_t r) {
                    const auto ds = generate_dataset(cfg, r);
                    std::map<SimMethod, WeightVector> weights;
                    for (auto method : opts.methods) {
                        if (method == SimMethod::crw) {
                            CalibrationOptions copts;
                            copts.alpha = cfg.alpha;
                            copts.mode = opts.crw_mode;
                            copts.exec = Execution::serial;
                            RankRequest req = auto_rank_request(cfg.m);
                            req.grid_size = cfg.rank_grid_size;
                            copts.rank = req;
                            try {
                                weights[method] = calibrate_crw(ds.records, copts).weights;
                            } catch (const std::exception&) {
                                failed[r] = 1;
                            }
                        } else if (method == SimMethod::rdw) {
                            weights[method] = rdw_group_weights(ds.records, cfg.n_groups, cfg.alpha);
                        } else if (method == SimMethod::external) {
                            weights[method] = external;
                        }
                    }
                    for (std::size_t s = 0; s < slots.size(); ++s) {
                        const auto& slot = slots[s];
                        if (slot.method == SimMethod::crw && failed[r]) continue;
                        DecisionReport rep;
                        if (slot.procedure == Procedure::bh) {
                            rep = plain_bh(ds.records, cfg.alpha);
                        } else if (slot.procedure == Procedure::weighted_bonferroni) {
                            rep = weighted_bonferroni(ds.records, weights.at(slot.method), cfg.alpha);
                        } else {
                            rep = weighted_bh(ds.records, weights.at(slot.method), cfg.alpha);
                        }
                        outcomes[s][r] = score_replicate(rep, ds.truth);
                    }
                });

                std::size_t excluded = 0;
                for (char f : failed) excluded += f ? 1 : 0;
                for (std::size_t s = 0; s < slots.size(); ++s) {
                    std::vector<ReplicateOutcome> kept;
                    for (std::size_t r = 0; r < n_rep; ++r) {
                        if (slots[s].method == SimMethod::crw && failed[r]) continue;
                        kept.push_back(outcomes[s][r]);
                    }
                    PowerRecord rec;
                    rec.pi0 = pi0;
                    rec.mu_eps = mu;
                    rec.noise_cv = cv;
                    rec.method = slots[s].method;
                    rec.procedure = slots[s].procedure;
                    rec.metrics = summarize_outcomes(kept);
                    rec.excluded = slots[s].method == SimMethod::crw ? excluded : 0;
                    out.push_back(rec);
                }
            }
        }
    }
    return out;
}

} // namespace crw
