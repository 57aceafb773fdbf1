#include "crw/errors.hpp"
#include "crw/io.hpp"
#include "crw/parallel.hpp"
#include "crw/pipeline.hpp"
#include "crw/rankprob.hpp"
#include "crw/simharness.hpp"
#include "crw/weights.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw crw::ConfigError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw crw::ConfigError("config '" + path + "': " + e.what());
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Flags that were actually given override the config file.
struct RunFlags {
    std::string config;
    std::optional<std::string> input, id_column, covariate_column, pvalue_column, mode, method, output_dir;
    std::optional<double> alpha, lambda;
    std::optional<std::size_t> grid_size, draws;
    std::optional<std::uint64_t> seed;
    std::string external_weights;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "JSON run config");
        cmd->add_option("--input", input, "CSV with a header row");
        cmd->add_option("--id-column", id_column, "Test id column");
        cmd->add_option("--covariate-column", covariate_column, "Covariate column");
        cmd->add_option("--pvalue-column", pvalue_column, "P-value column");
        cmd->add_option("--alpha", alpha, "Significance level");
        cmd->add_option("--lambda", lambda, "Storey tail threshold");
        cmd->add_option("--mode", mode, "continuous or binary");
        cmd->add_option("--method", method, "Rank probability method: auto, exact, approx, mc, grid");
        cmd->add_option("--grid-size", grid_size, "Grid points for the grid method");
        cmd->add_option("--draws", draws, "Monte Carlo draws for the mc method");
        cmd->add_option("--seed", seed, "Random seed");
        cmd->add_option("--output-dir", output_dir, "Output directory");
    }

    crw::RunConfig resolve() const {
        crw::RunConfig cfg;
        if (!config.empty()) cfg = load_json(config).get<crw::RunConfig>();
        if (input) cfg.input = *input;
        if (id_column) cfg.id_column = *id_column;
        if (covariate_column) cfg.covariate_column = *covariate_column;
        if (pvalue_column) cfg.pvalue_column = *pvalue_column;
        if (alpha) cfg.alpha = *alpha;
        if (lambda) cfg.lambda = *lambda;
        if (mode) cfg.mode = crw::weight_mode_from_string(*mode);
        if (method) cfg.rank_method = *method;
        if (grid_size) cfg.grid_size = *grid_size;
        if (draws) cfg.draws = *draws;
        if (seed) cfg.seed = *seed;
        if (output_dir) cfg.output_dir = *output_dir;
        if (cfg.input.empty()) throw crw::ConfigError("no input file given");
        cfg.validate();
        return cfg;
    }
};

json provenance(const crw::RunConfig& cfg) {
    return json{{"config", cfg}, {"input_sha256", crw::file_sha256(cfg.input)}, {"version", crw::version_string()}};
}

crw::CalibrationOptions calibration_options(const crw::RunConfig& cfg, std::size_t m, crw::WeightMode mode) {
    crw::CalibrationOptions opts;
    opts.alpha = cfg.alpha;
    opts.lambda = cfg.lambda;
    opts.mode = mode;
    opts.rank = crw::rank_request_for(cfg, m);
    return opts;
}

json calibration_json(const crw::Calibration& cal) {
    json j{{"mode", crw::to_string(cal.weight_config.mode)},
           {"uniform", cal.uniform},
           {"delta", crw::to_json(cal.delta)},
           {"max_weight", crw::to_json(cal.weights)["max"]}};
    if (cal.uniform) j["fallback_reason"] = cal.fallback_reason;
    else j["rank_model"] = {{"m0", cal.model.m0}, {"m1", cal.model.m1}, {"tau", cal.model.tau_alt}};
    return j;
}

int cmd_adjust(const RunFlags& flags) {
    const auto cfg = flags.resolve();
    const auto records = crw::ingest_csv(cfg.input, cfg);
    const std::size_t m = records.size();

    const auto cal = crw::calibrate_crw(records, calibration_options(cfg, m, cfg.mode));
    const auto other_mode =
        cfg.mode == crw::WeightMode::continuous ? crw::WeightMode::binary : crw::WeightMode::continuous;
    const auto cal_other = crw::calibrate_crw(records, calibration_options(cfg, m, other_mode));

    std::optional<crw::WeightVector> external;
    if (!flags.external_weights.empty()) {
        std::map<std::string, double> by_id;
        for (auto& [id, w] : crw::read_weight_table(flags.external_weights)) by_id[id] = w;
        crw::WeightVector ext{std::vector<double>(m, 0.0)};
        for (const auto& rec : records) {
            const auto it = by_id.find(rec.id);
            if (it == by_id.end()) throw crw::DataError("external weights lack id '" + rec.id + "'");
            ext.weights[rec.rank - 1] = it->second;
        }
        const double mean = ext.mean();
        if (!(mean > 0.0)) throw crw::DataError("external weights have a zero mean");
        for (auto& w : ext.weights) w /= mean;
        external = std::move(ext);
    }

    json table = json::array();
    for (double a : crw::alpha_grid()) {
        const auto c = crw::recalibrate_alpha(cal, a, crw::Execution::parallel);
        const auto o = crw::recalibrate_alpha(cal_other, a, crw::Execution::parallel);
        const std::string tag = crw::to_string(cfg.mode);
        const std::string other_tag = crw::to_string(other_mode);
        json row{{"alpha", a},
                 {"bh", crw::plain_bh(records, a).n_rejections},
                 {"bonferroni", crw::bonferroni(records, a).n_rejections},
                 {"crw_" + tag + "_bh", crw::weighted_bh(records, c.weights, a).n_rejections},
                 {"crw_" + tag + "_bonferroni", crw::weighted_bonferroni(records, c.weights, a).n_rejections},
                 {"crw_" + other_tag + "_bh", crw::weighted_bh(records, o.weights, a).n_rejections},
                 {"crw_" + other_tag + "_bonferroni", crw::weighted_bonferroni(records, o.weights, a).n_rejections}};
        if (external) {
            row["external_bh"] = crw::weighted_bh(records, *external, a).n_rejections;
            row["external_bonferroni"] = crw::weighted_bonferroni(records, *external, a).n_rejections;
        }
        table.push_back(row);
    }

    const auto wbh = crw::weighted_bh(records, cal.weights, cfg.alpha);
    const auto wbonf = crw::weighted_bonferroni(records, cal.weights, cfg.alpha);
    const auto bh = crw::plain_bh(records, cfg.alpha);

    json report{{"m", m},
                {"estimate", crw::to_json(cal.estimate, cal.tau_at_mean)},
                {"mean_covariate_effect", cal.mean_covariate_effect},
                {"calibration", calibration_json(cal)},
                {"calibration_" + crw::to_string(other_mode), calibration_json(cal_other)},
                {"rejections", {{"alpha", cfg.alpha},
                                {"crw_bh", wbh.n_rejections},
                                {"crw_bonferroni", wbonf.n_rejections},
                                {"bh", bh.n_rejections}}},
                {"alpha_grid", table},
                {"provenance", provenance(cfg)}};
    if (cal.fit) {
        report["regression"] = {{"intercept", cal.fit->intercept}, {"slope", cal.fit->slope},
                                {"residual_sd", cal.fit->residual_sd}, {"n", cal.fit->n},
                                {"intercept_se", cal.fit->intercept_se}, {"slope_se", cal.fit->slope_se}};
    }

    crw::OutputSet out(cfg.output_dir);
    out.add("weights.csv", crw::weights_csv(cal.weights));
    out.add("decisions.csv", crw::decisions_csv(records, cal.weights, wbh));
    out.add("decisions_bonferroni.csv", crw::decisions_csv(records, cal.weights, wbonf));
    out.add("run_report.json", dump(report));
    out.commit();
    std::cout << "m=" << m << " pi0_hat=" << crw::format_double(cal.pi0_hat)
              << " crw_bh=" << wbh.n_rejections << " bh=" << bh.n_rejections << "\n";
    return 0;
}

int cmd_estimate(const RunFlags& flags) {
    const auto cfg = flags.resolve();
    const auto records = crw::ingest_csv(cfg.input, cfg);
    auto opts = calibration_options(cfg, records.size(), cfg.mode);
    const auto cal = crw::calibrate_crw(records, opts);

    json report{{"m", records.size()},
                {"estimate", crw::to_json(cal.estimate, cal.tau_at_mean)},
                {"mean_covariate_effect", cal.mean_covariate_effect},
                {"provenance", provenance(cfg)}};
    if (cal.fit) report["regression"] = {{"intercept", cal.fit->intercept}, {"slope", cal.fit->slope}, {"n", cal.fit->n}};

    std::string csv = "id,pvalue,covariate,rank,eps_hat,power_hat\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const double eps = i < cal.estimate.eps_hat.size() ? cal.estimate.eps_hat[i] : 0.0;
        const double pw = i < cal.estimate.power_hat.size() ? cal.estimate.power_hat[i] : 0.0;
        csv += records[i].id + "," + crw::format_double(records[i].pvalue) + "," +
               crw::format_double(records[i].covariate) + "," + std::to_string(records[i].rank) + "," +
               crw::format_double(eps) + "," + crw::format_double(pw) + "\n";
    }
    crw::OutputSet out(cfg.output_dir);
    out.add("estimate.json", dump(report));
    out.add("effects.csv", csv);
    out.commit();
    std::cout << dump(report["estimate"]);
    return 0;
}

struct ModelFlags {
    long long m0 = -1;
    long long m1 = -1;
    double tau = 0.0;
    std::string method = "auto";
    std::size_t nodes = 0;
    std::size_t grid_size = 512;
    std::size_t draws = 100000;
    std::uint64_t seed = 1;
    std::string output_dir;

    void attach(CLI::App* cmd) {
        cmd->add_option("--m0", m0, "Number of null tests")->required();
        cmd->add_option("--m1", m1, "Number of alternative tests")->required();
        cmd->add_option("--tau", tau, "Alternative covariate effect");
        cmd->add_option("--method", method, "auto, exact, approx, mc, grid");
        cmd->add_option("--nodes", nodes, "Quadrature nodes (0 = default)");
        cmd->add_option("--grid-size", grid_size, "Grid points for the grid method");
        cmd->add_option("--draws", draws, "Monte Carlo draws");
        cmd->add_option("--seed", seed, "Random seed");
        cmd->add_option("--output-dir", output_dir, "Output directory (default: stdout)");
    }

    crw::RankRequest request() const {
        if (m0 < 0 || m1 < 0) throw crw::ConfigError("--m0 and --m1 must be >= 0");
        if (m0 + m1 == 0) throw crw::ConfigError("--m0 + --m1 must be >= 1");
        if (!(tau >= 0.0)) throw crw::ConfigError("--tau must be >= 0");
        crw::RankRequest req = crw::auto_rank_request(static_cast<std::size_t>(m0 + m1));
        if (method != "auto") req.method = crw::rank_method_from_string(method);
        req.options.nodes = nodes;
        req.grid_size = grid_size;
        req.draws = draws;
        req.seed = seed;
        return req;
    }
};

void emit(const std::string& dir, const std::string& name, const std::string& content) {
    if (dir.empty()) {
        std::cout << content;
        return;
    }
    crw::OutputSet out(dir);
    out.add(name, content);
    out.commit();
}

int cmd_rankprob(const ModelFlags& f) {
    const auto req = f.request();
    const auto m0 = static_cast<std::size_t>(f.m0);
    const auto m1 = static_cast<std::size_t>(f.m1);
    std::optional<crw::RankDistribution> null_q, alt_q;
    if (m0 > 0) null_q = crw::rank_prob({m0, m1, f.tau, 0.0}, req);
    if (m1 > 0) {
        if (!(f.tau > 0.0)) throw crw::ConfigError("--tau must be > 0 when --m1 > 0");
        alt_q = crw::rank_prob({m0, m1, f.tau, f.tau}, req);
    }
    for (const auto* d : {null_q ? &*null_q : nullptr, alt_q ? &*alt_q : nullptr})
        if (d)
            for (const auto& w : d->meta.warnings) std::cerr << "warning: " << w << "\n";
    emit(f.output_dir, "rankprob.csv", crw::rank_pair_csv(null_q ? &*null_q : nullptr, alt_q ? &*alt_q : nullptr));
    return 0;
}

struct WeightFlags {
    ModelFlags model;
    double effect = 1.0;
    double alpha = 0.05;
    std::string mode = "continuous";
    std::string solver;

    void attach(CLI::App* cmd) {
        model.attach(cmd);
        cmd->add_option("--effect", effect, "Mean alternative test effect");
        cmd->add_option("--alpha", alpha, "Significance level");
        cmd->add_option("--mode", mode, "continuous or binary");
        cmd->add_option("--solver", solver, "newton, grid or bisection (default: automatic)");
    }
};

int cmd_weights(const WeightFlags& f) {
    const auto req = f.model.request();
    const auto m0 = static_cast<std::size_t>(f.model.m0);
    const auto m1 = static_cast<std::size_t>(f.model.m1);
    if (m1 == 0 || !(f.model.tau > 0.0)) throw crw::ConfigError("weights need --m1 >= 1 and --tau > 0");
    const auto dist = crw::rank_prob({m0, m1, f.model.tau, f.model.tau}, req);
    crw::WeightConfig wc;
    wc.m = m0 + m1;
    wc.alpha = f.alpha;
    wc.mean_effect = f.effect;
    wc.m1 = m1;
    wc.mode = crw::weight_mode_from_string(f.mode);
    crw::DeltaOptions dopts;
    if (f.solver == "newton") dopts.solver = crw::DeltaSolver::newton_raphson;
    else if (f.solver == "grid") dopts.solver = crw::DeltaSolver::grid;
    else if (f.solver == "bisection") dopts.solver = crw::DeltaSolver::bisection;
    else if (!f.solver.empty()) throw crw::ConfigError("unknown solver '" + f.solver + "'");
    const auto [w, sol] = crw::crw_weights(dist, wc, dopts);

    if (f.model.output_dir.empty()) {
        std::cout << crw::weights_csv(w);
        return 0;
    }
    json report{{"m0", m0},
                {"m1", m1},
                {"tau", f.model.tau},
                {"effect", f.effect},
                {"alpha", f.alpha},
                {"mode", f.mode},
                {"delta", crw::to_json(sol)},
                {"rank_probability", crw::to_json(dist)},
                {"weights", crw::to_json(w)},
                {"average_power", crw::average_power(w, dist, wc)}};
    crw::OutputSet out(f.model.output_dir);
    out.add("weights.csv", crw::weights_csv(w));
    out.add("weights.json", dump(report));
    out.commit();
    return 0;
}

struct SimFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates, m;
    std::vector<std::string> methods;
    std::optional<double> alpha;
    std::string output_dir = ".";

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "JSON grid specification")->required();
        cmd->add_option("--seed", seed, "Random seed");
        cmd->add_option("--replicates", replicates, "Replicates per grid cell");
        cmd->add_option("--m", m, "Tests per dataset");
        cmd->add_option("--alpha", alpha, "Significance level");
        cmd->add_option("--method", methods, "crw, bh, rdw, external (repeatable)");
        cmd->add_option("--output-dir", output_dir, "Output directory");
    }
};

std::vector<double> number_list(const json& j, const char* key, std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) throw crw::ConfigError(std::string("grid '") + key + "' must be a non-empty array");
    return v.get<std::vector<double>>();
}

int cmd_simulate(const SimFlags& f) {
    const json spec = load_json(f.config);
    if (!spec.is_object()) throw crw::ConfigError("grid config must be a JSON object");
    const std::string study = spec.value("study", "");
    crw::SimConfig base = crw::sim_config_from_json(spec.value("base", json::object()));
    if (study == "dilution" && !spec.value("base", json::object()).contains("effect_model"))
        base.effect_model = crw::EffectModel::normal;
    if (f.seed) base.seed = *f.seed;
    if (f.replicates) base.replicates = *f.replicates;
    if (f.m) base.m = *f.m;
    if (f.alpha) base.alpha = *f.alpha;
    const json grid = spec.value("grid", json::object());
    if (!grid.is_object()) throw crw::ConfigError("'grid' must be an object");

    json result{{"study", study}, {"base", crw::to_json(base)}, {"grid", grid}, {"version", crw::version_string()}};
    crw::OutputSet out(f.output_dir);
    if (study == "dilution") {
        crw::DilutionGrid g{number_list(grid, "pi0", {base.pi0}), number_list(grid, "mu_eps", {base.mu_eps})};
        const auto rows = crw::run_dilution_study(g, base);
        json recs = json::array();
        for (const auto& r : rows)
            recs.push_back({{"pi0", r.pi0}, {"mu_eps", r.mu_eps}, {"top_frac", r.top_frac},
                            {"top_frac_se", r.top_frac_se}, {"top_mean_effect", r.top_mean_effect},
                            {"top_mean_effect_se", r.top_mean_effect_se}, {"replicates", r.replicates}});
        result["records"] = recs;
        out.add("dilution.csv", crw::dilution_csv(rows));
    } else if (study == "power") {
        crw::PowerGrid g{number_list(grid, "pi0", {base.pi0}), number_list(grid, "mu_eps", {base.mu_eps}),
                         number_list(grid, "noise_cv", {base.noise_cv})};
        crw::PowerOptions opts;
        std::vector<std::string> names = f.methods;
        if (names.empty() && spec.contains("methods")) names = spec.at("methods").get<std::vector<std::string>>();
        if (!names.empty()) {
            opts.methods.clear();
            for (const auto& n : names) opts.methods.push_back(crw::sim_method_from_string(n));
        }
        if (spec.contains("crw_mode")) opts.crw_mode = crw::weight_mode_from_string(spec.at("crw_mode"));
        if (spec.contains("external_weights")) {
            // rank,weight rows
            const auto table = crw::read_weight_table(spec.at("external_weights").get<std::string>());
            crw::WeightVector w{std::vector<double>(table.size(), 0.0)};
            for (const auto& [key, value] : table) {
                std::size_t rank = 0;
                try {
                    rank = std::stoul(key);
                } catch (const std::exception&) {
                    throw crw::DataError("external weights: rank '" + key + "' is not an integer");
                }
                if (rank < 1 || rank > w.size()) throw crw::DataError("external weights: rank " + key + " out of range");
                w.weights[rank - 1] = value;
            }
            opts.external_weights = std::move(w);
        }
        const auto rows = crw::run_power_comparison(g, base, opts);
        json recs = json::array();
        for (const auto& r : rows)
            recs.push_back({{"pi0", r.pi0}, {"mu_eps", r.mu_eps}, {"noise_cv", r.noise_cv},
                            {"method", crw::to_string(r.method)}, {"procedure", crw::to_string(r.procedure)},
                            {"metrics", crw::to_json(r.metrics)}, {"excluded", r.excluded}});
        result["records"] = recs;
        out.add("power.csv", crw::power_csv(rows));
    } else {
        throw crw::ConfigError("grid config 'study' must be \"dilution\" or \"power\"");
    }
    out.add("sim_result.json", dump(result));
    for (const auto& p : out.commit()) std::cout << p.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covariate rank weighting for multiple testing"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

    RunFlags adjust_flags;
    auto* adjust = app.add_subcommand("adjust", "Calibrate CRW weights on a dataset and adjust its p-values");
    adjust_flags.attach(adjust);
    adjust->add_option("--external-weights", adjust_flags.external_weights, "CSV of (id, weight) for comparison");

    RunFlags estimate_flags;
    auto* estimate = app.add_subcommand("estimate", "Estimate pi0, effect sizes and the covariate regression");
    estimate_flags.attach(estimate);

    ModelFlags rank_flags;
    auto* rankprob = app.add_subcommand("rankprob", "Rank probability curves for a two-group covariate model");
    rank_flags.attach(rankprob);

    WeightFlags weight_flags;
    auto* weights = app.add_subcommand("weights", "CRW weights for a two-group covariate model");
    weight_flags.attach(weights);

    SimFlags sim_flags;
    auto* simulate = app.add_subcommand("simulate", "Run a dilution or power simulation grid");
    sim_flags.attach(simulate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (threads > 0) crw::set_threads(threads);
        if (adjust->parsed()) return cmd_adjust(adjust_flags);
        if (estimate->parsed()) return cmd_estimate(estimate_flags);
        if (rankprob->parsed()) return cmd_rankprob(rank_flags);
        if (weights->parsed()) return cmd_weights(weight_flags);
        if (simulate->parsed()) return cmd_simulate(sim_flags);
    } catch (const crw::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const crw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const crw::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
