#pragma once

#include "crw/mtp.hpp"
#include "crw/pipeline.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crw {

enum class EffectModel { point_mass, normal };

std::string to_string(EffectModel model);
EffectModel effect_model_from_string(const std::string& name);

struct SimConfig {
    std::size_t m = 10000;
    double pi0 = 0.9;
    double mu_eps = 1.0;
    EffectModel effect_model = EffectModel::point_mass;
    double noise_cv = 0.0;   // sd of test effect around covariate effect, relative to it
    std::size_t n_groups = 10;
    std::size_t replicates = 100;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    double rho = 0.0;        // equicorrelation of test statistics, [0, 1)
    std::size_t rank_grid_size = 512;

    void validate() const;
};

struct SimDataset {
    std::vector<TestRecord> records; // ranked by covariate
    TruthLabels truth;
    std::vector<double> test_effect;
    std::vector<double> covariate_effect;
};

/// Nulls first, then alternatives. Covariate ~ N(tau, 1) and test
/// statistic ~ N(eps, 1) independently given the effects; p = sf(stat).
/// The stream depends only on (cfg.seed, replicate).
SimDataset generate_dataset(const SimConfig& cfg, std::size_t replicate);

struct DilutionRecord {
    double pi0 = 0.0;
    double mu_eps = 0.0;
    double top_frac = 0.0;
    double top_frac_se = 0.0;
    double top_mean_effect = 0.0;
    double top_mean_effect_se = 0.0;
    std::size_t replicates = 0;
};

struct DilutionGrid {
    std::vector<double> pi0;
    std::vector<double> mu_eps;
};

/// Top covariate group composition averaged over replicates, per cell.
std::vector<DilutionRecord> run_dilution_study(const DilutionGrid& grid, const SimConfig& base,
                                               Execution exec = Execution::parallel);

enum class SimMethod { crw, bh, rdw, external };

std::string to_string(SimMethod method);
SimMethod sim_method_from_string(const std::string& name);

struct PowerRecord {
    double pi0 = 0.0;
    double mu_eps = 0.0;
    double noise_cv = 0.0;
    SimMethod method = SimMethod::bh;
    Procedure procedure = Procedure::bh;
    ErrorMetrics metrics;
    std::size_t excluded = 0; // replicates whose calibration failed
};

struct PowerGrid {
    std::vector<double> pi0;
    std::vector<double> mu_eps;
    std::vector<double> noise_cv{0.0};
};

struct PowerOptions {
    std::vector<SimMethod> methods{SimMethod::crw, SimMethod::bh, SimMethod::rdw};
    /// Rank-indexed weights for SimMethod::external (rescaled to mean 1).
    std::optional<WeightVector> external_weights;
    WeightMode crw_mode = WeightMode::continuous;
};

/// Weighted methods are scored under both weighted Bonferroni and
/// weighted BH; BH is scored as plain BH.
std::vector<PowerRecord> run_power_comparison(const PowerGrid& grid, const SimConfig& base, const PowerOptions& opts,
                                              Execution exec = Execution::parallel);

/// Group-based oracle weights: covariate-sorted groups, group effect =
/// mean of max(0, test statistic). Unit weights when every group effect is 0.
WeightVector rdw_group_weights(const std::vector<TestRecord>& records, std::size_t n_groups, double alpha);

} // namespace crw
