#pragma once

#include "crw/estimation.hpp"
#include "crw/mtp.hpp"
#include "crw/rankprob.hpp"
#include "crw/weights.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crw {

/// How CRW weights are calibrated from p-values and covariates alone.
struct CalibrationOptions {
    double alpha = 0.05;
    double lambda = kStoreyLambda;
    WeightMode mode = WeightMode::continuous;
    std::optional<RankRequest> rank; // default: auto_rank_request(m)
    Execution exec = Execution::parallel;
};

/// Everything the calibration chain produced. When `uniform` is set the
/// weights are all 1 and `fallback_reason` says why.
struct Calibration {
    double pi0_hat = 1.0;
    EffectEstimate estimate;
    std::optional<RegressionFit> fit;
    double tau_at_mean = 0.0;
    double mean_covariate_effect = 0.0; // mean of estimate_covariate_effects over its top set
    RankModel model;
    RankDistribution rank_dist;
    WeightConfig weight_config;
    WeightVector weights;
    DeltaSolution delta;
    bool uniform = false;
    std::string fallback_reason;
};

/// pi0 -> effect estimates -> covariate regression -> rank distribution ->
/// weights. Records must carry covariate ranks. Errors from a stage are
/// rethrown with the stage name prefixed.
Calibration calibrate_crw(const std::vector<TestRecord>& records, const CalibrationOptions& opts);

/// Recomputes only the weights of an existing calibration at another alpha.
Calibration recalibrate_alpha(const Calibration& base, double alpha, Execution exec);

/// Levels 0.01, 0.02, ..., 0.10.
std::vector<double> alpha_grid();

} // namespace crw
