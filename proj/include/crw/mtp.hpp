#pragma once

#include "crw/weights.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace crw {

enum class Truth { null, alternative };

struct TestRecord {
    std::string id;
    double pvalue = 1.0;
    double covariate = 0.0;
    std::optional<double> test_stat;
    std::size_t rank = 0; // 1 = largest covariate, 0 = not yet ranked
    std::optional<Truth> truth;
};

enum class Procedure { bonferroni, weighted_bonferroni, bh, weighted_bh };

std::string to_string(Procedure method);

struct DecisionReport {
    Procedure method = Procedure::bh;
    double alpha = 0.05;
    std::vector<std::size_t> rejected; // record indices, ascending
    std::size_t n_rejections = 0;
    bool weighted = false;
};

struct ErrorMetrics {
    double power = 0.0;
    double fwer = 0.0;
    double fdr = 0.0;
    std::size_t replicates = 0;
    double power_se = 0.0;
    double fwer_se = 0.0;
    double fdr_se = 0.0;
};

/// Assigns rank 1 to the largest covariate. Ties keep input order.
void rank_by_covariate(std::vector<TestRecord>& records);

/// Per-record weight looked up by rank; throws ConfigError on a size
/// mismatch or unranked records.
std::vector<double> weights_by_record(const std::vector<TestRecord>& records, const WeightVector& weights);

/// p / w, with +inf when w = 0.
double weighted_pvalue(double pvalue, double weight);

DecisionReport bonferroni(const std::vector<TestRecord>& records, double alpha);

/// Rejects i iff p_i / w_i <= alpha / m.
DecisionReport weighted_bonferroni(const std::vector<TestRecord>& records, const WeightVector& weights, double alpha);

/// Benjamini-Hochberg step-up on q_i = p_i / w_i.
DecisionReport weighted_bh(const std::vector<TestRecord>& records, const WeightVector& weights, double alpha);

DecisionReport plain_bh(const std::vector<TestRecord>& records, double alpha);

/// Truth labels for one replicate, index-aligned with its records.
using TruthLabels = std::vector<Truth>;

/// Power, FWER and FDR averaged over replicates (one report per replicate).
/// Throws DataError when labels are missing or misaligned.
ErrorMetrics compute_metrics(const std::vector<DecisionReport>& reports, const std::vector<TruthLabels>& truths);

/// Per-replicate outcome; compute_metrics averages these.
struct ReplicateOutcome {
    double power = 0.0;
    bool any_false = false;
    double fdp = 0.0;
};

ReplicateOutcome score_replicate(const DecisionReport& report, const TruthLabels& truth);

ErrorMetrics summarize_outcomes(const std::vector<ReplicateOutcome>& outcomes);

} // namespace crw
