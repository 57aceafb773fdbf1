#include "crw/mtp.hpp"

#include "crw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crw {

std::string to_string(Procedure method) {
    switch (method) {
    case Procedure::bonferroni: return "bonferroni";
    case Procedure::weighted_bonferroni: return "weighted-bonferroni";
    case Procedure::bh: return "bh";
    case Procedure::weighted_bh: return "weighted-bh";
    }
    return "unknown";
}

void rank_by_covariate(std::vector<TestRecord>& records) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].covariate > records[b].covariate; });
    for (std::size_t r = 0; r < order.size(); ++r) records[order[r]].rank = r + 1;
}

std::vector<double> weights_by_record(const std::vector<TestRecord>& records, const WeightVector& weights) {
    if (weights.size() != records.size())
        throw ConfigError("weight vector has " + std::to_string(weights.size()) + " entries for " +
                          std::to_string(records.size()) + " tests");
    std::vector<double> w(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::size_t r = records[i].rank;
        if (r == 0 || r > weights.size()) throw ConfigError("record '" + records[i].id + "' has no valid covariate rank");
        w[i] = weights.weights[r - 1];
    }
    return w;
}

double weighted_pvalue(double pvalue, double weight) {
    if (!(weight > 0.0)) return std::numeric_limits<double>::infinity();
    return pvalue / weight;
}

namespace {

DecisionReport threshold_rule(const std::vector<double>& q, double alpha, Procedure method) {
    DecisionReport rep;
    rep.method = method;
    rep.alpha = alpha;
    const double cut = alpha / static_cast<double>(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
        if (q[i] <= cut) rep.rejected.push_back(i);
    rep.n_rejections = rep.rejected.size();
    return rep;
}

DecisionReport step_up(const std::vector<double>& q, double alpha, Procedure method) {
    DecisionReport rep;
    rep.method = method;
    rep.alpha = alpha;
    const std::size_t m = q.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] < q[b]; });
    std::size_t last = 0; // number of rejections
    for (std::size_t j = m; j >= 1; --j) {
        if (q[order[j - 1]] <= static_cast<double>(j) * alpha / static_cast<double>(m)) {
            last = j;
            break;
        }
    }
    if (last > 0) {
        const double cut = q[order[last - 1]];
        for (std::size_t i = 0; i < m; ++i)
            if (q[i] <= cut) rep.rejected.push_back(i);
    }
    rep.n_rejections = rep.rejected.size();
    return rep;
}

std::vector<double> raw_pvalues(const std::vector<TestRecord>& records) {
    std::vector<double> p(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) p[i] = records[i].pvalue;
    return p;
}

std::vector<double> weighted_pvalues(const std::vector<TestRecord>& records, const WeightVector& weights) {
    const auto w = weights_by_record(records, weights);
    std::vector<double> q(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) q[i] = weighted_pvalue(records[i].pvalue, w[i]);
    return q;
}

} // namespace

DecisionReport bonferroni(const std::vector<TestRecord>& records, double alpha) {
    return threshold_rule(raw_pvalues(records), alpha, Procedure::bonferroni);
}

DecisionReport weighted_bonferroni(const std::vector<TestRecord>& records, const WeightVector& weights, double alpha) {
    auto rep = threshold_rule(weighted_pvalues(records, weights), alpha, Procedure::weighted_bonferroni);
    rep.weighted = true;
    return rep;
}

DecisionReport weighted_bh(const std::vector<TestRecord>& records, const WeightVector& weights, double alpha) {
    auto rep = step_up(weighted_pvalues(records, weights), alpha, Procedure::weighted_bh);
    rep.weighted = true;
    return rep;
}

DecisionReport plain_bh(const std::vector<TestRecord>& records, double alpha) {
    return step_up(raw_pvalues(records), alpha, Procedure::bh);
}

ReplicateOutcome score_replicate(const DecisionReport& report, const TruthLabels& truth) {
    std::size_t m1 = 0;
    for (auto t : truth)
        if (t == Truth::alternative) ++m1;
    std::size_t true_rej = 0;
    std::size_t false_rej = 0;
    for (std::size_t i : report.rejected) {
        if (i >= truth.size()) throw DataError("rejection index outside the truth labels");
        if (truth[i] == Truth::alternative) ++true_rej; else ++false_rej;
    }
    ReplicateOutcome out;
    out.power = m1 == 0 ? 0.0 : static_cast<double>(true_rej) / static_cast<double>(m1);
    out.any_false = false_rej > 0;
    out.fdp = static_cast<double>(false_rej) / static_cast<double>(std::max<std::size_t>(report.n_rejections, 1));
    return out;
}

ErrorMetrics summarize_outcomes(const std::vector<ReplicateOutcome>& outcomes) {
    ErrorMetrics em;
    em.replicates = outcomes.size();
    if (outcomes.empty()) return em;
    const double n = static_cast<double>(outcomes.size());
    double sp = 0.0, sp2 = 0.0, sf = 0.0, sd = 0.0, sd2 = 0.0;
    for (const auto& o : outcomes) {
        sp += o.power;
        sp2 += o.power * o.power;
        sf += o.any_false ? 1.0 : 0.0;
        sd += o.fdp;
        sd2 += o.fdp * o.fdp;
    }
    em.power = sp / n;
    em.fwer = sf / n;
    em.fdr = sd / n;
    const auto se = [n](double mean, double sum_sq) {
        if (n < 2.0) return 0.0;
        return std::sqrt(std::max(0.0, (sum_sq / n - mean * mean) * n / (n - 1.0)) / n);
    };
    em.power_se = se(em.power, sp2);
    em.fwer_se = std::sqrt(em.fwer * (1.0 - em.fwer) / n);
    em.fdr_se = se(em.fdr, sd2);
    return em;
}

ErrorMetrics compute_metrics(const std::vector<DecisionReport>& reports, const std::vector<TruthLabels>& truths) {
    if (reports.size() != truths.size()) throw DataError("compute_metrics: one truth label set per report is required");
    std::vector<ReplicateOutcome> outcomes;
    outcomes.reserve(reports.size());
    for (std::size_t r = 0; r < reports.size(); ++r) {
        if (truths[r].empty()) throw DataError("compute_metrics: replicate " + std::to_string(r) + " has no truth labels");
        outcomes.push_back(score_replicate(reports[r], truths[r]));
    }
    return summarize_outcomes(outcomes);
}

} // namespace crw
