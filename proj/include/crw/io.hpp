#pragma once

#include "crw/estimation.hpp"
#include "crw/mtp.hpp"
#include "crw/pipeline.hpp"
#include "crw/rankprob.hpp"
#include "crw/simharness.hpp"
#include "crw/weights.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace crw {

struct RunConfig {
    std::string input;
    std::string id_column; // empty: "id" when present, else the data row number
    std::string covariate_column = "covariate";
    std::string pvalue_column = "pvalue";
    double alpha = 0.05;
    WeightMode mode = WeightMode::continuous;
    double lambda = kStoreyLambda;
    std::string rank_method = "auto"; // auto, exact, approx, mc, grid
    std::size_t grid_size = 512;
    std::size_t draws = 100000;
    std::uint64_t seed = 1;
    std::string output_dir = ".";

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

/// Rank request implied by the config for m tests.
RankRequest rank_request_for(const RunConfig& cfg, std::size_t m);

/// Reads a header-row CSV and assigns covariate ranks. Errors carry the
/// 1-based file line number or the missing column's name.
std::vector<TestRecord> ingest_csv(const std::filesystem::path& path, const RunConfig& cfg);

/// Splits one CSV line, honouring double quotes.
std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest round-trip decimal form; locale independent.
std::string format_double(double x);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

std::string version_string();

std::string rank_distribution_csv(const RankDistribution& dist);
/// Either column may be absent (empty group); its fields are left empty.
std::string rank_pair_csv(const RankDistribution* null_query, const RankDistribution* alt_query);
std::string weights_csv(const WeightVector& weights);
std::string decisions_csv(const std::vector<TestRecord>& records, const WeightVector& weights,
                          const DecisionReport& report);
std::string dilution_csv(const std::vector<DilutionRecord>& rows);
/// One row per (cell, method, procedure, metric).
std::string power_csv(const std::vector<PowerRecord>& rows);

nlohmann::json to_json(const RankDistribution& dist);
nlohmann::json to_json(const WeightVector& weights);
nlohmann::json to_json(const DeltaSolution& sol);
nlohmann::json to_json(const ErrorMetrics& metrics);
/// Summary only: per-test vectors are reduced to counts and quantiles.
nlohmann::json to_json(const EffectEstimate& est, double tau_at_mean);
nlohmann::json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig base = {});

/// Reads (key, weight) rows where key is a rank or an id; the header row
/// names the two columns.
std::vector<std::pair<std::string, double>> read_weight_table(const std::filesystem::path& path);

/// Files are staged in memory and written on commit, each via a temporary
/// file and a rename. A failed commit removes what it already wrote.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir);

    void add(const std::string& name, std::string content);
    std::vector<std::filesystem::path> commit();

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

void write_file_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace crw
