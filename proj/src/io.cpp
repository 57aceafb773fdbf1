#include "crw/io.hpp"

#include "crw/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <system_error>

namespace crw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool parse_number(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

} // namespace

void RunConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
    if (covariate_column.empty() || pvalue_column.empty()) throw ConfigError("column names must not be empty");
    if (rank_method != "auto") rank_method_from_string(rank_method);
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
}

void to_json(json& j, const RunConfig& cfg) {
    j = json{{"input", cfg.input},
             {"id_column", cfg.id_column},
             {"covariate_column", cfg.covariate_column},
             {"pvalue_column", cfg.pvalue_column},
             {"alpha", cfg.alpha},
             {"mode", to_string(cfg.mode)},
             {"lambda", cfg.lambda},
             {"rank_method", cfg.rank_method},
             {"grid_size", cfg.grid_size},
             {"draws", cfg.draws},
             {"seed", cfg.seed},
             {"output_dir", cfg.output_dir}};
}

void from_json(const json& j, RunConfig& cfg) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    static const char* known[] = {"input",       "id_column", "covariate_column", "pvalue_column",
                                  "alpha",       "mode",      "lambda",           "rank_method",
                                  "grid_size",   "draws",     "seed",             "output_dir"};
    for (const auto& [key, _] : j.items())
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known))
            throw ConfigError("unknown run config key '" + key + "'");
    try {
        RunConfig out;
        out.input = get_or(j, "input", out.input);
        out.id_column = get_or(j, "id_column", out.id_column);
        out.covariate_column = get_or(j, "covariate_column", out.covariate_column);
        out.pvalue_column = get_or(j, "pvalue_column", out.pvalue_column);
        out.alpha = get_or(j, "alpha", out.alpha);
        out.mode = weight_mode_from_string(get_or(j, "mode", to_string(out.mode)));
        out.lambda = get_or(j, "lambda", out.lambda);
        out.rank_method = get_or(j, "rank_method", out.rank_method);
        out.grid_size = get_or(j, "grid_size", out.grid_size);
        out.draws = get_or(j, "draws", out.draws);
        out.seed = get_or(j, "seed", out.seed);
        out.output_dir = get_or(j, "output_dir", out.output_dir);
        cfg = out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
}

RankRequest rank_request_for(const RunConfig& cfg, std::size_t m) {
    RankRequest req = auto_rank_request(m);
    if (cfg.rank_method != "auto") req.method = rank_method_from_string(cfg.rank_method);
    req.grid_size = cfg.grid_size;
    req.draws = cfg.draws;
    req.seed = cfg.seed;
    return req;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::vector<TestRecord> ingest_csv(const fs::path& path, const RunConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input '" + path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError("input '" + path.string() + "' is empty");
    ++line_no;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);
    const auto column = [&](const std::string& name) -> std::ptrdiff_t {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : it - header.begin();
    };
    const auto p_col = column(cfg.pvalue_column);
    if (p_col < 0) throw DataError("missing column '" + cfg.pvalue_column + "'");
    const auto c_col = column(cfg.covariate_column);
    if (c_col < 0) throw DataError("missing column '" + cfg.covariate_column + "'");
    std::ptrdiff_t id_col = -1;
    if (!cfg.id_column.empty()) {
        id_col = column(cfg.id_column);
        if (id_col < 0) throw DataError("missing column '" + cfg.id_column + "'");
    } else {
        id_col = column("id");
    }

    std::vector<TestRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        TestRecord rec;
        if (!parse_number(fields[p_col], rec.pvalue))
            throw DataError("line " + std::to_string(line_no) + ": non-numeric p-value '" + fields[p_col] + "'");
        if (!(rec.pvalue >= 0.0 && rec.pvalue <= 1.0))
            throw DataError("line " + std::to_string(line_no) + ": p-value " + fields[p_col] + " outside [0, 1]");
        if (!parse_number(fields[c_col], rec.covariate) || !std::isfinite(rec.covariate))
            throw DataError("line " + std::to_string(line_no) + ": invalid covariate '" + fields[c_col] + "'");
        rec.id = id_col >= 0 ? fields[id_col] : std::to_string(records.size() + 1);
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw DataError("input '" + path.string() + "' has no data rows");
    rank_by_covariate(records);
    return records;
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string file_sha256(const fs::path& path) {
    const std::string bytes = read_file(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw DataError("hashing '" + path.string() + "' failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string version_string() { return "0.1.0"; }

std::string rank_distribution_csv(const RankDistribution& dist) {
    std::string out = "rank,prob\n";
    for (std::size_t k = 0; k < dist.size(); ++k)
        out += std::to_string(k + 1) + "," + format_double(dist.probs[k]) + "\n";
    return out;
}

std::string rank_pair_csv(const RankDistribution* null_query, const RankDistribution* alt_query) {
    if (!null_query && !alt_query) throw ConfigError("no rank distribution to write");
    const std::size_t m = null_query ? null_query->size() : alt_query->size();
    if (null_query && alt_query && alt_query->size() != m) throw ConfigError("rank distributions differ in length");
    std::string out = "rank,prob_null_query,prob_alt_query\n";
    for (std::size_t k = 0; k < m; ++k) {
        out += std::to_string(k + 1) + ",";
        if (null_query) out += format_double(null_query->probs[k]);
        out += ",";
        if (alt_query) out += format_double(alt_query->probs[k]);
        out += "\n";
    }
    return out;
}

std::string weights_csv(const WeightVector& weights) {
    std::string out = "rank,weight\n";
    for (std::size_t k = 0; k < weights.size(); ++k)
        out += std::to_string(k + 1) + "," + format_double(weights.weights[k]) + "\n";
    return out;
}

std::string decisions_csv(const std::vector<TestRecord>& records, const WeightVector& weights,
                          const DecisionReport& report) {
    const auto w = weights_by_record(records, weights);
    std::vector<char> rejected(records.size(), 0);
    for (auto i : report.rejected) rejected[i] = 1;
    std::string out = "id,pvalue,weight,weighted_p,rejected\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        out += records[i].id + "," + format_double(records[i].pvalue) + "," + format_double(w[i]) + "," +
               format_double(weighted_pvalue(records[i].pvalue, w[i])) + "," + (rejected[i] ? "1" : "0") + "\n";
    }
    return out;
}

std::string dilution_csv(const std::vector<DilutionRecord>& rows) {
    std::string out = "pi0,mu_eps,top_frac,top_mean_effect\n";
    for (const auto& r : rows)
        out += format_double(r.pi0) + "," + format_double(r.mu_eps) + "," + format_double(r.top_frac) + "," +
               format_double(r.top_mean_effect) + "\n";
    return out;
}

std::string power_csv(const std::vector<PowerRecord>& rows) {
    std::string out = "pi0,mu_eps,noise_cv,method,procedure,metric,value,se,replicates\n";
    for (const auto& r : rows) {
        const std::string head = format_double(r.pi0) + "," + format_double(r.mu_eps) + "," +
                                 format_double(r.noise_cv) + "," + to_string(r.method) + "," +
                                 to_string(r.procedure) + ",";
        const std::string tail = "," + std::to_string(r.metrics.replicates) + "\n";
        out += head + "power," + format_double(r.metrics.power) + "," + format_double(r.metrics.power_se) + tail;
        out += head + "fwer," + format_double(r.metrics.fwer) + "," + format_double(r.metrics.fwer_se) + tail;
        out += head + "fdr," + format_double(r.metrics.fdr) + "," + format_double(r.metrics.fdr_se) + tail;
    }
    return out;
}

json to_json(const RankDistribution& dist) {
    json meta{{"nodes", dist.meta.nodes},
              {"draws", dist.meta.draws},
              {"seed", dist.meta.seed},
              {"grid_size", dist.meta.grid_size},
              {"warnings", dist.meta.warnings}};
    json j{{"method", to_string(dist.method)}, {"probs", dist.probs}, {"integration_meta", meta}};
    if (!dist.std_errors.empty()) j["std_errors"] = dist.std_errors;
    return j;
}

json to_json(const WeightVector& weights) {
    double top = 0.0;
    for (double w : weights.weights) top = std::max(top, w);
    return json{{"m", weights.size()}, {"mean", weights.mean()}, {"max", top}, {"weights", weights.weights}};
}

json to_json(const DeltaSolution& sol) {
    return json{{"delta", sol.delta},
                {"solver", to_string(sol.solver)},
                {"iterations", sol.iterations},
                {"residual", sol.residual},
                {"zero_prob_ranks", sol.zero_prob_ranks}};
}

json to_json(const ErrorMetrics& metrics) {
    return json{{"power", metrics.power},       {"fwer", metrics.fwer},       {"fdr", metrics.fdr},
                {"power_se", metrics.power_se}, {"fwer_se", metrics.fwer_se}, {"fdr_se", metrics.fdr_se},
                {"replicates", metrics.replicates}};
}

json to_json(const EffectEstimate& est, double tau_at_mean) {
    json j{{"pi0_hat", est.pi0_hat},
           {"m0_hat", est.m0_hat},
           {"m1_hat", est.m1_hat},
           {"mean_alt_effect", est.mean_alt_effect},
           {"tau_at_mean", tau_at_mean}};
    std::vector<double> power;
    for (auto i : est.alt_indices)
        if (i < est.power_hat.size()) power.push_back(est.power_hat[i]);
    if (!power.empty()) {
        j["power_quantiles"] = json{{"q05", quantile(power, 0.05)}, {"q25", quantile(power, 0.25)},
                                    {"q50", quantile(power, 0.5)},  {"q75", quantile(power, 0.75)},
                                    {"q95", quantile(power, 0.95)}};
    }
    return j;
}

json to_json(const SimConfig& cfg) {
    return json{{"m", cfg.m},
                {"pi0", cfg.pi0},
                {"mu_eps", cfg.mu_eps},
                {"effect_model", to_string(cfg.effect_model)},
                {"noise_cv", cfg.noise_cv},
                {"n_groups", cfg.n_groups},
                {"replicates", cfg.replicates},
                {"alpha", cfg.alpha},
                {"seed", cfg.seed},
                {"rho", cfg.rho},
                {"rank_grid_size", cfg.rank_grid_size}};
}

SimConfig sim_config_from_json(const json& j, SimConfig base) {
    if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
    try {
        base.m = get_or(j, "m", base.m);
        base.pi0 = get_or(j, "pi0", base.pi0);
        base.mu_eps = get_or(j, "mu_eps", base.mu_eps);
        if (j.contains("effect_model")) base.effect_model = effect_model_from_string(j.at("effect_model"));
        base.noise_cv = get_or(j, "noise_cv", base.noise_cv);
        base.n_groups = get_or(j, "n_groups", base.n_groups);
        base.replicates = get_or(j, "replicates", base.replicates);
        base.alpha = get_or(j, "alpha", base.alpha);
        base.seed = get_or(j, "seed", base.seed);
        base.rho = get_or(j, "rho", base.rho);
        base.rank_grid_size = get_or(j, "rank_grid_size", base.rank_grid_size);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("simulation config: ") + e.what());
    }
    return base;
}

std::vector<std::pair<std::string, double>> read_weight_table(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weights '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("weights file '" + path.string() + "' is empty");
    if (split_csv_line(line).size() < 2) throw DataError("weights file needs two columns");
    std::vector<std::pair<std::string, double>> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        double w = 0.0;
        if (f.size() < 2 || !parse_number(f[1], w) || !(w >= 0.0) || !std::isfinite(w))
            throw DataError("weights line " + std::to_string(line_no) + ": invalid weight");
        out.emplace_back(f[0], w);
    }
    if (out.empty()) throw DataError("weights file '" + path.string() + "' has no rows");
    return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw DataError("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError("cannot rename into '" + path.string() + "': " + ec.message());
    }
}

OutputSet::OutputSet(fs::path dir) : dir_(std::move(dir)) {}

void OutputSet::add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

std::vector<fs::path> OutputSet::commit() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    std::vector<fs::path> written;
    try {
        for (const auto& [name, content] : files_) {
            const fs::path path = dir_ / name;
            write_file_atomic(path, content);
            written.push_back(path);
        }
    } catch (...) {
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
    files_.clear();
    return written;
}

} // namespace crw
