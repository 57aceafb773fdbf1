#include "crw/io.hpp"
#include "crw/pipeline.hpp"
#include "crw/simharness.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "crw_cli_tests";

int run(const std::string& args) {
    const std::string cmd = std::string(CRW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) rows.push_back(crw::split_csv_line(line));
    return rows;
}

fs::path dir(const std::string& name) {
    const auto d = kRoot / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path dataset(const std::string& name, double pi0, double mu, bool constant_covariate = false) {
    crw::SimConfig cfg;
    cfg.m = 3000;
    cfg.pi0 = pi0;
    cfg.mu_eps = mu;
    cfg.seed = 4;
    const auto ds = crw::generate_dataset(cfg, 0);
    fs::create_directories(kRoot);
    const auto path = kRoot / name;
    std::ofstream out(path, std::ios::binary);
    out << "gene,pvalue,covariate\n";
    for (const auto& r : ds.records)
        out << "g" << r.id << "," << crw::format_double(r.pvalue) << ","
            << (constant_covariate ? "1" : crw::format_double(r.covariate)) << "\n";
    return path;
}

} // namespace

TEST_CASE("rankprob: all-null curve is flat and has m rows") {
    const auto d = dir("rank_null");
    REQUIRE(run("rankprob --m0 100 --m1 0 --method exact --output-dir " + d.string()) == 0);
    const auto rows = read_csv(d / "rankprob.csv");
    REQUIRE(rows.size() == 101);
    CHECK(rows[0] == std::vector<std::string>{"rank", "prob_null_query", "prob_alt_query"});
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(std::abs(std::stod(rows[k][1]) - 0.01) <= 1e-4);
        CHECK(rows[k][2].empty());
    }
}

TEST_CASE("rankprob: exact and approximate curves agree") {
    const auto a = dir("rank_exact");
    const auto b = dir("rank_approx");
    REQUIRE(run("rankprob --m0 50 --m1 50 --tau 1 --method exact --output-dir " + a.string()) == 0);
    REQUIRE(run("rankprob --m0 50 --m1 50 --tau 1 --method approx --output-dir " + b.string()) == 0);
    const auto x = read_csv(a / "rankprob.csv");
    const auto y = read_csv(b / "rankprob.csv");
    REQUIRE(x.size() == 101);
    REQUIRE(y.size() == 101);
    double sup = 0.0;
    for (std::size_t k = 1; k < x.size(); ++k)
        for (int c : {1, 2}) sup = std::max(sup, std::abs(std::stod(x[k][c]) - std::stod(y[k][c])));
    CHECK(sup <= 5e-3);
}

TEST_CASE("exit codes") {
    CHECK(run("rankprob --m0 -3 --m1 2 --tau 1") == 2);
    CHECK(run("rankprob --m0 0 --m1 0") == 2);
    CHECK(run("rankprob --m0 10 --m1 5") == 2);
    CHECK(run("rankprob --m0 3000 --m1 5 --tau 1 --method exact") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("--help") == 0);

    const auto bad = kRoot / "bad_p.csv";
    fs::create_directories(kRoot);
    std::ofstream(bad) << "pvalue,covariate\n0.1,1\n1.5,2\n";
    CHECK(run("adjust --input " + bad.string() + " --output-dir " + dir("bad").string()) == 3);
    const auto data = dataset("signal.csv", 0.8, 2.0);
    CHECK(run("adjust --input " + data.string() + " --covariate-column nope --output-dir " + dir("nocol").string()) ==
          3);
    CHECK(run("adjust --input " + data.string() + " --alpha 2") == 2);
    const auto cfg = kRoot / "broken.json";
    std::ofstream(cfg) << "{ not json";
    CHECK(run("adjust --config " + cfg.string()) == 2);
    CHECK(run("simulate --config " + cfg.string()) == 2);
    CHECK(fs::is_empty(dir("bad")));
}

TEST_CASE("adjust writes a reproducible report whose config echo round-trips") {
    const auto data = dataset("signal.csv", 0.8, 2.0);
    const auto a = dir("adjust_a");
    const auto b = dir("adjust_b");
    REQUIRE(run("--threads 1 adjust --input " + data.string() + " --id-column gene --output-dir " + a.string()) == 0);
    REQUIRE(run("--threads 3 adjust --input " + data.string() + " --id-column gene --output-dir " + b.string()) == 0);
    for (const char* f : {"weights.csv", "decisions.csv", "decisions_bonferroni.csv"})
        CHECK(slurp(a / f) == slurp(b / f));

    const auto report = json::parse(slurp(a / "run_report.json"));
    const auto cfg = report["provenance"]["config"].get<crw::RunConfig>();
    CHECK(json(cfg) == report["provenance"]["config"]);
    CHECK(cfg.input == data.string());
    CHECK(report["provenance"]["input_sha256"].get<std::string>().size() == 64);
    CHECK(report["alpha_grid"].size() == 10);
    CHECK(report["rejections"]["crw_bh"].get<int>() > 0);

    // re-running from the echoed config gives identical outputs
    const auto echo = kRoot / "echo.json";
    auto c2 = cfg;
    c2.output_dir = dir("adjust_c").string();
    std::ofstream(echo) << json(c2).dump();
    REQUIRE(run("adjust --config " + echo.string()) == 0);
    CHECK(slurp(a / "decisions.csv") == slurp(fs::path(c2.output_dir) / "decisions.csv"));

    const auto rows = read_csv(a / "decisions.csv");
    CHECK(rows[0] == std::vector<std::string>{"id", "pvalue", "weight", "weighted_p", "rejected"});
    CHECK(rows.size() == 3001);
}

TEST_CASE("adjust with a constant covariate reproduces BH") {
    const auto data = dataset("flat.csv", 0.8, 2.0, true);
    const auto d = dir("adjust_flat");
    REQUIRE(run("adjust --input " + data.string() + " --output-dir " + d.string()) == 0);
    const auto report = json::parse(slurp(d / "run_report.json"));
    for (const auto& row : report["alpha_grid"]) CHECK(row["crw_continuous_bh"] == row["bh"]);
    const auto w = read_csv(d / "weights.csv");
    for (std::size_t k = 1; k < w.size(); ++k) CHECK(w[k][1] == "1");
}

TEST_CASE("external weights in adjust") {
    const auto data = dataset("signal.csv", 0.8, 2.0);
    const auto wfile = kRoot / "ext.csv";
    {
        std::ofstream out(wfile);
        out << "gene,weight\n";
        for (int i = 0; i < 3000; ++i) out << "g" << i << ",1\n";
    }
    const auto d = dir("adjust_ext");
    REQUIRE(run("adjust --input " + data.string() + " --id-column gene --external-weights " + wfile.string() +
                " --output-dir " + d.string()) == 0);
    const auto report = json::parse(slurp(d / "run_report.json"));
    for (const auto& row : report["alpha_grid"]) CHECK(row["external_bh"] == row["bh"]);
}

TEST_CASE("estimate and weights subcommands") {
    const auto data = dataset("signal.csv", 0.8, 2.0);
    const auto d = dir("estimate");
    REQUIRE(run("estimate --input " + data.string() + " --output-dir " + d.string()) == 0);
    const auto est = json::parse(slurp(d / "estimate.json"));
    CHECK(std::abs(est["estimate"]["pi0_hat"].get<double>() - 0.8) < 0.06);
    CHECK(est["estimate"].contains("power_quantiles"));
    CHECK(read_csv(d / "effects.csv").size() == 3001);

    const auto w = dir("weights");
    REQUIRE(run("weights --m0 900 --m1 100 --tau 2 --effect 2 --output-dir " + w.string()) == 0);
    const auto rows = read_csv(w / "weights.csv");
    REQUIRE(rows.size() == 1001);
    double s = 0.0;
    for (std::size_t k = 1; k < rows.size(); ++k) s += std::stod(rows[k][1]);
    CHECK(s == doctest::Approx(1000.0).epsilon(1e-6));
    CHECK(json::parse(slurp(w / "weights.json"))["delta"]["residual"].get<double>() <= 1e-6);
}

TEST_CASE("simulate writes deterministic figure tables") {
    const auto spec = kRoot / "dilution.json";
    std::ofstream(spec) << R"({"study":"dilution","base":{"m":1000,"replicates":5,"seed":3},
                            "grid":{"pi0":[0.5,0.9],"mu_eps":[1,2]}})";
    const auto a = dir("dil_a");
    const auto b = dir("dil_b");
    REQUIRE(run("--threads 1 simulate --config " + spec.string() + " --output-dir " + a.string()) == 0);
    REQUIRE(run("--threads 4 simulate --config " + spec.string() + " --output-dir " + b.string()) == 0);
    CHECK(slurp(a / "dilution.csv") == slurp(b / "dilution.csv"));
    const auto rows = read_csv(a / "dilution.csv");
    CHECK(rows[0] == std::vector<std::string>{"pi0", "mu_eps", "top_frac", "top_mean_effect"});
    CHECK(rows.size() == 5);

    const auto pspec = kRoot / "power.json";
    std::ofstream(pspec) << R"({"study":"power","base":{"m":1000,"replicates":3,"seed":3},
                             "grid":{"pi0":[0.9],"mu_eps":[1,2]}})";
    const auto p = dir("power");
    REQUIRE(run("simulate --config " + pspec.string() + " --output-dir " + p.string()) == 0);
    // 2 cells x (crw 2 + bh 1 + rdw 2) x 3 metrics + header
    CHECK(read_csv(p / "power.csv").size() == 31);
    const auto q = dir("power_bh");
    REQUIRE(run("simulate --config " + pspec.string() + " --method bh --output-dir " + q.string()) == 0);
    CHECK(read_csv(q / "power.csv").size() == 7);

    const auto bad = kRoot / "badgrid.json";
    std::ofstream(bad) << R"({"study":"power","grid":{"pi0":"x"}})";
    CHECK(run("simulate --config " + bad.string() + " --output-dir " + dir("badgrid").string()) == 2);
}

TEST_CASE("all-null data rarely yields rejections") {
    // any level-0.05 procedure rejects something in about 5% of null
    // datasets, so the clean share is compared with 1 - alpha
    std::size_t clean = 0;
    const std::size_t seeds = 200;
    for (std::size_t s = 0; s < seeds; ++s) {
        crw::SimConfig cfg;
        cfg.m = 2000;
        cfg.pi0 = 1.0;
        cfg.seed = 1000 + s;
        const auto ds = crw::generate_dataset(cfg, 0);
        crw::CalibrationOptions opts;
        opts.exec = crw::Execution::serial;
        const auto cal = crw::calibrate_crw(ds.records, opts);
        clean += crw::weighted_bh(ds.records, cal.weights, 0.05).n_rejections == 0;
    }
    const double se = std::sqrt(0.05 * 0.95 / seeds);
    CHECK(static_cast<double>(clean) / seeds >= 0.95 - 3.0 * se);
}
