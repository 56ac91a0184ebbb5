#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cpa/errors.hpp"
#include "cpa/harness.hpp"
#include "doctest.h"

using namespace cpa;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config(
        "# (1,1)-runs sweep\n"
        "kind = one_one\n"
        "p = 0.6   # success probability\n"
        "sweep = 200, 50,100\n"
        "mode = prime\n"
        "format = json\n");
    CHECK(cfg.kind == RunsKind::OneOne);
    CHECK(cfg.p == 0.6);
    CHECK(cfg.sweep == std::vector<std::int64_t>{200, 50, 100});
    CHECK(cfg.mode == BoundMode::Prime);
    CHECK(cfg.format == "json");
    CHECK_FALSE(cfg.target.has_value());

    const auto kr = parse_config("kind = kruns\nk = 3\np = 0.3\nN = 100\ntarget = M2\n");
    CHECK(kr.k1 == 0);
    CHECK(kr.k2 == 3);
    CHECK(kr.target == Target::M2);

    CHECK_THROWS_AS(parse_config("kind = one_one\np = 0.6\nsweep = 50\ncolour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("kind = one_one\np = 0.6\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("kind = one_one\np = 1.6\nsweep = 50\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("kind = one_one\np = abc\nsweep = 50\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("kind = pairs\np = 0.5\nsweep = 50\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.txt"), ConfigError);
}

TEST_CASE("probabilities file is cycled over the trials") {
    const auto dir = std::filesystem::temp_directory_path() / "cpa_harness_probs";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "p.txt") << "# alternating\n0.55\n0.65\n";
        std::ofstream(dir / "cfg.txt") << "kind = one_one\nprobs_file = p.txt\nsweep = 12\n";
    }
    const auto cfg = load_config((dir / "cfg.txt").string());
    const auto m = build_model(cfg, 12);
    CHECK(m.L() == 12);
    CHECK(m.probs[0] == 0.55);
    CHECK(m.probs[3] == 0.65);
    std::filesystem::remove_all(dir);
}

TEST_CASE("CSV and JSON output") {
    CHECK(std::string(kCsvHeader) ==
          "N,k1,k2,p,gamma1,gamma2,gamma3,target,n,p_match,lambda,delta,r,p_bar,theta,tv,bound,bound_wx,ratio,applicable");
    CHECK(to_csv({}) == std::string(kCsvHeader) + "\n");

    ExperimentConfig cfg;
    cfg.kind = RunsKind::KRuns;
    cfg.k1 = 0;
    cfg.k2 = 3;
    cfg.p = 0.3;
    cfg.mode = BoundMode::Prime;
    cfg.sweep = {60, 40};
    const auto recs = run_sweep(cfg);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].N == 40);
    const auto csv = to_csv(recs);
    CHECK(csv.substr(0, csv.find('\n')) == kCsvHeader);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    const auto js = nlohmann::json::parse(to_json(recs));
    REQUIRE(js.is_array());
    REQUIRE(js.size() == 2);
    CHECK(js[1]["N"] == 60);
    CHECK(js[1]["target"] == "M2");
    CHECK(js[1]["gamma1"].get<double>() == recs[1].gamma1);
    CHECK(js[1]["tv"].get<double>() == recs[1].tv);
}

TEST_CASE("slope fits") {
    std::vector<double> x, y;
    for (double n : {50.0, 100.0, 200.0, 400.0, 800.0}) {
        x.push_back(n);
        y.push_back(3.7 / n);
    }
    const auto f = fit_loglog(x, y);
    CHECK(std::fabs(f.slope + 1.0) < 1e-12);
    CHECK(f.r2 == doctest::Approx(1.0));
    CHECK_THROWS_AS(fit_loglog({1.0, 2.0}, {1.0, 0.5}), DomainError);

    std::vector<SweepRecord> recs(4);
    for (std::size_t i = 0; i < 4; ++i) {
        recs[i].N = 100 << i;
        recs[i].tv = 2.0 / static_cast<double>(recs[i].N);
        recs[i].applicable = true;
    }
    recs[3].tv = 0.0;  // dropped
    const auto g = fit_decay_slope(recs);
    CHECK(g.used == 3);
    CHECK(std::fabs(g.slope + 1.0) < 1e-12);
}

TEST_CASE("(1,1)-runs sweep") {
    ExperimentConfig cfg;
    cfg.p = 0.6;
    cfg.sweep = {50, 100, 200, 400};
    cfg.mode = BoundMode::Prime;
    const auto recs = run_sweep(cfg);
    REQUIRE(recs.size() == 4);
    for (const auto& r : recs) {
        CHECK(r.target == "M1");
        CHECK_FALSE(r.tv_is_estimate);
        if (r.applicable) CHECK(r.ratio <= 1.0);
    }
    // theta is about 0.53 at N = 50, above the theorem's 1/2 gate
    CHECK_FALSE(recs[0].applicable);
    CHECK(recs[0].theta > 0.5);
    for (std::size_t i = 1; i < 4; ++i) CHECK(recs[i].applicable);

    // rate at constant delta_N = 0
    cfg.sweep = {100, 200, 300, 400};
    std::vector<double> Ns, tv;
    for (const auto& r : run_sweep(cfg)) {
        CHECK(r.delta == 0.0);
        Ns.push_back(static_cast<double>(r.N));
        tv.push_back(r.tv);
    }
    const double s = fit_loglog(Ns, tv).slope;
    CHECK(s >= -1.15);
    CHECK(s <= -0.85);
}

TEST_CASE("single-trial pattern is binomial") {
    ExperimentConfig cfg;
    cfg.kind = RunsKind::KRuns;
    cfg.k1 = 0;
    cfg.k2 = 1;
    cfg.p = 0.3;
    cfg.sweep = {20, 40};
    for (const auto& r : run_sweep(cfg)) {
        CHECK(r.target == "M1");
        CHECK(r.delta == 0.0);
        CHECK(std::fabs(r.lambda) < 1e-9);
        CHECK(r.tv < 1e-9);
    }
}

TEST_CASE("determinism") {
    ExperimentConfig cfg;
    cfg.kind = RunsKind::K1K2;
    cfg.k1 = 1;
    cfg.k2 = 2;
    cfg.p = 0.3;
    cfg.sweep = {40, 30, 50};
    const auto a = to_csv(run_sweep(cfg, Exec::Parallel));
    const auto b = to_csv(run_sweep(cfg, Exec::Parallel));
    const auto c = to_csv(run_sweep(cfg, Exec::Serial));
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("Monte Carlo fallback") {
    const auto m = RunsModel::kruns(30, 3, 0.3);
    const auto a = monte_carlo_law(m, 50000, 17), b = monte_carlo_law(m, 50000, 17), c = monte_carlo_law(m, 50000, 18);
    CHECK(linf_distance(a, b) == 0.0);
    CHECK(linf_distance(a, c) > 0.0);
    CHECK(a.mass() == doctest::Approx(1.0));
    CHECK(tv_distance(a, exact_law(m)) < 0.03);

    ExperimentConfig cfg;
    cfg.kind = RunsKind::KRuns;
    cfg.k1 = 0;
    cfg.k2 = 3;
    cfg.p = 0.3;
    cfg.sweep = {60};
    cfg.mc_samples = 200000;
    const auto exact = evaluate_point(cfg, 60);
    cfg.exact_limit = 10;
    const auto est = evaluate_point(cfg, 60);
    CHECK(est.tv_is_estimate);
    CHECK_FALSE(exact.tv_is_estimate);
    CHECK(est.gamma3 == doctest::Approx(exact.gamma3).epsilon(1e-9));
    CHECK(std::fabs(est.tv - exact.tv) < 0.02);
}

TEST_CASE("sweep CLI writes identical files") {
    const char* cli = std::getenv("CPA_CLI");
    if (!cli) {
        MESSAGE("CPA_CLI not set; skipping");
        return;
    }
    const auto dir = std::filesystem::temp_directory_path() / "cpa_cli_det";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "cfg.txt") << "kind = kruns\nk = 3\np = 0.3\nsweep = 100, 60\nmode = prime\n";
    for (const char* name : {"a.csv", "b.csv"}) {
        const std::string cmd = std::string(cli) + " sweep --config " + (dir / "cfg.txt").string() + " --out " + (dir / name).string();
        CHECK(std::system(cmd.c_str()) == 0);
    }
    const auto a = slurp(dir / "a.csv");
    CHECK(a.substr(0, a.find('\n')) == kCsvHeader);
    CHECK(a == slurp(dir / "b.csv"));
    std::filesystem::remove_all(dir);
}
