#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpa/bounds.hpp"
#include "cpa/errors.hpp"
#include "cpa/harness.hpp"
#include "cpa/matching.hpp"
#include "cpa/runs.hpp"
#include "cpa/stein.hpp"

using nlohmann::json;

namespace {

struct ModelFlags {
    std::string kind = "one_one";
    std::int64_t N = 100;
    int k = 2, k1 = 1, k2 = 1;
    double p = 0.5;
    std::string probs_file;
    std::string target = "auto";
    std::string mode = "exact";

    void attach(CLI::App* app) {
        app->add_option("--kind", kind, "one_one | k1k2 | kruns")->check(CLI::IsMember({"one_one", "k1k2", "kruns"}));
        app->add_option("--N", N, "number of trials (blocks of m trials for k1k2)");
        app->add_option("--k", k, "run length for kruns");
        app->add_option("--k1", k1, "leading failures for k1k2");
        app->add_option("--k2", k2, "trailing successes for k1k2");
        app->add_option("--p", p, "success probability");
        app->add_option("--probs-file", probs_file, "per-trial probabilities, cycled over the trials");
        app->add_option("--target", target, "auto | M1 | M2")->check(CLI::IsMember({"auto", "M1", "M2"}));
        app->add_option("--mode", mode, "exact | prime")->check(CLI::IsMember({"exact", "prime"}));
    }

    cpa::ExperimentConfig config() const {
        std::string text = "kind = " + kind + "\nk = " + std::to_string(k) + "\nk1 = " + std::to_string(k1) +
                           "\nk2 = " + std::to_string(k2) + "\ntarget = " + target + "\nmode = " + mode +
                           "\nsweep = " + std::to_string(N) + "\n";
        char buf[64];
        std::snprintf(buf, sizeof buf, "p = %.17g\n", p);
        text += buf;
        auto cfg = cpa::parse_config(text);
        if (!probs_file.empty()) cfg.probs = cpa::load_probs(probs_file);
        return cfg;
    }
};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json match_json(const cpa::MatchResult& m) {
    json j{{"target", cpa::to_string(m.which)},
           {"is_signed", m.is_signed},
           {"h_ok", m.diagnostics.h_ok},
           {"theta", num(m.diagnostics.theta)},
           {"lambda_sign", m.diagnostics.lambda_sign}};
    if (m.m1_params) {
        const auto& q = *m.m1_params;
        j["n"] = q.n;
        j["p"] = q.p;
        j["lambda"] = q.lambda;
        j["delta"] = q.delta;
        j["n_tilde"] = q.n_tilde;
    } else {
        const auto& q = *m.m2_params;
        j["r"] = q.r;
        j["p_bar"] = q.p_bar;
        j["lambda"] = q.lambda;
    }
    return j;
}

json report_json(const cpa::BoundReport& r) {
    json c = json::object();
    for (const auto& [k, v] : r.components) c[k] = num(v);
    return {{"applicable", r.applicable},
            {"bound", r.applicable ? num(r.bound_value) : json(nullptr)},
            {"reasons", r.reasons},
            {"components", c}};
}

std::vector<double> parse_triple(const std::string& s) {
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        v.push_back(std::stod(s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (v.size() != 3) throw cpa::ConfigError("expected three comma-separated numbers");
    return v;
}

int cmd_match(const ModelFlags& mf, const std::string& gamma, const std::string& moments) {
    cpa::CumulantTriple g;
    if (!gamma.empty()) {
        const auto v = parse_triple(gamma);
        g = {v[0], v[1], v[2]};
    } else if (!moments.empty()) {
        const auto v = parse_triple(moments);
        g = cpa::cumulants_from_raw_moments(v[0], v[1], v[2]);
    } else {
        const auto cfg = mf.config();
        g = cpa::factorial_cumulants(cpa::exact_law(cpa::build_model(cfg, mf.N))).gamma;
    }
    const auto m = mf.target == "auto" ? cpa::match(g) : cpa::match(g, mf.target == "M1" ? cpa::Target::M1 : cpa::Target::M2);
    json out{{"gamma", {g.gamma1, g.gamma2, g.gamma3}}, {"match", match_json(m)}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_law(const ModelFlags& mf) {
    const auto cfg = mf.config();
    const auto model = cpa::build_model(cfg, mf.N);
    const auto law = cpa::exact_law(model);
    const auto g = cpa::factorial_cumulants(law).gamma;
    json out{{"kind", cpa::to_string(model.kind)},
             {"N", model.N},
             {"trials", model.L()},
             {"offset", law.offset},
             {"pmf", law.weights},
             {"gamma", {g.gamma1, g.gamma2, g.gamma3}}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_bound(const ModelFlags& mf) {
    const auto cfg = mf.config();
    const auto model = cpa::build_model(cfg, mf.N);
    const auto law = cpa::exact_law(model);
    const auto g = cpa::factorial_cumulants(law).gamma;
    const auto m = cfg.target ? cpa::match(g, *cfg.target) : cpa::match(g);
    const double tv = cpa::tv_distance(law, m.target_law());
    json out{{"gamma", {g.gamma1, g.gamma2, g.gamma3}}, {"match", match_json(m)}, {"tv", tv}};
    bool any = false;
    auto add = [&](const char* name, const cpa::BoundReport& r) {
        out["bounds"][name] = report_json(r);
        any = any || r.applicable;
    };
    add("main", cpa::bound_theorem_main(model, m, cfg.mode));
    if (model.kind == cpa::RunsKind::OneOne) add("runs_11", cpa::bound_11runs(model, m));
    if (model.kind == cpa::RunsKind::K1K2) add("runs_k1k2", cpa::bound_k1k2(model, m));
    if (model.kind == cpa::RunsKind::KRuns && model.identical()) {
        add("kruns", cpa::bound_kruns_T5(model.N, model.k2, model.probs[0]));
        out["bounds"]["wang_xia"] = cpa::bound_wang_xia(model.N, model.k2, model.probs[0]);
    }
    std::cout << out.dump(2) << "\n";
    return any ? 0 : 2;
}

// Quick self-check: oracles against each other on small instances.
int cmd_verify() {
    int failed = 0;
    auto line = [&](const char* what, bool ok, double val) {
        std::printf("%-44s %s (%.3g)\n", what, ok ? "ok" : "FAIL", val);
        failed += ok ? 0 : 1;
    };
    {
        double worst = 0.0;
        for (auto model : {cpa::RunsModel::one_one(12, 0.35), cpa::RunsModel::k1k2(4, 1, 2, 0.4),
                           cpa::RunsModel::kruns(13, 3, 0.55)})
            worst = std::max(worst, cpa::linf_distance(cpa::exact_law(model), cpa::brute_force_law(model)));
        line("transfer DP vs brute force", worst <= 1e-13, worst);
    }
    {
        const auto m = cpa::RunsModel::k1k2(9, 2, 1, 0.3);
        const auto a = cpa::factorial_cumulants(cpa::exact_law(m)).gamma;
        const auto b = cpa::closed_cumulants_k1k2(m.probs, 2, 1);
        const double err = std::fabs(a.gamma3 - b.gamma3) + std::fabs(a.gamma2 - b.gamma2);
        line("closed cumulants vs exact law", err <= 1e-10, err);
    }
    {
        const cpa::TargetParamsM1 p1{8, 0.3, 1.2, 0.0, 8.0};
        const auto law = cpa::make_compound_m1(p1);
        const auto conv = cpa::convolve(cpa::make_binomial(8, 0.3), cpa::make_poisson(1.2));
        line("compound recursion vs convolution", cpa::linf_distance(law, conv) <= 1e-12, cpa::linf_distance(law, conv));
        const auto op = cpa::m1_operator(p1);
        const double res = cpa::stein_identity_residual(law, op, [](std::int64_t k) { return static_cast<double>(std::min<std::int64_t>(k, 10)); });
        line("Stein identity, M1", res <= 1e-9, res);
    }
    {
        const cpa::TargetParamsM2 p2{18.5, 0.7, -2.6};
        const auto law = cpa::make_compound_m2(p2);
        const double res = cpa::stein_identity_residual(law, cpa::m2_operator(p2), [](std::int64_t k) { return static_cast<double>(k); });
        line("Stein identity, signed M2", res <= 1e-9, res);
    }
    {
        const auto m = cpa::RunsModel::one_one(100, 0.6);
        const auto law = cpa::exact_law(m);
        const auto mr = cpa::match(cpa::factorial_cumulants(law).gamma);
        const double tv = cpa::tv_distance(law, mr.target_law());
        const auto r = cpa::bound_theorem_main(m, mr, cpa::BoundMode::Exact);
        line("(1,1)-runs N=100 bound >= tv", r.applicable && r.bound_value >= tv, r.bound_value - tv);
    }
    return failed ? 1 : 0;
}

int cmd_sweep(const ModelFlags& mf, const std::string& config, const std::vector<std::int64_t>& sweep,
              std::string out, std::string format) {
    auto cfg = config.empty() ? mf.config() : cpa::load_config(config);
    if (config.empty() && !sweep.empty()) cfg.sweep = sweep;
    if (!out.empty()) cfg.out = out;
    if (!format.empty()) cfg.format = format;
    cpa::validate(cfg);
    const auto recs = cpa::run_sweep(cfg);
    cpa::emit(recs, cfg.format, cfg.out);
    for (const auto& r : recs)
        if (!r.applicable && !r.note.empty()) std::fprintf(stderr, "N=%lld: %s\n", static_cast<long long>(r.N), r.note.c_str());
    for (const auto& r : recs)
        if (r.applicable) return 0;
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compound binomial/negative-binomial approximation of run statistics"};
    app.require_subcommand(1);
    ModelFlags mf;
    std::string gamma, moments, config, out, format;
    std::vector<std::int64_t> sweep;

    auto* c_match = app.add_subcommand("match", "factorial cumulants or moments -> matched target");
    mf.attach(c_match);
    c_match->add_option("--gamma", gamma, "gamma1,gamma2,gamma3");
    c_match->add_option("--moments", moments, "raw moments m1,m2,m3");

    auto* c_law = app.add_subcommand("law", "exact law of the run count as JSON");
    mf.attach(c_law);

    auto* c_bound = app.add_subcommand("bound", "exact tv and every bound for one model");
    mf.attach(c_bound);

    auto* c_verify = app.add_subcommand("verify", "run the oracle self-checks");

    auto* c_sweep = app.add_subcommand("sweep", "sweep over N and write CSV or JSON");
    mf.attach(c_sweep);
    c_sweep->add_option("--config", config, "key = value experiment file");
    c_sweep->add_option("--sweep", sweep, "N values")->delimiter(',');
    c_sweep->add_option("--out", out, "output path (stdout when empty)");
    c_sweep->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    CLI11_PARSE(app, argc, argv);
    try {
        if (*c_match) return cmd_match(mf, gamma, moments);
        if (*c_law) return cmd_law(mf);
        if (*c_bound) return cmd_bound(mf);
        if (*c_verify) return cmd_verify();
        if (*c_sweep) return cmd_sweep(mf, config, sweep, out, format);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
