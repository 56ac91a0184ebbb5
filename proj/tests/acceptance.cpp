// Acceptance checks 1-10; one PASS/FAIL line each, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "cpa/bounds.hpp"
#include "cpa/harness.hpp"
#include "cpa/matching.hpp"
#include "cpa/runs.hpp"
#include "cpa/stein.hpp"

using namespace cpa;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("criterion %2d %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double relerr(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.1, 0.9);
    std::vector<double> p(n);
    for (auto& x : p) x = u(rng);
    return p;
}

void oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    double law_err = 0, cum_err = 0;
    auto cum = [&](const LatticeMeasure& law, const CumulantTriple& c) {
        const auto e = factorial_cumulants(law).gamma;
        cum_err = std::max({cum_err, std::fabs(e.gamma1 - c.gamma1), std::fabs(e.gamma2 - c.gamma2), std::fabs(e.gamma3 - c.gamma3)});
    };
    for (int t = 0; t < 50; ++t) {
        const auto a = RunsModel::one_one(random_probs(rng, 6 + t % 9));
        const int k1 = 1 + t % 2, k2 = 1 + (t / 2) % 3, m = k1 + k2 - 1;
        const auto b = RunsModel::k1k2(k1, k2, random_probs(rng, static_cast<std::size_t>(m * (14 / m))));
        const int k = 1 + t % 4;
        const auto c = RunsModel::kruns(std::max<std::int64_t>(3 * k - 2, 6 + t % 9), k, u(rng));
        for (const auto* mdl : {&a, &b, &c}) {
            const auto law = exact_law(*mdl);
            law_err = std::max(law_err, linf_distance(law, brute_force_law(*mdl)));
        }
        cum(exact_law(a), closed_cumulants_11(a.probs));
        cum(exact_law(b), closed_cumulants_k1k2(b.probs, k1, k2));
        cum(exact_law(c), closed_cumulants_kruns(c.probs[0], k, c.N));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(1, law_err <= 1e-13 && cum_err <= 1e-10 && secs < 60.0,
           fmt("exact vs enumeration Linf %.2e, closed cumulants %.2e, %.1f s", law_err, cum_err, secs));
}

struct TargetPair {
    LatticeMeasure law;
    CompoundOperator op;
};

void stein_identities() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<IntFn> gs{[](std::int64_t) { return 1.0; }, [](std::int64_t k) { return static_cast<double>(k); },
                          [](std::int64_t k) { return static_cast<double>(std::min<std::int64_t>(k, 10)); }};
    for (std::int64_t a = 0; a <= 12; a += 3) gs.push_back([a](std::int64_t k) { return k <= a ? 1.0 : 0.0; });
    double worst = 0;
    bool had_signed = false;
    for (int t = 0; t < 20; ++t) {
        TargetPair tg;
        if (t % 2) {
            const TargetParamsM1 p{static_cast<std::int64_t>(2 + 30 * u(rng)), 0.1 + 0.8 * u(rng), 0.1 + 4 * u(rng), 0, 0};
            tg = {make_compound_m1(p, 1e-15), m1_operator(p)};
        } else {
            const TargetParamsM2 p{1 + 10 * u(rng), 0.3 + 0.6 * u(rng), t == 0 ? -0.2 : 0.1 + 4 * u(rng)};
            tg = {make_compound_m2(p, 1e-15), m2_operator(p)};
            had_signed = had_signed || p.lambda < 0;
        }
        for (const auto& g : gs) worst = std::max(worst, stein_identity_residual(tg.law, tg.op, g));
    }
    report(2, worst <= 1e-9 && had_signed, fmt("max |E A g| = %.2e over 20 targets (one signed)", worst));
}

void panjer() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0;
    for (int t = 0; t < 20; ++t) {
        const TargetParamsM1 p1{static_cast<std::int64_t>(1 + 30 * u(rng)), 0.05 + 0.9 * u(rng), 0.1 + 5 * u(rng), 0, 0};
        worst = std::max(worst, linf_distance(make_compound_m1(p1), convolve(make_binomial(p1.n, p1.p), make_poisson(p1.lambda))));
        const TargetParamsM2 p2{0.3 + 12 * u(rng), 0.15 + 0.8 * u(rng), 0.1 + 5 * u(rng)};
        worst = std::max(worst, linf_distance(make_compound_m2(p2), convolve(make_negative_binomial(p2.r, p2.p_bar), make_poisson(p2.lambda))));
    }
    report(3, worst <= 1e-12, fmt("compound recursion vs convolution Linf %.2e", worst));
}

void delta_g_lemma() {
    const TargetParamsM1 m1{27, 0.8, 2.4, 0.0, 27.0};
    const TargetParamsM2 m2{3.0, 0.5, 0.4};
    auto worst_dg = [](const LatticeMeasure& law, const CompoundOperator& op, double& resid) {
        double w = 0;
        for (std::int64_t a = 0; a <= law.hi(); ++a)
            for (bool upper : {false, true}) {
                const auto s = solve_stein_equation(op, law, [a, upper](std::int64_t k) { return (upper ? k >= a : k <= a) ? 1.0 : 0.0; });
                w = std::max(w, s.max_delta_g);
                resid = std::max(resid, s.residual);
            }
        return w;
    };
    double resid = 0;
    const double w1 = worst_dg(make_compound_m1(m1), m1_operator(m1), resid);
    const double w2 = worst_dg(make_compound_m2(m2), m2_operator(m2), resid);
    const double b1 = delta_g_bound_perturbed(budget_m1(m1), Target::M1), b2 = delta_g_bound_perturbed(budget_m2(m2), Target::M2);
    report(4, w1 <= b1 && w2 <= b2 && resid < 1e-8,
           fmt("max |Dg|: M1 %.4f <= %.4f, M2 %.4f <= %.4f (solver residual %.1e)", w1, b1, w2, b2, resid));
}

void round_trip() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double m2err = 0, m1res = 0;
    for (int t = 0; t < 50; ++t) {
        const TargetParamsM2 p2{0.5 + 15 * u(rng), 0.2 + 0.7 * u(rng), 0.1 + 4 * u(rng)};
        const auto r2 = match_m2(factorial_cumulants(make_compound_m2(p2, 1e-15)).gamma);
        m2err = std::max({m2err, relerr(r2.r, p2.r), relerr(r2.p_bar, p2.p_bar), relerr(r2.lambda, p2.lambda)});
        const TargetParamsM1 p1{static_cast<std::int64_t>(3 + 40 * u(rng)), 0.1 + 0.8 * u(rng), 0.2 + 4 * u(rng), 0, 0};
        const auto g = factorial_cumulants(make_compound_m1(p1, 1e-15)).gamma;
        const auto r1 = match_m1(g);
        const double nd = static_cast<double>(r1.n) + r1.delta;
        m1res = std::max({m1res, relerr(static_cast<double>(r1.n) * r1.p + r1.lambda, g.gamma1), relerr(-nd * r1.p * r1.p, g.gamma2),
                          relerr(nd * r1.p * r1.p * r1.p, g.gamma3)});
    }
    bool runs_ok = true;
    for (std::int64_t N : {50, 100, 1000}) {
        const double p = 0.6;
        const auto m = match_m1(closed_cumulants_11(std::vector<double>(static_cast<std::size_t>(N), p)));
        runs_ok = runs_ok && m.n == 27 * N / 100 && std::fabs(m.p - 10.0 / 3.0 * p * (1 - p)) < 1e-12;
    }
    report(5, m2err <= 1e-9 && m1res <= 1e-10 && runs_ok,
           fmt("M2 rel err %.2e, M1 residual %.2e, (1,1) n = 27N/100 %s", m2err, m1res, runs_ok ? "yes" : "no"));
}

void soundness() {
    int checked = 0, skipped = 0;
    bool ok = true;
    std::string worst;
    double worst_ratio = 0;
    auto take = [&](const char* name, const RunsModel& m, double tv, const BoundReport& r) {
        if (!r.applicable) {
            ++skipped;
            return;
        }
        ++checked;
        const double ratio = tv / r.bound_value;
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            worst = fmt("%s %s N=%lld", name, to_string(m.kind), static_cast<long long>(m.N));
        }
        ok = ok && r.bound_value >= tv;
    };
    auto run = [&](const RunsModel& m) {
        const auto law = exact_law(m);
        const auto mr = match(factorial_cumulants(law).gamma);
        const double tv = tv_distance(law, mr.target_law());
        take("general", m, tv, bound_theorem_main(m, mr, BoundMode::Exact));
        if (m.kind == RunsKind::OneOne) take("(1,1)", m, tv, bound_11runs(m, mr));
        if (m.kind == RunsKind::K1K2) take("(k1,k2)", m, tv, bound_k1k2(m, mr));
        if (m.kind == RunsKind::KRuns) take("k-runs", m, tv, bound_kruns_T5(m.N, m.k2, m.probs[0]));
    };
    for (std::int64_t N : {50, 100, 200}) run(RunsModel::one_one(N, 0.6));
    for (std::int64_t N : {40, 80}) run(RunsModel::k1k2(N, 1, 2, 0.3));
    for (std::int64_t N : {100, 200}) run(RunsModel::kruns(N, 3, 0.3));
    report(6, ok && checked > 0,
           fmt("%d applicable bounds all >= tv (%d inapplicable); largest tv/bound %.3f at %s", checked, skipped, worst_ratio, worst.c_str()));
}

void rates() {
    ExperimentConfig cfg;
    cfg.p = 0.6;
    cfg.mode = BoundMode::Prime;
    // The matched n~ = 0.27 N is an integer only at multiples of 100; elsewhere
    // the rounding remainder delta_N moves tv by up to 3x, so the rate is read
    // off the points where delta_N = 0.
    cfg.sweep = {100, 200, 300, 400};
    std::vector<double> Ns, tv;
    for (const auto& r : run_sweep(cfg)) {
        Ns.push_back(static_cast<double>(r.N));
        tv.push_back(r.tv);
    }
    const double s_tv = fit_loglog(Ns, tv).slope;
    // Both k-runs bounds sit on their caps below N ~ 600 at k = 3, p = 0.3,
    // so the rate comparison uses a grid where neither cap binds.
    std::vector<double> Ks, t5, wx;
    for (std::int64_t N = 2000; N <= 16000; N *= 2) {
        Ks.push_back(static_cast<double>(N));
        t5.push_back(bound_kruns_T5(N, 3, 0.3).bound_value);
        wx.push_back(bound_wang_xia(N, 3, 0.3));
    }
    const double s5 = fit_loglog(Ks, t5).slope, sw = fit_loglog(Ks, wx).slope;
    const bool ok = s_tv >= -1.15 && s_tv <= -0.85 && std::fabs(s5 + 1.0) <= 0.15 && std::fabs(sw + 0.5) <= 0.15;
    report(7, ok, fmt("tv slope %.3f on N 100..400 (delta_N = 0); k-runs bound slopes %.3f and %.3f (comparison) on N 2000..16000", s_tv, s5, sw));
}

void kruns_comparison() {
    bool ok = true;
    std::string d;
    for (std::int64_t N : {100, 200, 400}) {
        const auto r = bound_kruns_T5(N, 3, 0.3);
        const double wx = bound_wang_xia(N, 3, 0.3);
        ok = ok && r.applicable && r.bound_value < wx;
        d += fmt("N=%lld: %.4g vs %.4g  ", static_cast<long long>(N), r.bound_value, wx);
    }
    report(8, ok, d);
}

void smoothness_chain() {
    bool ok = true;
    std::string d;
    for (double p : {0.4, 0.5, 0.6}) {
        const auto m = RunsModel::one_one(14, p);
        double worst = 0;
        for (std::int64_t i = 0; i < 14; ++i)
            for (const auto& e : conditional_laws(m, i).entries) worst = std::max(worst, smoothness_D(e.law));
        const double K = smoothness_K_11runs(14, m.probs);
        ok = ok && worst <= K;
        d += fmt("p=%.1f max D %.3f <= K %.3f; ", p, worst, K);
    }
    const auto pc = product_chain_check(40, 3, 0.3);
    ok = ok && pc.holds;
    d += fmt("product chain excess %.3f over %lld windows", pc.max_excess, static_cast<long long>(pc.windows));
    report(9, ok, d);
}

void determinism() {
    ExperimentConfig cfg;
    cfg.kind = RunsKind::KRuns;
    cfg.k1 = 0;
    cfg.k2 = 3;
    cfg.p = 0.3;
    cfg.sweep = {100, 200};
    const auto a = to_csv(run_sweep(cfg)), b = to_csv(run_sweep(cfg));
    const std::string header = "N,k1,k2,p,gamma1,gamma2,gamma3,target,n,p_match,lambda,delta,r,p_bar,theta,tv,bound,bound_wx,ratio,applicable";
    const bool ok = a == b && a.substr(0, a.find('\n')) == header;
    report(10, ok, fmt("two sweeps %s, header %s", a == b ? "byte-identical" : "differ",
                       a.substr(0, a.find('\n')) == header ? "exact" : "mismatch"));
}

}  // namespace

int main() {
    const std::function<void()> steps[] = {oracle_equivalence, stein_identities, panjer,           delta_g_lemma,    round_trip,
                                           soundness,          rates,            kruns_comparison, smoothness_chain, determinism};
    int id = 1;
    for (const auto& s : steps) {
        try {
            s();
        } catch (const std::exception& e) {
            report(id, false, std::string("threw: ") + e.what());
        }
        ++id;
    }
    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures ? 1 : 0;
}
