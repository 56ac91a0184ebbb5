#include "cpa/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cpa/detail/sum.hpp"
#include "cpa/errors.hpp"

namespace cpa {

using detail::Accumulator;

const char* to_string(BoundMode m) { return m == BoundMode::Exact ? "exact" : "prime"; }

double target_beta(const MatchResult& match) {
    if (match.which == Target::M1) {
        const double p = match.m1_params->p;
        return -p / (1.0 - p);
    }
    return match.m2_params->q_bar();
}

namespace {

// Moments of (X_i, X_A, X_B, X_C) over one window enumeration; the *D sums
// carry the conditional smoothness weight.
struct WindowMoments {
    double Xi = 0, XA = 0, XB = 0, XiXA = 0, XiXB = 0, XiXAXB = 0, XiXA2 = 0, XA2 = 0, XAXB = 0;
    double P1D = 0, P2D = 0, P3D = 0, P4D = 0, XCD = 0;
};

WindowMoments window_moments(const UnitView& view, const WindowEnumeration& en, const std::vector<double>* D) {
    const int c = view.radii.c;
    Accumulator Xi, XA, XB, XiXA, XiXB, XiXAXB, XiXA2, XA2, XAXB, P1D, P2D, P3D, P4D, XCD;
    for (std::size_t g = 0; g < en.groups.size(); ++g) {
        const auto& grp = en.groups[g];
        double xi = 0, xa = 0, xb = 0, xc = 0;
        for (int u = 0; u <= 2 * c; ++u) {
            const double v = grp.values[static_cast<std::size_t>(u)];
            const int d = std::abs(u - c);
            if (d == 0) xi += v;
            if (d <= view.radii.a) xa += v;
            if (d <= view.radii.b) xb += v;
            xc += v;
        }
        const double w = grp.weight, dw = w * (D ? (*D)[g] : 1.0);
        Xi += w * xi;
        XA += w * xa;
        XB += w * xb;
        XiXA += w * xi * xa;
        XiXB += w * xi * xb;
        XiXAXB += w * xi * xa * xb;
        XiXA2 += w * xi * xa * xa;
        XA2 += w * xa * xa;
        XAXB += w * xa * xb;
        const double cb = xc - xb, ca = xc - xa, ba = xb - xa;
        P1D += dw * (xa * (xa + 1) * (6 * xc - 4 * xa - 8) + 6 * xa * (cb + ca - 2) * (ba - 1));
        P2D += dw * (xi * xa * (xa - 1) * (6 * xc - 4 * xa - 10) + 6 * xi * (xa - 1) * (cb + ca - 2) * (ba - 1));
        P3D += dw * (xi * (xb - 1) * (2 * xc - xb - 2));
        P4D += dw * (xb * (2 * xc - xb - 1));
        XCD += dw * xc;
    }
    return {Xi.value(),   XA.value(),     XB.value(),    XiXA.value(), XiXB.value(),
            XiXAXB.value(), XiXA2.value(), XA2.value(),   XAXB.value(), P1D.value(),
            P2D.value(),  P3D.value(),    P4D.value(),   XCD.value()};
}

double assemble_xi(const WindowMoments& m, double beta) {
    const double ob = 1.0 - beta;
    const double t1 = ob / 12.0 * (m.Xi * m.P1D + m.P2D);
    const double t2 = std::fabs(beta) / 2.0 * m.P3D;
    const double t3 = 0.5 * std::fabs(ob * (m.Xi * m.XA - (m.XiXA - m.Xi)) + beta * m.Xi) * m.P4D;
    const double cov = ob * (m.Xi * m.XAXB - m.XiXAXB - m.Xi * m.XA * m.XB + m.XiXA * m.XB) +
                       ob / 2.0 * (m.XiXA2 - m.Xi * m.XA2 + m.XiXA - m.Xi * m.XA) + m.XiXB - m.Xi * m.XB - m.Xi;
    const double t4 = std::fabs(cov) * m.XCD;
    return t1 + t2 + t3 + t4;
}

}  // namespace

XiTerms xi_terms(const UnitView& view, std::int64_t i, double beta, BoundMode mode, Exec exec) {
    const auto en = enumerate_window(view, i, exec);
    XiTerms t;
    t.xi_prime = assemble_xi(window_moments(view, en, nullptr), beta);
    if (mode == BoundMode::Exact) {
        const auto D = conditional_smoothness(view, en);
        t.xi = assemble_xi(window_moments(view, en, &D), beta);
        for (double d : D) t.max_D = std::max(t.max_D, d);
    }
    return t;
}

XiLedger xi_ledger(const UnitView& view, double beta, BoundMode mode) {
    XiLedger led;
    const std::int64_t U = view.units();
    led.exact = mode == BoundMode::Exact;
    // Identical p makes every unit look the same.
    if (view.model->identical()) {
        const auto t = xi_terms(view, 0, beta, mode);
        led.sum_xi_prime = static_cast<double>(U) * t.xi_prime;
        led.max_xi_prime = t.xi_prime;
        led.sum_xi = t.xi ? static_cast<double>(U) * *t.xi : std::numeric_limits<double>::quiet_NaN();
        led.max_D = t.max_D;
        return led;
    }
    std::vector<XiTerms> per(static_cast<std::size_t>(U));
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < U; ++i) per[static_cast<std::size_t>(i)] = xi_terms(view, i, beta, mode, Exec::Serial);
    Accumulator sx, sp;
    for (const auto& t : per) {
        sp += t.xi_prime;
        if (t.xi) sx += *t.xi;
        led.max_xi_prime = std::max(led.max_xi_prime, t.xi_prime);
        led.max_D = std::max(led.max_D, t.max_D);
    }
    led.sum_xi_prime = sp.value();
    led.sum_xi = led.exact ? sx.value() : std::numeric_limits<double>::quiet_NaN();
    return led;
}

UnitView bound_view(const RunsModel& model) {
    return {&model, 1, neighborhood_radii(model, default_bound_convention(model.kind))};
}

double surviving_count(std::int64_t N) {
    const double n = static_cast<double>(N);
    return N % 2 ? 0.5 * n - 3.0 : 0.5 * n - 2.0;
}

namespace {

void fail(BoundReport& r, std::string why) {
    r.applicable = false;
    r.reasons.push_back(std::move(why));
}

// Shared gates and the Theta factor; returns false when the report is dead.
bool theta_gate(BoundReport& r, const MatchResult& match, double& big_theta, double& theta) {
    try {
        const auto tc = match.which == Target::M1 ? theta_constants(*match.m1_params) : theta_constants(*match.m2_params);
        big_theta = tc.big_theta;
        theta = tc.theta;
        r.components["theta"] = theta;
        r.components["Theta"] = big_theta;
    } catch (const Inapplicable& e) {
        fail(r, e.what());
        return false;
    }
    const auto chk = match.which == Target::M1 ? check_assumptions(*match.m1_params) : check_assumptions(*match.m2_params);
    r.components["H_margin"] = chk.margin;
    if (!chk.ok) {
        fail(r, match.which == Target::M1 ? "(H1) fails" : "(H2) fails");
        return false;
    }
    r.reasons.push_back(std::string("lambda sign ") + (match.lambda() < 0 ? "negative" : "non-negative"));
    return true;
}

double delta_term(const MatchResult& match) {
    if (match.which != Target::M1) return 0.0;
    const auto& m = *match.m1_params;
    return m.delta * m.p * m.p / (1.0 - m.p);
}

struct BlockSigma {
    double per_unit = 0.0;  // bound on E[sum_F (1 - abar)]^{-1} for one unit
    bool ok = false;
    std::string why;
};

BlockSigma block_sigma(const BlockModel& bm, std::int64_t N) {
    BlockSigma s;
    const double niz = surviving_count(N);
    double abar = 0.0, live = 0.0, rho = 1.0;
    for (std::size_t j = 0; j < bm.abar.size(); ++j) {
        abar = std::max(abar, bm.abar[j]);
        live = std::max(live, bm.abar_live[j]);
        rho = std::min(rho, bm.rho[j]);
    }
    if (rho >= 1.0) {
        // every neighbour pair leaves T_j free: |F| = N(i,Z) surely
        if (!(abar >= 0.5)) s.why = "abar below 1/2";
        else if (!(abar < 1.0) || !(niz > 0.0)) s.why = "abar = 1 or N too small";
        else {
            s.per_unit = 1.0 / (niz * (1.0 - abar));
            s.ok = true;
        }
        return s;
    }
    if (!(live >= 0.5)) s.why = "abar below 1/2";
    else if (!(live < 1.0) || !(niz > 1.0) || !(rho > 0.0)) s.why = "degenerate block law or N too small";
    else {
        s.per_unit = 2.0 / ((niz - 1.0) * rho * (1.0 - live));
        s.ok = true;
    }
    return s;
}

double default_K(const RunsModel& model) {
    switch (model.kind) {
        case RunsKind::OneOne: return smoothness_K_11runs(model.N, model.probs);
        case RunsKind::KRuns:
            if (model.identical() && model.N > 10 * model.k2) return kruns_smoothness_cap(model.N, model.k2, model.probs[0]);
            return 4.0;
        case RunsKind::K1K2: {
            if (model.window() < 2) return smoothness_K_11runs(model.L(), model.probs);
            const auto bm = block_sums(model);
            const auto s = block_sigma(bm, model.N);
            return s.ok ? std::min(4.0, 16.0 * s.per_unit) : 4.0;
        }
    }
    return 4.0;
}

}  // namespace

BoundReport bound_theorem_main(const RunsModel& model, const MatchResult& match, BoundMode mode,
                               std::optional<double> K) {
    BoundReport r;
    r.applicable = true;
    double Theta = 0.0, theta = 0.0;
    if (!theta_gate(r, match, Theta, theta)) return r;
    const auto view = bound_view(model);
    XiLedger led;
    try {
        led = xi_ledger(view, target_beta(match), mode);
    } catch (const StateSpaceError& e) {
        fail(r, e.what());
        return r;
    }
    const double dt = delta_term(match);
    r.components["delta_term"] = dt;
    r.components["sum_xi_prime"] = led.sum_xi_prime;
    if (led.exact) {
        r.components["sum_xi"] = led.sum_xi;
        r.components["max_D"] = led.max_D;
        r.bound_value = Theta * (led.sum_xi + dt);
    } else {
        const double k = K ? *K : default_K(model);
        r.components["K"] = k;
        r.bound_value = Theta * (k * led.sum_xi_prime + dt);
    }
    return r;
}

double smoothness_K_11runs(std::int64_t N, const std::vector<double>& probs) {
    const double niz = surviving_count(N);
    if (!(niz > 1.0)) return 4.0;
    const auto L = probs.size();
    auto pr = [&](std::int64_t j) { return probs[static_cast<std::size_t>((j % static_cast<std::int64_t>(L) + static_cast<std::int64_t>(L)) % static_cast<std::int64_t>(L))]; };
    double amin = 1.0, rho = 1.0;
    bool same = true;
    for (std::size_t j = 0; j < L; ++j) {
        const auto jj = static_cast<std::int64_t>(j);
        const double a = (1.0 - pr(jj - 1)) * pr(jj);
        if (a > 0.5) return 4.0;
        amin = std::min(amin, a);
        rho = std::min(rho, (1.0 - (1.0 - pr(jj - 2)) * pr(jj - 1)) * (1.0 - (1.0 - pr(jj)) * pr(jj + 1)));
        same = same && probs[j] == probs[0];
    }
    // E|F_2|^{-1} through the binomial chain; identical p uses rho >= 9/16.
    const double inv = same ? 32.0 / (9.0 * niz - 9.0) : 2.0 / ((niz - 1.0) * rho);
    return std::min(4.0, 16.0 * inv / amin);
}

BoundReport bound_11runs(const RunsModel& model, const MatchResult& match) {
    BoundReport r;
    r.applicable = true;
    if (model.window() != 1) {
        fail(r, "not a (1,1)-runs model");
        return r;
    }
    if (match.which != Target::M1) {
        fail(r, "(1,1)-runs bound needs the M1 target");
        return r;
    }
    double Theta = 0.0, theta = 0.0;
    if (!theta_gate(r, match, Theta, theta)) return r;
    const std::int64_t N = model.L();
    const double niz = surviving_count(N);
    if (!(niz > 1.0)) {
        fail(r, "N too small for the thinning argument");
        return r;
    }
    const auto& m = *match.m1_params;
    const double p = m.p, q = 1.0 - p;
    const double gamma = std::floor(static_cast<double>(m.n) + m.lambda / p);
    const auto view = UnitView{&model, 1, neighborhood_radii(model, RadiusConvention::Tight)};
    XiLedger led;
    try {
        led = xi_ledger(view, target_beta(match), BoundMode::Prime);
    } catch (const StateSpaceError& e) {
        fail(r, e.what());
        return r;
    }
    // K / 16 is the per-unit E[sum_{F2} a]^{-1}, uncapped here.
    double amin = 1.0, rho = 1.0;
    const bool same = model.identical();
    for (std::int64_t j = 0; j < N; ++j) {
        amin = std::min(amin, (1.0 - model.prob(j - 1)) * model.prob(j));
        rho = std::min(rho, (1.0 - (1.0 - model.prob(j - 2)) * model.prob(j - 1)) *
                                (1.0 - (1.0 - model.prob(j)) * model.prob(j + 1)));
    }
    const double per_unit = (same ? 32.0 / (9.0 * niz - 9.0) : 2.0 / ((niz - 1.0) * rho)) / amin;
    const double sigma = static_cast<double>(N) * per_unit;
    const double lead = led.max_xi_prime / ((1.0 - 2.0 * theta) * gamma * p * q);
    r.components["xi_prime_max"] = led.max_xi_prime;
    r.components["sigma"] = sigma;
    r.components["delta_term"] = p * p * m.delta;
    r.bound_value = lead * (16.0 * q * sigma + p * p * m.delta);
    return r;
}

double k1k2_threshold(int m) {
    const double a = 2.0 * m + 1.0;
    return 2.0 * a / (2.0 * a * a + 3.0 * m * (m + 1.0));
}

double k1k2_theta_limit(int m, double b) {
    const double a = 2.0 * m + 1.0;
    return m * (m + 1.0) * b / (2.0 * a - (2.0 * a * a + m * (m + 1.0)) * b);
}

BoundReport bound_k1k2(const RunsModel& model, const MatchResult& match) {
    if (model.window() < 2) return bound_11runs(model, match);
    BoundReport r;
    r.applicable = true;
    const int m = model.window();
    r.components["c_m"] = k1k2_threshold(m);
    if (model.identical()) {
        const double p = model.probs[0];
        const double b = std::pow(1.0 - p, model.k1) * std::pow(p, model.k2);
        r.components["b"] = b;
        r.components["theta_limit"] = k1k2_theta_limit(m, b);
    }
    if (match.which != Target::M1) {
        fail(r, "(k1,k2)-runs bound needs the M1 target");
        return r;
    }
    double Theta = 0.0, theta = 0.0;
    if (!theta_gate(r, match, Theta, theta)) return r;
    const auto bm = block_sums(model);
    const auto sig = block_sigma(bm, model.N);
    if (!sig.ok) {
        fail(r, sig.why);
        return r;
    }
    XiLedger led;
    try {
        led = xi_ledger(bm.view(), target_beta(match), BoundMode::Prime);
    } catch (const StateSpaceError& e) {
        fail(r, e.what());
        return r;
    }
    const auto& mp = *match.m1_params;
    const double p = mp.p, q = 1.0 - p;
    const double gamma = std::floor(static_cast<double>(mp.n) + mp.lambda / p);
    const double sigma = static_cast<double>(bm.units) * sig.per_unit;
    r.components["xi_prime_max"] = led.max_xi_prime;
    r.components["sigma"] = sigma;
    r.components["abar"] = *std::max_element(bm.abar.begin(), bm.abar.end());
    r.components["rho"] = *std::min_element(bm.rho.begin(), bm.rho.end());
    r.components["delta_term"] = p * p * mp.delta;
    r.bound_value = led.max_xi_prime / ((1.0 - 2.0 * theta) * gamma * p * q) * (16.0 * q * sigma + p * p * mp.delta);
    return r;
}

BoundReport bound_kruns_T5(std::int64_t N, int k, double p) {
    BoundReport r;
    r.applicable = true;
    if (!(p < 0.5)) fail(r, "needs p < 1/2");
    if (!(N > 10 * static_cast<std::int64_t>(k))) fail(r, "needs N > 10k");
    if (!r.applicable) return r;
    const double pk = std::pow(p, k);
    const double lead = std::min(9.0, 95.22 * (1.0 - 2.0 * p) / ((N - 10.0 * k + 8.0) * pk * (1.0 - p) * (1.0 - p)));
    const double poly = (2.0 * k - 1.0) * (4.0 * k - 3.0) * (6.0 * k - 5.0) * p * p * p;
    r.components["lead"] = lead;
    r.components["poly"] = poly;
    r.bound_value = lead * poly;
    return r;
}

double bound_wang_xia(std::int64_t N, int k, double p) {
    const double s = (N - 4.0 * k + 2.0) * std::pow(p, k) * std::pow(1.0 - p, 3);
    const double tail = s > 0.0 ? std::min(2.0, 4.6 / std::sqrt(s)) : 2.0;
    return 4.5 * (4.0 * k - 3.0) * (2.0 * k - 1.0) * p * p * tail;
}

double kruns_smoothness_cap(std::int64_t N, int k, double p) {
    const double den = (N - 10.0 * k + 8.0) * std::pow(p, k) * std::pow(1.0 - p, 3);
    return den > 0.0 ? std::min(1.0, 10.58 / den) : 1.0;
}

namespace {

// Law of the number of k-runs ending in trials t0..t1 of a linear segment,
// counting only runs that lie inside it; fixed[t - t0] is -1 for free trials.
std::vector<double> segment_law(const std::vector<int>& fixed, int k, double p) {
    const std::size_t n = fixed.size();
    std::vector<double> cur((static_cast<std::size_t>(k) + 1) * (n + 1), 0.0), nxt(cur.size());
    const std::size_t W = n + 1;
    cur[0] = 1.0;
    for (std::size_t t = 0; t < n; ++t) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (int run = 0; run <= k; ++run)
            for (std::size_t c = 0; c <= t; ++c) {
                const double v = cur[static_cast<std::size_t>(run) * W + c];
                if (v == 0.0) continue;
                for (int b = 0; b < 2; ++b) {
                    if (fixed[t] >= 0 && fixed[t] != b) continue;
                    const double pb = fixed[t] >= 0 ? 1.0 : (b ? p : 1.0 - p);
                    const int nr = b ? std::min(run + 1, k) : 0;
                    const std::size_t nc = c + (nr == k ? 1 : 0);
                    nxt[static_cast<std::size_t>(nr) * W + nc] += v * pb;
                }
            }
        std::swap(cur, nxt);
    }
    std::vector<double> law(W, 0.0);
    for (int run = 0; run <= k; ++run)
        for (std::size_t c = 0; c < W; ++c) law[c] += cur[static_cast<std::size_t>(run) * W + c];
    return law;
}

std::vector<LatticeMeasure> half_laws(std::int64_t t0, std::int64_t t1, std::int64_t h0, std::int64_t h1, int k,
                                      double p) {
    const int bits = static_cast<int>(std::max<std::int64_t>(0, h1 - h0 + 1));
    std::map<std::vector<double>, int> seen;
    std::vector<LatticeMeasure> out;
    for (std::uint64_t cfg = 0; cfg < (std::uint64_t{1} << bits); ++cfg) {
        std::vector<int> fixed(static_cast<std::size_t>(t1 - t0 + 1), -1);
        for (int b = 0; b < bits; ++b) fixed[static_cast<std::size_t>(h0 + b - t0)] = static_cast<int>((cfg >> b) & 1u);
        auto law = segment_law(fixed, k, p);
        if (seen.emplace(law, 0).second) out.push_back(LatticeMeasure::from_weights(0, std::move(law)));
    }
    for (auto& m : out) trim(m);
    return out;
}

}  // namespace

ProductChainCheck product_chain_check(std::int64_t N, int k, double p) {
    if (k < 1 || N < 4 * k) throw DomainError("product chain check needs N >= 4k");
    const std::int64_t T = N + k - 1;
    const std::int64_t N1 = (N - k) / 2;
    const std::int64_t g0 = N1, g1 = N1 + k - 2;  // gap indicators
    const std::int64_t c0 = std::max<std::int64_t>(0, g0 - 3 * k), c1 = std::min<std::int64_t>(N - 1, g1 + 3 * k);
    const std::int64_t h0 = c0, h1 = std::min<std::int64_t>(T - 1, c1 + k - 1);  // trials fixing X_C
    if (h1 - h0 + 1 > kMaxWindowBits) throw StateSpaceError("product chain window too wide");
    const std::int64_t split = N1 + k - 1;  // first trial of W_2
    const auto left = half_laws(0, split - 1, h0, split - 1, k, p);
    const auto right = half_laws(split, T - 1, split, h1, k, p);
    std::vector<double> d1l, d1r;
    for (const auto& m : left) d1l.push_back(smoothness_D1(m));
    for (const auto& m : right) d1r.push_back(smoothness_D1(m));
    ProductChainCheck out;
    out.max_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < left.size(); ++a)
        for (std::size_t b = 0; b < right.size(); ++b) {
            const double D = smoothness_D(convolve(left[a], right[b]));
            const double prod = d1l[a] * d1r[b];
            out.max_D = std::max(out.max_D, D);
            out.max_product = std::max(out.max_product, prod);
            out.max_excess = std::max(out.max_excess, D - prod);
            ++out.windows;
        }
    out.holds = out.max_excess <= 1e-12;
    return out;
}

}  // namespace cpa
