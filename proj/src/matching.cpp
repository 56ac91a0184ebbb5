#include "cpa/matching.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cpa/errors.hpp"

namespace cpa {

namespace {

// Relative tolerance under which n_tilde is snapped to the nearest integer;
// closed-form cumulants land a few ulps off integers such as 27N/100.
constexpr double kSnapRel = 1e-12;

bool close_rel(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)}); }

}  // namespace

CumulantTriple cumulants_from_raw_moments(double m1, double m2, double m3) {
    const double t1 = m1, t2 = m2 - m1, t3 = m3 - 3.0 * m2 + 2.0 * m1;
    return {t1, t2 - m1 * m1, 0.5 * (t3 - 3.0 * m1 * t2 + 2.0 * m1 * m1 * m1)};
}

TargetParamsM1 match_m1(const CumulantTriple& g) {
    if (!(g.gamma2 < 0.0) || !(g.gamma3 > 0.0))
        throw RegimeError("M1 matching needs gamma2 < 0 < gamma3, got gamma2=" + std::to_string(g.gamma2) +
                          " gamma3=" + std::to_string(g.gamma3));
    TargetParamsM1 prm;
    prm.p = -g.gamma3 / g.gamma2;
    if (!(prm.p > 0.0 && prm.p < 1.0)) throw InfeasibleMatch("matched p = " + std::to_string(prm.p) + " outside (0,1)");
    double nt = -g.gamma2 * g.gamma2 * g.gamma2 / (g.gamma3 * g.gamma3);
    const double nr = std::round(nt);
    if (std::fabs(nt - nr) <= kSnapRel * std::max(1.0, nt)) nt = nr;
    prm.n_tilde = nt;
    prm.n = static_cast<std::int64_t>(std::floor(nt));
    prm.delta = nt - static_cast<double>(prm.n);
    prm.lambda = g.gamma1 - static_cast<double>(prm.n) * prm.p;

    const double nd = static_cast<double>(prm.n) + prm.delta, p = prm.p;
    if (!close_rel(static_cast<double>(prm.n) * p + prm.lambda, g.gamma1, 1e-10) ||
        !close_rel(-nd * p * p, g.gamma2, 1e-10) || !close_rel(nd * p * p * p, g.gamma3, 1e-10))
        throw NumericalInstability("M1 matching postcondition failed");
    return prm;
}

TargetParamsM2 match_m2(const CumulantTriple& g) {
    if (!(g.gamma2 > 0.0)) throw RegimeError("M2 matching needs gamma2 > 0, got " + std::to_string(g.gamma2));
    const double s = g.gamma2 + g.gamma3;
    if (!(s > 0.0) || !(g.gamma3 > 0.0))
        throw InfeasibleMatch("M2 matching needs gamma3 > 0 and gamma2 + gamma3 > 0, got gamma3=" +
                              std::to_string(g.gamma3));
    TargetParamsM2 prm;
    prm.p_bar = g.gamma2 / s;
    prm.r = g.gamma2 * g.gamma2 * g.gamma2 / (g.gamma3 * g.gamma3);
    prm.lambda = g.gamma1 - g.gamma2 * g.gamma2 / g.gamma3;

    const double qb = prm.q_bar(), pb = prm.p_bar;
    const double e1 = prm.r * qb / pb + prm.lambda, e2 = prm.r * qb * qb / (pb * pb), e3 = prm.r * qb * qb * qb / (pb * pb * pb);
    if (!close_rel(e1, g.gamma1, 1e-10) || !close_rel(e2, g.gamma2, 1e-10) || !close_rel(e3, g.gamma3, 1e-10))
        throw NumericalInstability("M2 matching postcondition failed");
    return prm;
}

Target select_regime(const CumulantTriple& g) {
    if (g.gamma2 < 0.0) return Target::M1;
    if (g.gamma2 > 0.0) return Target::M2;
    throw RegimeError("gamma2 = 0: regime undetermined (pure Poisson)");
}

double MatchResult::lambda() const { return m1_params ? m1_params->lambda : m2_params->lambda; }

LatticeMeasure MatchResult::target_law(double tail_tol) const {
    return m1_params ? make_compound_m1(*m1_params, tail_tol) : make_compound_m2(*m2_params, tail_tol);
}

CompoundOperator MatchResult::op() const { return m1_params ? m1_operator(*m1_params) : m2_operator(*m2_params); }

MatchResult match(const CumulantTriple& gamma) { return match(gamma, select_regime(gamma)); }

MatchResult match(const CumulantTriple& gamma, Target forced) {
    MatchResult r;
    r.which = forced;
    r.diagnostics.theta = std::numeric_limits<double>::quiet_NaN();
    auto fill_theta = [&](auto const& prm) {
        try {
            r.diagnostics.theta = theta_value(prm);
        } catch (const Inapplicable&) {
        }
    };
    if (r.which == Target::M1) {
        r.m1_params = match_m1(gamma);
        r.diagnostics.h_ok = check_assumptions(*r.m1_params).ok;
        r.diagnostics.p_in_range = r.m1_params->p > 0.0 && r.m1_params->p < 1.0;
        fill_theta(*r.m1_params);
    } else {
        r.m2_params = match_m2(gamma);
        r.diagnostics.h_ok = check_assumptions(*r.m2_params).ok;
        r.diagnostics.p_in_range = r.m2_params->p_bar > 0.0 && r.m2_params->p_bar < 1.0;
        fill_theta(*r.m2_params);
    }
    const double lam = r.lambda();
    r.diagnostics.lambda_sign = lam > 0.0 ? 1 : lam < 0.0 ? -1 : 0;
    r.is_signed = lam < 0.0;
    return r;
}

double beta2_from_raw_moments(double m1, double m2, double m3) {
    const double num = m3 - 3.0 * m1 * m2 - 3.0 * m2 + 2.0 * m1 * m1 * m1 + 3.0 * m1 * m1 + 2.0 * m1;
    const double den = m3 - 3.0 * m1 * m2 - m2 + 2.0 * m1 * m1 * m1 + m1 * m1;
    return num / den;
}

}  // namespace cpa
