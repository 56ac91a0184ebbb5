#include "cpa/stein.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpa/detail/sum.hpp"
#include "cpa/errors.hpp"

namespace cpa {

using detail::Accumulator;

const char* to_string(Target t) { return t == Target::M1 ? "M1" : "M2"; }

UnifiedOperator binomial_operator(double n, double p) { return {n * p / (1.0 - p), -p / (1.0 - p)}; }
UnifiedOperator negative_binomial_operator(double r, double p_bar) { return {r * (1.0 - p_bar), 1.0 - p_bar}; }
UnifiedOperator pseudo_binomial_operator(double N, double p) { return binomial_operator(N, p); }

CompoundOperator compound_from_unified(const UnifiedOperator& u, double lambda) {
    return {u.alpha + lambda * (1.0 - u.beta), u.beta, lambda};
}

CompoundOperator m1_operator(const TargetParamsM1& prm) {
    return compound_from_unified(binomial_operator(static_cast<double>(prm.n), prm.p), prm.lambda);
}

CompoundOperator m2_operator(const TargetParamsM2& prm) {
    return compound_from_unified(negative_binomial_operator(prm.r, prm.p_bar), prm.lambda);
}

UnifiedOperator m1_base_operator(const TargetParamsM1& prm) {
    return pseudo_binomial_operator(static_cast<double>(prm.n) + prm.lambda / prm.p, prm.p);
}

UnifiedOperator m2_base_operator(const TargetParamsM2& prm) {
    return negative_binomial_operator(prm.r + prm.lambda * prm.p_bar / prm.q_bar(), prm.p_bar);
}

double apply_unified(const UnifiedOperator& op, const IntFn& g, std::int64_t k) {
    const double kk = static_cast<double>(k);
    return (op.alpha + op.beta * kk) * g(k + 1) - kk * g(k);
}

double apply_compound(const CompoundOperator& op, const IntFn& g, std::int64_t k) {
    const double kk = static_cast<double>(k);
    const double g1 = g(k + 1);
    return (op.a + op.beta * kk) * g1 - kk * g(k) - op.lambda * op.beta * (g(k + 2) - g1);
}

double stein_identity_residual(const LatticeMeasure& target, const CompoundOperator& op, const IntFn& g) {
    Accumulator acc;
    for (std::int64_t k = target.lo(); k <= target.hi(); ++k) acc += target.at(k) * apply_compound(op, g, k);
    return std::fabs(acc.value());
}

double SteinSolution::at(std::int64_t k) const {
    if (g.empty() || k <= 0) return 0.0;
    const auto idx = std::min<std::int64_t>(k, static_cast<std::int64_t>(g.size()) - 1);
    return g[static_cast<std::size_t>(idx)];
}

namespace {

// min_c max_k |u_k + c v_k| for a convex piecewise-linear objective.
double minimax_coefficient(const std::vector<double>& u, const std::vector<double>& v) {
    double umax = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        umax = std::max(umax, std::fabs(u[i]));
        vmax = std::max(vmax, std::fabs(v[i]));
    }
    if (umax == 0.0 || vmax == 0.0) return 0.0;
    auto obj = [&](double c) {
        double r = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) r = std::max(r, std::fabs(u[i] + c * v[i]));
        return r;
    };
    // At the optimum |c| vmax - umax <= obj(c) <= obj(0) = umax.
    double lo = -2.0 * umax / vmax, hi = 2.0 * umax / vmax;
    for (int it = 0; it < 300 && hi - lo > 1e-16 * (std::fabs(lo) + std::fabs(hi)); ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (obj(m1) < obj(m2))
            hi = m2;
        else
            lo = m1;
    }
    const double c = 0.5 * (lo + hi);
    return obj(c) <= umax ? c : 0.0;
}

}  // namespace

SteinSolution solve_stein_equation(const CompoundOperator& op, const LatticeMeasure& target, const IntFn& h) {
    return solve_stein_equation(op, target, h, target.hi());
}

SteinSolution solve_stein_equation(const CompoundOperator& op, const LatticeMeasure& target, const IntFn& h,
                                   std::int64_t support_max) {
    if (target.lo() < 0) throw ContractViolation("Stein solver needs a target supported on the non-negative integers");
    const std::int64_t K = std::min(support_max, target.hi());
    if (K < 2) throw ContractViolation("Stein solver needs support_max >= 2");
    const auto n = static_cast<std::size_t>(K) + 1;

    std::vector<double> mu(n), f(n);
    Accumulator eh;
    for (std::size_t k = 0; k < n; ++k) {
        mu[k] = target.at(static_cast<std::int64_t>(k));
        eh += mu[k] * h(static_cast<std::int64_t>(k));
    }
    const double Eh = eh.value();
    for (std::size_t k = 0; k < n; ++k) f[k] = h(static_cast<std::int64_t>(k)) - Eh;

    // Summing the equation against mu over j <= k telescopes (Stein identity
    // of the target) to the flux form
    //   (k+1) mu_{k+1} g(k+1) + d mu_k g(k+2) = S_k,   d = -lambda beta.
    // S_k is taken from whichever tail is smaller to avoid cancellation.
    std::vector<double> lower(n), upper(n), cdf(n);
    {
        Accumulator a, c;
        for (std::size_t k = 0; k < n; ++k) {
            a += mu[k] * f[k];
            c += mu[k];
            lower[k] = a.value();
            cdf[k] = c.value();
        }
        Accumulator b;
        for (std::size_t k = n; k-- > 0;) {
            upper[k] = -b.value();
            b += mu[k] * f[k];
        }
    }
    std::vector<double> S(n);
    for (std::size_t k = 0; k < n; ++k) S[k] = cdf[k] <= 0.5 ? lower[k] : upper[k];

    const double d = -op.lambda * op.beta;
    std::vector<double> g(n + 1, 0.0);  // g(0..K+1)

    if (d == 0.0) {
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const double den = static_cast<double>(k + 1) * mu[k + 1];
            g[k + 1] = den != 0.0 ? S[k] / den : g[k];
        }
        g[n] = g[n - 1];
    } else {
        // Rows 0..K-2 determine g(1..K) up to the homogeneous solution.  Going
        // outward from the peak of the homogeneous solution keeps both sweeps
        // stable: errors shrink by |rho_k| (downward) or 1/|rho_k| (upward).
        const std::size_t rows = n - 2;
        std::vector<double> logu(rows + 1, 0.0);
        for (std::size_t k = 0; k < rows; ++k) {
            const double num = std::fabs(d * mu[k]), den = std::fabs(static_cast<double>(k + 1) * mu[k + 1]);
            if (num == 0.0 || den == 0.0 || !std::isfinite(num / den))
                throw NumericalInstability("singular Stein system at k=" + std::to_string(k) +
                                           "; retry with a larger or smaller support_max");
            logu[k + 1] = logu[k] - std::log(num / den);
        }
        const std::size_t ks = static_cast<std::size_t>(std::max_element(logu.begin(), logu.end()) - logu.begin());

        auto sweep = [&](const std::vector<double>& rhs, double start) {
            std::vector<double> x(n, 0.0);  // x(0..K)
            x[ks + 1] = start;
            for (std::size_t k = ks; k-- > 0;)
                x[k + 1] = (rhs[k] - d * mu[k] * x[k + 2]) / (static_cast<double>(k + 1) * mu[k + 1]);
            for (std::size_t k = ks; k < rows; ++k)
                x[k + 2] = (rhs[k] - static_cast<double>(k + 1) * mu[k + 1] * x[k + 1]) / (d * mu[k]);
            return x;
        };
        const auto gp = sweep(S, 0.0);
        const auto hom = sweep(std::vector<double>(n, 0.0), 1.0);
        std::vector<double> dp(n - 2), dh(n - 2);
        for (std::size_t k = 1; k + 1 < n; ++k) {
            dp[k - 1] = gp[k + 1] - gp[k];
            dh[k - 1] = hom[k + 1] - hom[k];
        }
        const double c = minimax_coefficient(dp, dh);
        for (std::size_t k = 1; k < n; ++k) g[k] = gp[k] + c * hom[k];
        g[n] = g[n - 1];
    }

    SteinSolution sol;
    sol.support_max = K;
    sol.g = std::move(g);
    const IntFn gf = [&sol](std::int64_t k) { return sol.at(k); };
    const std::int64_t last_row = d == 0.0 ? K - 1 : K - 2;
    for (std::int64_t k = 0; k <= last_row; ++k) {
        if (d == 0.0 && mu[static_cast<std::size_t>(k) + 1] == 0.0) break;
        sol.residual = std::max(sol.residual, std::fabs(apply_compound(op, gf, k) - f[static_cast<std::size_t>(k)]));
    }
    const std::int64_t last_diff = d == 0.0 ? K : K - 1;
    for (std::int64_t k = 1; k < last_diff; ++k)
        sol.max_delta_g = std::max(sol.max_delta_g, std::fabs(sol.at(k + 1) - sol.at(k)));
    return sol;
}

double delta_g_bound_simple(SimpleFamily family, double size, double prob) {
    switch (family) {
        case SimpleFamily::Binomial: return 2.0 / (size * prob);
        case SimpleFamily::NegativeBinomial: return 2.0 / (size * (1.0 - prob));
        case SimpleFamily::PseudoBinomial: return 2.0 / (std::floor(size) * prob);
    }
    return 0.0;
}

PerturbationBudget budget_m1(const TargetParamsM1& prm) {
    const double p = prm.p, q = 1.0 - p;
    return {std::fabs(prm.lambda) * p / q, std::floor(static_cast<double>(prm.n) + prm.lambda / p), 2.0 / p};
}

PerturbationBudget budget_m2(const TargetParamsM2& prm) {
    return {std::fabs(prm.lambda) * prm.q_bar(), prm.r * prm.q_bar() + prm.lambda * prm.p_bar, 2.0};
}

namespace {

AssumptionCheck check_budget(const PerturbationBudget& b) {
    AssumptionCheck c;
    c.epsilon = b.epsilon;
    c.margin = b.gamma / b.omega - b.epsilon;
    c.ok = b.gamma > 0.0 && c.margin > 0.0;
    return c;
}

}  // namespace

double delta_g_bound_perturbed(const PerturbationBudget& b, Target which) {
    const auto c = check_budget(b);
    if (!c.ok)
        throw Inapplicable(std::string(which == Target::M1 ? "(H1)" : "(H2)") + " violated: epsilon=" +
                           std::to_string(b.epsilon) + " vs gamma/omega=" + std::to_string(b.gamma / b.omega));
    // 1/(gamma p - 2 eps1) for M1 (omega = 2/p), 1/(gamma - 2 eps2) for M2.
    return 1.0 / (2.0 * b.gamma / b.omega - 2.0 * b.epsilon);
}

AssumptionCheck check_assumptions(const TargetParamsM1& prm) { return check_budget(budget_m1(prm)); }
AssumptionCheck check_assumptions(const TargetParamsM2& prm) { return check_budget(budget_m2(prm)); }

namespace {

constexpr double kLambdaGate = 1e-12;

ThetaConstants finish_theta(double theta, double lam_scale, double denom_tail) {
    if (!(theta < 0.5)) throw Inapplicable("theta = " + std::to_string(theta) + " is not below 1/2");
    ThetaConstants t;
    t.theta = theta;
    t.big_theta = theta / ((1.0 - 2.0 * theta) * lam_scale * denom_tail);
    return t;
}

}  // namespace

double theta_value(const TargetParamsM1& prm) {
    const double lam = std::fabs(prm.lambda);
    if (lam < kLambdaGate) throw Inapplicable("lambda ~ 0: Theta has lambda in its denominator");
    const double gamma = std::floor(static_cast<double>(prm.n) + prm.lambda / prm.p);
    if (!(gamma > 0.0)) throw Inapplicable("floor(n + lambda/p) must be positive");
    return lam / (gamma * (1.0 - prm.p));
}

double theta_value(const TargetParamsM2& prm) {
    const double lam = std::fabs(prm.lambda), qb = prm.q_bar();
    if (lam < kLambdaGate) throw Inapplicable("lambda ~ 0: Theta has lambda in its denominator");
    const double gamma = prm.r * qb + prm.lambda * prm.p_bar;
    if (!(gamma > 0.0)) throw Inapplicable("r q_bar + lambda p_bar must be positive");
    return lam * qb / gamma;
}

ThetaConstants theta_constants(const TargetParamsM1& prm) {
    const double q = 1.0 - prm.p;
    return finish_theta(theta_value(prm), std::fabs(prm.lambda) * prm.p, 1.0 / q);
}

ThetaConstants theta_constants(const TargetParamsM2& prm) {
    return finish_theta(theta_value(prm), std::fabs(prm.lambda) * prm.q_bar(), 1.0);
}

}  // namespace cpa
