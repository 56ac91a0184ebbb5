#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cpa/lattice.hpp"

namespace cpa {

using IntFn = std::function<double(std::int64_t)>;

// A g(k) = (alpha + beta k) g(k+1) - k g(k)
struct UnifiedOperator {
    double alpha = 0.0;
    double beta = 0.0;
};

// A g(k) = (a + beta k) g(k+1) - k g(k) - lambda beta (g(k+2) - g(k+1))
struct CompoundOperator {
    double a = 0.0;
    double beta = 0.0;
    double lambda = 0.0;
};

enum class Target { M1, M2 };
const char* to_string(Target t);

UnifiedOperator binomial_operator(double n, double p);
UnifiedOperator negative_binomial_operator(double r, double p_bar);
UnifiedOperator pseudo_binomial_operator(double N, double p);

CompoundOperator compound_from_unified(const UnifiedOperator& u, double lambda);
CompoundOperator m1_operator(const TargetParamsM1& prm);
CompoundOperator m2_operator(const TargetParamsM2& prm);
// Unperturbed parts: PB(n + lambda/p, p) for M1 and NB(r + lambda p_bar/q_bar, p_bar) for M2.
UnifiedOperator m1_base_operator(const TargetParamsM1& prm);
UnifiedOperator m2_base_operator(const TargetParamsM2& prm);

double apply_unified(const UnifiedOperator& op, const IntFn& g, std::int64_t k);
double apply_compound(const CompoundOperator& op, const IntFn& g, std::int64_t k);

// |sum_k target_k * A g(k)|
double stein_identity_residual(const LatticeMeasure& target, const CompoundOperator& op, const IntFn& g);

struct SteinSolution {
    std::int64_t support_max = 0;
    std::vector<double> g;  // g(0..support_max+1); flat beyond
    double residual = 0.0;   // max |A g(k) - (h(k) - E h)| over rows used
    double max_delta_g = 0.0;
    double at(std::int64_t k) const;
};

// Solves A g = h - E h(target) on {0..support_max}.  The compound equation is
// second order, so solutions form a one-parameter family (plus the inert g(0));
// the member returned minimizes max_k |Delta g(k)|.
SteinSolution solve_stein_equation(const CompoundOperator& op, const LatticeMeasure& target, const IntFn& h,
                                   std::int64_t support_max);
SteinSolution solve_stein_equation(const CompoundOperator& op, const LatticeMeasure& target, const IntFn& h);

enum class SimpleFamily { Binomial, NegativeBinomial, PseudoBinomial };
// ||f|| = 1.  size is n, r or N; prob is p, p_bar or p.
double delta_g_bound_simple(SimpleFamily family, double size, double prob);

struct PerturbationBudget {
    double epsilon = 0.0;
    double gamma = 0.0;
    double omega = 0.0;
};

PerturbationBudget budget_m1(const TargetParamsM1& prm);
PerturbationBudget budget_m2(const TargetParamsM2& prm);

double delta_g_bound_perturbed(const PerturbationBudget& b, Target which);

struct AssumptionCheck {
    bool ok = false;
    double epsilon = 0.0;
    double margin = 0.0;  // gamma/omega - epsilon; positive iff (H1)/(H2) holds
};

AssumptionCheck check_assumptions(const TargetParamsM1& prm);
AssumptionCheck check_assumptions(const TargetParamsM2& prm);

struct ThetaConstants {
    double theta = 0.0;
    double big_theta = 0.0;
};

// theta alone, reported even when it is not below 1/2
double theta_value(const TargetParamsM1& prm);
double theta_value(const TargetParamsM2& prm);

ThetaConstants theta_constants(const TargetParamsM1& prm);
ThetaConstants theta_constants(const TargetParamsM2& prm);

}  // namespace cpa
