#pragma once

#include <cstdint>
#include <vector>

namespace cpa {

inline constexpr double kDefaultTailTol = 1e-12;

// Finitely supported, possibly signed measure on the integers.
struct LatticeMeasure {
    std::int64_t offset = 0;
    std::vector<double> weights;
    bool is_probability = true;

    std::int64_t lo() const { return offset; }
    std::int64_t hi() const { return offset + static_cast<std::int64_t>(weights.size()) - 1; }
    bool empty() const { return weights.empty(); }
    double at(std::int64_t k) const;
    double mass() const;
    double abs_mass() const;

    static LatticeMeasure point(std::int64_t k);
    // Build from raw weights; sets is_probability and clamps tiny negatives.
    static LatticeMeasure from_weights(std::int64_t offset, std::vector<double> w);
};

// Drop leading/trailing entries with |w| <= floor.
void trim(LatticeMeasure& m, double floor = 0.0);
LatticeMeasure shifted(const LatticeMeasure& m, std::int64_t by);

struct TargetParamsM1 {
    std::int64_t n = 0;
    double p = 0.5;
    double lambda = 0.0;
    double delta = 0.0;
    double n_tilde = 0.0;
};

struct TargetParamsM2 {
    double r = 1.0;
    double p_bar = 0.5;
    double lambda = 0.0;
    double q_bar() const { return 1.0 - p_bar; }
    bool is_signed() const { return lambda < 0.0; }
};

LatticeMeasure make_binomial(std::int64_t n, double p);
LatticeMeasure make_negative_binomial(double r, double p_bar, double tail_tol = kDefaultTailTol);
LatticeMeasure make_pseudo_binomial(double N, double p);
LatticeMeasure make_poisson(double lambda, double tail_tol = kDefaultTailTol);
LatticeMeasure make_compound_m1(const TargetParamsM1& params, double tail_tol = kDefaultTailTol);
LatticeMeasure make_compound_m2(const TargetParamsM2& params, double tail_tol = kDefaultTailTol);

LatticeMeasure convolve(const LatticeMeasure& a, const LatticeMeasure& b);
// Mixture sum_i w_i * laws_i (weights need not be normalized).
LatticeMeasure mixture(const std::vector<double>& w, const std::vector<const LatticeMeasure*>& laws);

double tv_distance(const LatticeMeasure& a, const LatticeMeasure& b);
double linf_distance(const LatticeMeasure& a, const LatticeMeasure& b);
double smoothness_D(const LatticeMeasure& a);
double smoothness_D1(const LatticeMeasure& a);

struct CumulantTriple {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
};

struct CumulantReport {
    CumulantTriple gamma;
    double m1 = 0.0, m2 = 0.0, m3 = 0.0;  // raw moments
};

CumulantReport factorial_cumulants(const LatticeMeasure& a);

}  // namespace cpa
