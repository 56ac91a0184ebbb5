#pragma once

// Independent reference computations for the tests.  Nothing here calls the
// library's DP or builders; everything is direct enumeration or closed form.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "cpa/lattice.hpp"
#include "cpa/runs.hpp"

namespace oracle {

// Indicators X_0..X_{L-1} for one circular trial sequence encoded in `bits`
// (bit j = trial j).
inline std::vector<int> indicators(const cpa::RunsModel& m, std::uint64_t bits) {
    const std::int64_t L = m.L();
    std::vector<int> x(static_cast<std::size_t>(L), 0);
    auto trial = [&](std::int64_t j) { return static_cast<int>((bits >> (((j % L) + L) % L)) & 1u); };
    for (std::int64_t j = 0; j < L; ++j) {
        bool hit = true;
        for (int t = 0; t < m.k2 && hit; ++t) hit = trial(j - t) == 1;
        for (int t = 0; t < m.k1 && hit; ++t) hit = trial(j - m.k2 - t) == 0;
        x[static_cast<std::size_t>(j)] = hit ? 1 : 0;
    }
    return x;
}

inline double weight(const cpa::RunsModel& m, std::uint64_t bits) {
    double w = 1.0;
    for (std::int64_t j = 0; j < m.L(); ++j) w *= (bits >> j) & 1u ? m.probs[static_cast<std::size_t>(j)] : 1.0 - m.probs[static_cast<std::size_t>(j)];
    return w;
}

inline std::vector<double> law(const cpa::RunsModel& m) {
    std::vector<double> out(static_cast<std::size_t>(m.L()) + 1, 0.0);
    for (std::uint64_t b = 0; b < (std::uint64_t{1} << m.L()); ++b) {
        int s = 0;
        for (int v : indicators(m, b)) s += v;
        out[static_cast<std::size_t>(s)] += weight(m, b);
    }
    return out;
}

// Factorial moments E W, E W(W-1), E W(W-1)(W-2) then Gamma via the
// cumulant relations written in factorial form.
inline cpa::CumulantTriple factorial_cumulants(const std::vector<double>& pmf, std::int64_t offset = 0) {
    double f1 = 0, f2 = 0, f3 = 0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        const double k = static_cast<double>(static_cast<std::int64_t>(i) + offset);
        f1 += pmf[i] * k;
        f2 += pmf[i] * k * (k - 1);
        f3 += pmf[i] * k * (k - 1) * (k - 2);
    }
    return {f1, f2 - f1 * f1, (f3 - 3 * f1 * f2 + 2 * f1 * f1 * f1) / 2.0};
}

inline double binom_pmf(int n, double p, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) * std::pow(p, k) *
           std::pow(1 - p, n - k);
}

inline double poisson_pmf(double lam, int k) { return std::exp(-lam + k * std::log(lam) - std::lgamma(k + 1.0)); }

// sum_k |a_{k+2} - 2 a_{k+1} + a_k| on a plain vector
inline double second_difference(const std::vector<double>& a) {
    std::vector<double> x(a.size() + 4, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) x[i + 2] = a[i];
    double s = 0;
    for (std::size_t i = 0; i + 2 < x.size(); ++i) s += std::fabs(x[i + 2] - 2 * x[i + 1] + x[i]);
    return s;
}

}  // namespace oracle
