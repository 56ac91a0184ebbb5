#include "cpa/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpa/detail/sum.hpp"
#include "cpa/errors.hpp"

namespace cpa {

using detail::Accumulator;

namespace {

constexpr double kNegClamp = 1e-15;
constexpr std::size_t kMaxSupport = 50'000'000;

void check_unit_interval(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0))
        throw DomainError(std::string(what) + " must lie in (0,1), got " + std::to_string(p));
}

void normalize(LatticeMeasure& m) {
    const double s = m.mass();
    if (!(s > 0.0) || !std::isfinite(s)) throw NumericalInstability("cannot normalize measure with mass " + std::to_string(s));
    for (double& w : m.weights) w /= s;
}

}  // namespace

double LatticeMeasure::at(std::int64_t k) const {
    if (k < lo() || k > hi()) return 0.0;
    return weights[static_cast<std::size_t>(k - offset)];
}

double LatticeMeasure::mass() const {
    Accumulator acc;
    for (double w : weights) acc += w;
    return acc.value();
}

double LatticeMeasure::abs_mass() const {
    Accumulator acc;
    for (double w : weights) acc += std::fabs(w);
    return acc.value();
}

LatticeMeasure LatticeMeasure::point(std::int64_t k) {
    LatticeMeasure m;
    m.offset = k;
    m.weights = {1.0};
    return m;
}

LatticeMeasure LatticeMeasure::from_weights(std::int64_t offset, std::vector<double> w) {
    LatticeMeasure m;
    m.offset = offset;
    m.weights = std::move(w);
    const double mn = m.weights.empty() ? 0.0 : *std::min_element(m.weights.begin(), m.weights.end());
    m.is_probability = mn >= -kNegClamp;
    if (m.is_probability)
        for (double& x : m.weights) x = std::max(x, 0.0);
    return m;
}

void trim(LatticeMeasure& m, double floor) {
    auto& w = m.weights;
    std::size_t b = 0, e = w.size();
    while (b < e && std::fabs(w[b]) <= floor) ++b;
    while (e > b && std::fabs(w[e - 1]) <= floor) --e;
    if (b == e) {
        w.clear();
        return;
    }
    m.offset += static_cast<std::int64_t>(b);
    w = std::vector<double>(w.begin() + static_cast<std::ptrdiff_t>(b), w.begin() + static_cast<std::ptrdiff_t>(e));
}

LatticeMeasure shifted(const LatticeMeasure& m, std::int64_t by) {
    LatticeMeasure r = m;
    r.offset += by;
    return r;
}

LatticeMeasure make_binomial(std::int64_t n, double p) {
    check_unit_interval(p, "p");
    if (n < 0) throw DomainError("binomial n must be >= 0");
    const double lp = std::log(p), lq = std::log1p(-p);
    const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
    std::vector<double> w(static_cast<std::size_t>(n) + 1);
    for (std::int64_t k = 0; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        w[static_cast<std::size_t>(k)] =
            std::exp(lgn - std::lgamma(kk + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0) + kk * lp +
                     static_cast<double>(n - k) * lq);
    }
    auto m = LatticeMeasure::from_weights(0, std::move(w));
    normalize(m);
    return m;
}

LatticeMeasure make_negative_binomial(double r, double p_bar, double tail_tol) {
    if (!(r > 0.0)) throw DomainError("negative binomial r must be > 0");
    check_unit_interval(p_bar, "p_bar");
    if (!(tail_tol > 0.0 && tail_tol <= 1e-6)) throw DomainError("tail_tol must lie in (0, 1e-6]");
    const double q_bar = 1.0 - p_bar;
    std::vector<double> w;
    double cur = std::exp(r * std::log(p_bar));
    Accumulator cum;
    const double mean = r * q_bar / p_bar;
    for (std::int64_t k = 0;; ++k) {
        w.push_back(cur);
        cum += cur;
        if (static_cast<double>(k) > mean && (1.0 - cum.value() < tail_tol || cur < tail_tol * 1e-6)) break;
        if (w.size() > kMaxSupport) throw NumericalInstability("negative binomial support exceeds limit");
        cur *= q_bar * (r + static_cast<double>(k)) / static_cast<double>(k + 1);
    }
    auto m = LatticeMeasure::from_weights(0, std::move(w));
    trim(m);
    normalize(m);
    return m;
}

LatticeMeasure make_pseudo_binomial(double N, double p) {
    if (!(N > 1.0)) throw DomainError("pseudo-binomial N must be > 1");
    check_unit_interval(p, "p");
    const auto top = static_cast<std::int64_t>(std::floor(N));
    const double ratio = p / (1.0 - p);
    // Unnormalized C(N,k) (p/q)^k; the common factor q^N cancels.
    std::vector<double> w(static_cast<std::size_t>(top) + 1);
    double c = 1.0;
    for (std::int64_t k = 0; k <= top; ++k) {
        w[static_cast<std::size_t>(k)] = c;
        c *= (N - static_cast<double>(k)) / static_cast<double>(k + 1) * ratio;
    }
    auto m = LatticeMeasure::from_weights(0, std::move(w));
    normalize(m);
    return m;
}

LatticeMeasure make_poisson(double lambda, double tail_tol) {
    if (!(lambda > 0.0)) throw DomainError("Poisson lambda must be > 0; use the compound builders for signed cases");
    const double ll = std::log(lambda);
    std::vector<double> w;
    Accumulator cum;
    for (std::int64_t k = 0;; ++k) {
        const double kk = static_cast<double>(k);
        const double v = std::exp(-lambda + kk * ll - std::lgamma(kk + 1.0));
        w.push_back(v);
        cum += v;
        // the second test stops rounding in lgamma from stalling the mass test
        if (kk > lambda && (1.0 - cum.value() < tail_tol || v < tail_tol * 1e-6)) break;
        if (w.size() > kMaxSupport) throw NumericalInstability("Poisson support exceeds limit");
    }
    auto m = LatticeMeasure::from_weights(0, std::move(w));
    trim(m);
    normalize(m);
    return m;
}

namespace {

// Coefficients of exp(lam (z - 1)) for either sign of lam, carried `extra`
// terms past the point where they drop below the floor.
std::vector<double> poisson_factor(double lam, double floor, std::int64_t extra) {
    const double la = std::log(std::fabs(lam));
    std::vector<double> w;
    std::int64_t stop = -1;
    for (std::int64_t j = 0; stop < 0 || j <= stop; ++j) {
        const double jj = static_cast<double>(j);
        const double v = std::exp(-lam + jj * la - std::lgamma(jj + 1.0));
        w.push_back(lam < 0.0 && j % 2 == 1 ? -v : v);
        if (stop < 0 && jj > std::fabs(lam) && v < floor) stop = j + extra;
        if (w.size() > kMaxSupport) throw NumericalInstability("Poisson factor support exceeds limit");
    }
    return w;
}

// Shared driver for the two three-term compound recursions.
template <class Step>
LatticeMeasure run_compound(double mu0, double mean, bool renormalize, double tail_tol, Step step) {
    if (!(mu0 > 0.0) || !std::isfinite(mu0))
        throw NumericalInstability("compound recursion start value underflows: " + std::to_string(mu0));
    std::vector<double> w{mu0};
    Accumulator cum;
    cum += mu0;
    double prev = 0.0, cur = mu0;
    for (std::int64_t k = 0;; ++k) {
        const double next = step(k, cur, prev);
        if (!std::isfinite(next) || std::fabs(next) > 1e6)
            throw NumericalInstability("compound recursion diverged at k=" + std::to_string(k + 1));
        w.push_back(next);
        cum += next;
        prev = cur;
        cur = next;
        if (static_cast<double>(k + 1) > mean && std::fabs(next) < tail_tol &&
            (std::fabs(1.0 - cum.value()) < tail_tol || std::fabs(next) < tail_tol * 1e-6))
            break;
        if (w.size() > kMaxSupport) throw NumericalInstability("compound recursion did not reach the mass tolerance");
    }
    auto m = LatticeMeasure::from_weights(0, std::move(w));
    trim(m);
    if (renormalize) {
        normalize(m);
    } else if (std::fabs(m.mass() - 1.0) > 1e-9) {
        throw NumericalInstability("signed compound measure has mass " + std::to_string(m.mass()));
    }
    return m;
}

}  // namespace

LatticeMeasure make_compound_m1(const TargetParamsM1& prm, double tail_tol) {
    check_unit_interval(prm.p, "p");
    if (prm.n < 0) throw DomainError("M1 n must be >= 0");
    const double p = prm.p, q = 1.0 - p, lam = prm.lambda;
    if (p > q && lam != 0.0) {
        // Past k = n the recursion's second solution grows like (p/q)^k while
        // the pmf decays, so forward rounding error swamps the tail.
        // The factor runs n terms long so every kept weight is an exact
        // convolution; the Stein solvers rely on the recursion holding in the tail.
        const double floor = tail_tol * 1e-6;
        const auto pf = poisson_factor(lam, floor, prm.n);
        auto c = convolve(make_binomial(prm.n, p), LatticeMeasure::from_weights(0, pf)).weights;
        c.resize(pf.size());
        while (c.size() > 1 && std::fabs(c.back()) < floor) c.pop_back();
        auto m = LatticeMeasure::from_weights(0, std::move(c));
        if (lam > 0.0) normalize(m);
        else if (std::fabs(m.mass() - 1.0) > 1e-9)
            throw NumericalInstability("signed compound measure has mass " + std::to_string(m.mass()));
        return m;
    }
    const double np = static_cast<double>(prm.n) * p;
    const double mu0 = std::exp(static_cast<double>(prm.n) * std::log(q) - lam);
    return run_compound(mu0, np + std::fabs(lam), lam >= 0.0, tail_tol, [&](std::int64_t k, double cur, double prev) {
        const double kk = static_cast<double>(k);
        return ((np + lam * q - p * kk) * cur + lam * p * prev) / ((kk + 1.0) * q);
    });
}

LatticeMeasure make_compound_m2(const TargetParamsM2& prm, double tail_tol) {
    if (!(prm.r > 0.0)) throw DomainError("M2 r must be > 0");
    check_unit_interval(prm.p_bar, "p_bar");
    const double qb = prm.q_bar(), lam = prm.lambda;
    const double mu0 = std::exp(prm.r * std::log(prm.p_bar) - lam);
    const double mean = prm.r * qb / prm.p_bar + std::fabs(lam);
    return run_compound(mu0, mean, lam >= 0.0, tail_tol, [&](std::int64_t k, double cur, double prev) {
        const double kk = static_cast<double>(k);
        return (qb * (prm.r + kk) * cur + lam * cur - lam * qb * prev) / (kk + 1.0);
    });
}

LatticeMeasure convolve(const LatticeMeasure& a, const LatticeMeasure& b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> w(a.weights.size() + b.weights.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        const double ai = a.weights[i];
        if (ai == 0.0) continue;
        for (std::size_t j = 0; j < b.weights.size(); ++j) w[i + j] += ai * b.weights[j];
    }
    LatticeMeasure m;
    m.offset = a.offset + b.offset;
    m.weights = std::move(w);
    m.is_probability = a.is_probability && b.is_probability;
    return m;
}

LatticeMeasure mixture(const std::vector<double>& w, const std::vector<const LatticeMeasure*>& laws) {
    std::int64_t lo = 0, hi = -1;
    bool first = true;
    for (const auto* l : laws) {
        if (l->empty()) continue;
        lo = first ? l->lo() : std::min(lo, l->lo());
        hi = first ? l->hi() : std::max(hi, l->hi());
        first = false;
    }
    LatticeMeasure m;
    if (first) return m;
    m.offset = lo;
    m.weights.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
    bool prob = true;
    for (std::size_t i = 0; i < laws.size(); ++i) {
        const auto& l = *laws[i];
        prob = prob && l.is_probability && w[i] >= 0.0;
        for (std::size_t j = 0; j < l.weights.size(); ++j)
            m.weights[static_cast<std::size_t>(l.offset - lo) + j] += w[i] * l.weights[j];
    }
    m.is_probability = prob;
    return m;
}

double tv_distance(const LatticeMeasure& a, const LatticeMeasure& b) {
    const double ma = a.mass(), mb = b.mass();
    if (std::fabs(ma - mb) > 1e-6)
        throw ContractViolation("tv_distance needs equal masses, got " + std::to_string(ma) + " and " + std::to_string(mb));
    if (a.empty() && b.empty()) return 0.0;
    const std::int64_t lo = a.empty() ? b.lo() : b.empty() ? a.lo() : std::min(a.lo(), b.lo());
    const std::int64_t hi = a.empty() ? b.hi() : b.empty() ? a.hi() : std::max(a.hi(), b.hi());
    Accumulator acc;
    for (std::int64_t k = lo; k <= hi; ++k) acc += std::fabs(a.at(k) - b.at(k));
    return 0.5 * acc.value();
}

double linf_distance(const LatticeMeasure& a, const LatticeMeasure& b) {
    if (a.empty() && b.empty()) return 0.0;
    const std::int64_t lo = a.empty() ? b.lo() : b.empty() ? a.lo() : std::min(a.lo(), b.lo());
    const std::int64_t hi = a.empty() ? b.hi() : b.empty() ? a.hi() : std::max(a.hi(), b.hi());
    double r = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) r = std::max(r, std::fabs(a.at(k) - b.at(k)));
    return r;
}

double smoothness_D(const LatticeMeasure& a) {
    if (a.empty()) return 0.0;
    Accumulator acc;
    for (std::int64_t m = a.lo(); m <= a.hi() + 2; ++m) acc += std::fabs(a.at(m - 2) - 2.0 * a.at(m - 1) + a.at(m));
    return acc.value();
}

double smoothness_D1(const LatticeMeasure& a) {
    if (a.empty()) return 0.0;
    Accumulator acc;
    for (std::int64_t k = a.lo(); k <= a.hi() + 1; ++k) acc += std::fabs(a.at(k) - a.at(k - 1));
    return acc.value();
}

CumulantReport factorial_cumulants(const LatticeMeasure& a) {
    CumulantReport rep;
    if (a.empty()) return rep;
    const double mass = a.mass();
    Accumulator s1;
    for (std::size_t i = 0; i < a.weights.size(); ++i) s1 += static_cast<double>(a.offset + static_cast<std::int64_t>(i)) * a.weights[i];
    const double mean = s1.value() / mass;
    // Central moments first: the factorial cumulants follow without the
    // cancellation that raw third moments suffer at large means.
    Accumulator c2, c3;
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        const double d = static_cast<double>(a.offset + static_cast<std::int64_t>(i)) - mean;
        c2 += d * d * a.weights[i];
        c3 += d * d * d * a.weights[i];
    }
    const double var = c2.value() / mass, mu3 = c3.value() / mass;
    rep.gamma.gamma1 = mean;
    rep.gamma.gamma2 = var - mean;
    rep.gamma.gamma3 = 0.5 * (mu3 - 3.0 * var + 2.0 * mean);
    rep.m1 = mean;
    rep.m2 = var + mean * mean;
    rep.m3 = mu3 + 3.0 * mean * var + mean * mean * mean;
    return rep;
}

}  // namespace cpa
