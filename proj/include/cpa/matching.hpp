#pragma once

#include <optional>
#include <string>

#include "cpa/lattice.hpp"
#include "cpa/stein.hpp"

namespace cpa {

CumulantTriple cumulants_from_raw_moments(double m1, double m2, double m3);

TargetParamsM1 match_m1(const CumulantTriple& gamma);
TargetParamsM2 match_m2(const CumulantTriple& gamma);

// Throws RegimeError when gamma2 == 0 (pure Poisson is left to the caller).
Target select_regime(const CumulantTriple& gamma);

struct MatchDiagnostics {
    bool h_ok = false;
    double theta = 0.0;  // NaN when theta is undefined
    int lambda_sign = 0;
    bool p_in_range = false;
};

struct MatchResult {
    Target which = Target::M1;
    std::optional<TargetParamsM1> m1_params;
    std::optional<TargetParamsM2> m2_params;
    bool is_signed = false;
    MatchDiagnostics diagnostics;

    double lambda() const;
    LatticeMeasure target_law(double tail_tol = kDefaultTailTol) const;
    CompoundOperator op() const;
};

// Regime selection, matching and diagnostics in one step.  Matching is not
// gated on (H1)/(H2); only bound evaluation is.
MatchResult match(const CumulantTriple& gamma);
MatchResult match(const CumulantTriple& gamma, Target forced);

// q_bar expressed through raw moments of W (the NB-side beta).
double beta2_from_raw_moments(double m1, double m2, double m3);

}  // namespace cpa
