#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpa/matching.hpp"
#include "cpa/runs.hpp"

namespace cpa {

enum class BoundMode { Exact, Prime };
const char* to_string(BoundMode m);

// beta_1 = -p/q for M1, beta_2 = q_bar for M2
double target_beta(const MatchResult& match);

// Xi_{i,j} for one unit i.  xi weights every expectation by the exact
// D(W | X_{C_i}); xi_prime uses 1 instead.
struct XiTerms {
    std::optional<double> xi;
    double xi_prime = 0.0;
    double max_D = 0.0;  // largest conditional D seen (exact mode)
};

XiTerms xi_terms(const UnitView& view, std::int64_t i, double beta, BoundMode mode, Exec exec = Exec::Parallel);

struct XiLedger {
    double sum_xi = 0.0;  // NaN unless exact
    double sum_xi_prime = 0.0;
    double max_xi_prime = 0.0;
    double max_D = 0.0;
    bool exact = false;
};

// Sum over all units.  Throws StateSpaceError when the window is too wide to
// enumerate; prime mode needs the same enumeration.
XiLedger xi_ledger(const UnitView& view, double beta, BoundMode mode);

// Units X_j with the radii each model's bounds are stated with.
UnitView bound_view(const RunsModel& model);

struct BoundReport {
    double bound_value = 0.0;  // meaningful only when applicable
    bool applicable = false;
    std::vector<std::string> reasons;
    std::map<std::string, double> components;
};

// General theorem: Theta * (sum Xi [+ delta p^2/q]) with exact D factors, or
// the K-variant with sum Xi' in prime mode.  Without K, prime mode uses the
// model's own smoothness lemma (4 when there is none).
BoundReport bound_theorem_main(const RunsModel& model, const MatchResult& match, BoundMode mode,
                               std::optional<double> K = std::nullopt);

// N(i, Z): number of surviving indices after thinning (0.5N - 3 odd, 0.5N - 2 even).
double surviving_count(std::int64_t N);

// Upper bound on D(W | X_{C_i}) for (1,1)-runs; capped at 4 (D never exceeds it).
double smoothness_K_11runs(std::int64_t N, const std::vector<double>& probs);

BoundReport bound_11runs(const RunsModel& model, const MatchResult& match);

double k1k2_threshold(int m);                 // c_m
double k1k2_theta_limit(int m, double b);     // limit of theta_1 as N grows
BoundReport bound_k1k2(const RunsModel& model, const MatchResult& match);

BoundReport bound_kruns_T5(std::int64_t N, int k, double p);
double bound_wang_xia(std::int64_t N, int k, double p);
// 1 ^ 10.58 / ((N - 10k + 8) p^k (1-p)^3)
double kruns_smoothness_cap(std::int64_t N, int k, double p);

// Linear k-runs, C_i centred on a gap of k-1 indicators that separates
// W_1 = X_1..X_{N1} from W_2.  Given the window trials, W is the convolution
// of the two halves, so D(W) <= D1(W_1) D1(W_2) must hold for every window.
struct ProductChainCheck {
    double max_D = 0.0;        // max over windows of D(W | window)
    double max_product = 0.0;  // max over windows of D1(W_1 | .) D1(W_2 | .)
    double max_excess = 0.0;   // max of D - D1 D1 (<= 0 when the chain holds)
    std::int64_t windows = 0;
    bool holds = false;
};

ProductChainCheck product_chain_check(std::int64_t N, int k, double p);

}  // namespace cpa
