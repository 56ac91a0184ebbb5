#pragma once

#include <cstdint>
#include <vector>

#include "cpa/lattice.hpp"

namespace cpa {

enum class RunsKind { OneOne, K1K2, KRuns };
const char* to_string(RunsKind k);

// Circular Bernoulli trials xi_0..xi_{L-1}; X_j = 1 when the pattern of k1
// failures followed by k2 successes ends at trial j.
struct RunsModel {
    RunsKind kind = RunsKind::OneOne;
    int k1 = 1;
    int k2 = 1;
    std::int64_t N = 0;  // trial count is L = N * m for (k1,k2)-runs, N otherwise
    std::vector<double> probs;

    std::int64_t L() const { return static_cast<std::int64_t>(probs.size()); }
    int pattern_len() const { return k1 + k2; }
    int window() const { return k1 + k2 - 1; }
    std::uint32_t pattern_code() const { return (1u << k2) - 1u; }
    bool identical() const;
    double prob(std::int64_t j) const;  // circular

    static RunsModel one_one(std::int64_t N, double p);
    static RunsModel one_one(std::vector<double> probs);
    static RunsModel k1k2(std::int64_t N, int k1, int k2, double p);
    static RunsModel k1k2(int k1, int k2, std::vector<double> probs);
    static RunsModel kruns(std::int64_t N, int k, double p);
    static RunsModel kruns(int k, std::vector<double> probs);
};

// Neighborhood radii in unit index; A_i = {j : |j - i| <= a} circularly.
struct Radii {
    int a = 1, b = 2, c = 3;
};

// Tight: multiples of the window m (the smallest radii with local dependence;
// (1,1)-runs get 1,2,3).  Wide: multiples of m+1 (2(m+1), 3(m+1) for
// (k1,k2)-runs; k, 2k, 3k for k-runs).
enum class RadiusConvention { Tight, Wide };
Radii neighborhood_radii(const RunsModel& m, RadiusConvention conv);
RadiusConvention default_bound_convention(RunsKind kind);

struct Neighborhoods {
    std::vector<std::int64_t> A, B, C;
};
Neighborhoods neighborhoods(std::int64_t i, const Radii& r, std::int64_t units);

enum class Exec { Serial, Parallel };

LatticeMeasure exact_law(const RunsModel& model);
LatticeMeasure brute_force_law(const RunsModel& model, Exec exec = Exec::Parallel);

// Counts of pattern ends at trials a .. a+len+w-1 (circular) when the w trials
// before a are fixed to `entry`, trials a .. a+len-1 are free and the w trials
// after them are fixed to `exit` (oldest trial in the most significant bit).
std::vector<double> arc_law(const RunsModel& model, std::int64_t a, std::int64_t len, std::uint32_t entry,
                            std::uint32_t exit);

CumulantTriple closed_cumulants_11(const std::vector<double>& probs);
CumulantTriple closed_cumulants_k1k2(const std::vector<double>& probs, int k1, int k2);
// Needs N >= 3k - 2 (the five case groups overlap below that).
CumulantTriple closed_cumulants_kruns(double p, int k, std::int64_t N);
// Third raw moment of identical-p k-runs from the five case-group subsums.
double kruns_m3(double p, int k, std::int64_t N);

// Units group `block` consecutive indicators (block = 1: the X_j themselves,
// block = m: the 1-dependent T_i of (k1,k2)-runs).
struct UnitView {
    const RunsModel* model = nullptr;
    int block = 1;
    Radii radii;
    std::int64_t units() const { return model->L() / block; }
};

// One value x of the unit vector over C_i, with P(X_{C_i} = x) split by the
// boundary trials (first w and last w trials of the enumerated window).
struct WindowGroup {
    std::uint64_t key = 0;
    std::vector<int> values;  // unit values for i-c .. i+c
    double weight = 0.0;
    std::vector<double> boundary;
};

struct WindowEnumeration {
    std::int64_t window_start = 0;  // first trial of the enumerated window
    int window_bits = 0;
    std::vector<WindowGroup> groups;  // sorted by key
};

inline constexpr int kMaxWindowBits = 24;

WindowEnumeration enumerate_window(const UnitView& view, std::int64_t i, Exec exec = Exec::Parallel);

// Laws of W minus the units in C_i, one per boundary configuration.
std::vector<LatticeMeasure> outside_laws(const UnitView& view, const WindowEnumeration& en);

struct ConditionalEntry {
    double weight = 0.0;
    std::vector<int> values;
    LatticeMeasure law;  // law of W given the unit values over C_i
};

struct ConditionalLawTable {
    std::vector<ConditionalEntry> entries;
};

ConditionalLawTable conditional_laws(const UnitView& view, std::int64_t i, Exec exec = Exec::Parallel);
ConditionalLawTable conditional_laws(const RunsModel& model, std::int64_t i);

// D(W | X_{C_i} = x) for every group of an enumeration, in group order.
std::vector<double> conditional_smoothness(const UnitView& view, const WindowEnumeration& en);

struct BlockModel {
    const RunsModel* model = nullptr;
    int m = 1;
    std::int64_t units = 0;
    // abar[j] = max over neighbour values of P(T_j = 0 | T_{j-1}, T_{j+1}).
    // Neighbour values that force T_j = 0 make it 1; abar_live skips them and
    // rho[j] is the probability that the neighbours leave T_j free.
    std::vector<double> abar;
    std::vector<double> abar_live;
    std::vector<double> rho;
    UnitView view() const { return {model, m, Radii{1, 2, 3}}; }
};

BlockModel block_sums(const RunsModel& model);

}  // namespace cpa
