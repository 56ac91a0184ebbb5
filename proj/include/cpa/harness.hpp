#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpa/bounds.hpp"
#include "cpa/runs.hpp"

namespace cpa {

struct ExperimentConfig {
    RunsKind kind = RunsKind::OneOne;
    int k1 = 1, k2 = 1;  // k-runs use k2 = k
    double p = 0.5;
    std::vector<double> probs;  // optional per-trial pattern, cycled over the trials
    std::optional<Target> target;  // empty = auto
    BoundMode mode = BoundMode::Exact;
    std::vector<std::int64_t> sweep;
    std::uint64_t seed = 20240521;
    std::int64_t mc_samples = 1000000;
    std::int64_t exact_limit = 50000;  // trials; beyond this tv is estimated
    std::string format = "csv";
    std::string out;
};

// `key = value` lines, '#' comments.  Unknown keys raise ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
std::vector<double> load_probs(const std::string& path);
void validate(const ExperimentConfig& cfg);

RunsModel build_model(const ExperimentConfig& cfg, std::int64_t N);

struct SweepRecord {
    std::int64_t N = 0;
    int k1 = 0, k2 = 0;
    double p = 0.0;
    double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0;
    std::string target;
    double n = 0.0, p_match = 0.0, lambda = 0.0, delta = 0.0, r = 0.0, p_bar = 0.0;
    double theta = 0.0;
    double tv = 0.0;
    double bound = 0.0;
    double bound_wx = 0.0;
    double ratio = 0.0;
    bool applicable = false;
    bool tv_is_estimate = false;
    std::string note;
};

SweepRecord evaluate_point(const ExperimentConfig& cfg, std::int64_t N);
std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg, Exec exec = Exec::Parallel);

// Empirical law of W from seeded simulation (counter-based sub-seeds, so
// the result does not depend on the thread count).
LatticeMeasure monte_carlo_law(const RunsModel& model, std::int64_t samples, std::uint64_t seed);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t used = 0;
};

// Least squares of log y on log x over pairs with x, y > 0 (needs 3).
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);
// Slope of tv against N over applicable rows.
SlopeFit fit_decay_slope(const std::vector<SweepRecord>& records);

inline constexpr const char* kCsvHeader =
    "N,k1,k2,p,gamma1,gamma2,gamma3,target,n,p_match,lambda,delta,r,p_bar,theta,tv,bound,bound_wx,ratio,applicable";

std::string to_csv(const std::vector<SweepRecord>& records);
std::string to_json(const std::vector<SweepRecord>& records);
void emit(const std::vector<SweepRecord>& records, const std::string& format, const std::string& path);

}  // namespace cpa
