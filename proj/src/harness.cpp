#include "cpa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cpa/errors.hpp"

namespace cpa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim_ws(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_num(const std::string& key, const std::string& v) {
    std::istringstream is(v);
    T out{};
    if (!(is >> out) || !(is >> std::ws).eof()) throw ConfigError("bad value for '" + key + "': " + v);
    return out;
}

RunsKind parse_kind(const std::string& v) {
    if (v == "one_one" || v == "11") return RunsKind::OneOne;
    if (v == "k1k2") return RunsKind::K1K2;
    if (v == "kruns") return RunsKind::KRuns;
    throw ConfigError("unknown kind '" + v + "' (one_one, k1k2, kruns)");
}

}  // namespace

std::vector<double> load_probs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open probabilities file " + path);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') {
            std::getline(in, tok);
            continue;
        }
        out.push_back(parse_num<double>(path, tok));
    }
    if (out.empty()) throw ConfigError("no probabilities in " + path);
    return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::optional<int> k;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim_ws(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim_ws(line.substr(0, eq)), val = trim_ws(line.substr(eq + 1));
        if (key == "kind") cfg.kind = parse_kind(val);
        else if (key == "k") k = parse_num<int>(key, val);
        else if (key == "k1") cfg.k1 = parse_num<int>(key, val);
        else if (key == "k2") cfg.k2 = parse_num<int>(key, val);
        else if (key == "p") cfg.p = parse_num<double>(key, val);
        else if (key == "probs_file") {
            const std::filesystem::path pth(val);
            cfg.probs = load_probs(pth.is_absolute() ? val : (std::filesystem::path(base_dir) / pth).string());
        } else if (key == "target") {
            if (val == "auto") cfg.target.reset();
            else if (val == "M1") cfg.target = Target::M1;
            else if (val == "M2") cfg.target = Target::M2;
            else throw ConfigError("target must be auto, M1 or M2");
        } else if (key == "mode") {
            if (val == "exact") cfg.mode = BoundMode::Exact;
            else if (val == "prime") cfg.mode = BoundMode::Prime;
            else throw ConfigError("mode must be exact or prime");
        } else if (key == "sweep" || key == "N") {
            cfg.sweep.clear();
            std::istringstream vs(val);
            std::string item;
            while (std::getline(vs, item, ',')) cfg.sweep.push_back(parse_num<std::int64_t>(key, trim_ws(item)));
        } else if (key == "seed") cfg.seed = parse_num<std::uint64_t>(key, val);
        else if (key == "mc_samples") cfg.mc_samples = parse_num<std::int64_t>(key, val);
        else if (key == "exact_limit") cfg.exact_limit = parse_num<std::int64_t>(key, val);
        else if (key == "format") cfg.format = val;
        else if (key == "out") cfg.out = val;
        else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (cfg.kind == RunsKind::KRuns) {
        cfg.k1 = 0;
        if (k) cfg.k2 = *k;
    } else if (cfg.kind == RunsKind::OneOne) {
        cfg.k1 = cfg.k2 = 1;
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::path(path).parent_path().string().empty()
                                      ? "."
                                      : std::filesystem::path(path).parent_path().string());
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.sweep.empty()) throw ConfigError("sweep is empty");
    if (cfg.format != "csv" && cfg.format != "json") throw ConfigError("format must be csv or json");
    if (cfg.k2 < 1 || cfg.k1 < 0) throw ConfigError("run lengths must be positive");
    if (cfg.kind == RunsKind::K1K2 && cfg.k1 < 1) throw ConfigError("(k1,k2)-runs need k1 >= 1");
    if (cfg.probs.empty() && !(cfg.p > 0.0 && cfg.p < 1.0)) throw ConfigError("p must lie in (0,1)");
    for (double q : cfg.probs)
        if (!(q > 0.0 && q < 1.0)) throw ConfigError("probabilities must lie in (0,1)");
    if (cfg.mc_samples < 1) throw ConfigError("mc_samples must be positive");
    for (auto N : cfg.sweep)
        if (N < 2) throw ConfigError("sweep values must be at least 2");
}

RunsModel build_model(const ExperimentConfig& cfg, std::int64_t N) {
    const std::int64_t m = cfg.kind == RunsKind::K1K2 ? cfg.k1 + cfg.k2 - 1 : 1;
    std::vector<double> probs(static_cast<std::size_t>(N * m), cfg.p);
    if (!cfg.probs.empty())
        for (std::size_t j = 0; j < probs.size(); ++j) probs[j] = cfg.probs[j % cfg.probs.size()];
    switch (cfg.kind) {
        case RunsKind::OneOne: return RunsModel::one_one(std::move(probs));
        case RunsKind::K1K2: return RunsModel::k1k2(cfg.k1, cfg.k2, std::move(probs));
        case RunsKind::KRuns: return RunsModel::kruns(cfg.k2, std::move(probs));
    }
    throw ConfigError("unknown model kind");
}

LatticeMeasure monte_carlo_law(const RunsModel& model, std::int64_t samples, std::uint64_t seed) {
    constexpr std::int64_t kChunk = 4096;
    const std::int64_t L = model.L();
    const int w = model.window();
    const std::uint32_t mask_f = (1u << (w + 1)) - 1u, code = model.pattern_code();
    const std::int64_t chunks = (samples + kChunk - 1) / kChunk;
    std::vector<std::vector<std::int64_t>> hist(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < chunks; ++c) {
        std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
        std::mt19937_64 rng(ss);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        auto& h = hist[static_cast<std::size_t>(c)];
        h.assign(static_cast<std::size_t>(L) + 1, 0);
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(L));
        const std::int64_t n = std::min(kChunk, samples - c * kChunk);
        for (std::int64_t s = 0; s < n; ++s) {
            for (std::int64_t j = 0; j < L; ++j) bits[static_cast<std::size_t>(j)] = U(rng) < model.probs[static_cast<std::size_t>(j)];
            std::uint32_t state = 0;
            for (std::int64_t j = L - w; j < L; ++j) state = (state << 1) | bits[static_cast<std::size_t>(j)];
            std::int64_t cnt = 0;
            for (std::int64_t j = 0; j < L; ++j) {
                state = ((state << 1) | bits[static_cast<std::size_t>(j)]) & mask_f;
                cnt += state == code;
            }
            ++h[static_cast<std::size_t>(cnt)];
        }
    }
    std::vector<std::int64_t> tot(static_cast<std::size_t>(L) + 1, 0);
    for (const auto& h : hist)
        for (std::size_t i = 0; i < h.size(); ++i) tot[i] += h[i];
    std::vector<double> w8(tot.size());
    for (std::size_t i = 0; i < tot.size(); ++i) w8[i] = static_cast<double>(tot[i]) / static_cast<double>(samples);
    auto m = LatticeMeasure::from_weights(0, std::move(w8));
    trim(m);
    return m;
}

namespace {

CumulantTriple closed_cumulants(const RunsModel& model) {
    if (model.kind == RunsKind::KRuns) {
        if (!model.identical()) throw DomainError("closed k-runs cumulants need identical p");
        return closed_cumulants_kruns(model.probs[0], model.k2, model.N);
    }
    return closed_cumulants_k1k2(model.probs, model.k1, model.k2);
}

}  // namespace

SweepRecord evaluate_point(const ExperimentConfig& cfg, std::int64_t N) {
    SweepRecord rec;
    rec.N = N;
    rec.k1 = cfg.kind == RunsKind::KRuns ? 0 : cfg.k1;
    rec.k2 = cfg.k2;
    rec.n = rec.p_match = rec.lambda = rec.delta = rec.r = rec.p_bar = rec.theta = kNaN;
    rec.tv = rec.bound = rec.bound_wx = rec.ratio = kNaN;
    try {
        const auto model = build_model(cfg, N);
        double ps = 0.0;
        for (double q : model.probs) ps += q;
        rec.p = model.identical() ? model.probs[0] : ps / static_cast<double>(model.L());
        if (model.kind == RunsKind::KRuns && model.identical()) rec.bound_wx = bound_wang_xia(N, model.k2, model.probs[0]);

        LatticeMeasure law;
        CumulantTriple g;
        if (model.L() <= cfg.exact_limit) {
            law = exact_law(model);
            g = factorial_cumulants(law).gamma;
        } else {
            law = monte_carlo_law(model, cfg.mc_samples, cfg.seed);
            g = closed_cumulants(model);
            rec.tv_is_estimate = true;
        }
        rec.gamma1 = g.gamma1;
        rec.gamma2 = g.gamma2;
        rec.gamma3 = g.gamma3;

        const auto mr = cfg.target ? match(g, *cfg.target) : match(g);
        rec.target = to_string(mr.which);
        rec.theta = mr.diagnostics.theta;
        if (mr.m1_params) {
            rec.n = static_cast<double>(mr.m1_params->n);
            rec.p_match = mr.m1_params->p;
            rec.lambda = mr.m1_params->lambda;
            rec.delta = mr.m1_params->delta;
        } else {
            rec.r = mr.m2_params->r;
            rec.p_bar = mr.m2_params->p_bar;
            rec.lambda = mr.m2_params->lambda;
        }
        rec.tv = tv_distance(law, mr.target_law());

        BoundReport rep;
        if (cfg.mode == BoundMode::Exact) rep = bound_theorem_main(model, mr, BoundMode::Exact);
        else if (model.kind == RunsKind::OneOne) rep = bound_11runs(model, mr);
        else if (model.kind == RunsKind::K1K2) rep = bound_k1k2(model, mr);
        else if (model.identical()) rep = bound_kruns_T5(N, model.k2, model.probs[0]);
        else rep = bound_theorem_main(model, mr, BoundMode::Prime);
        rec.applicable = rep.applicable;
        if (rep.applicable) {
            rec.bound = rep.bound_value;
            rec.ratio = rec.tv / rec.bound;
        } else {
            for (const auto& s : rep.reasons) rec.note += (rec.note.empty() ? "" : "; ") + s;
        }
    } catch (const Error& e) {
        rec.applicable = false;
        rec.note = e.what();
    }
    return rec;
}

std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg, Exec exec) {
    validate(cfg);
    auto Ns = cfg.sweep;
    std::sort(Ns.begin(), Ns.end());
    std::vector<SweepRecord> out(Ns.size());
    if (exec == Exec::Serial) {
        for (std::size_t i = 0; i < Ns.size(); ++i) out[i] = evaluate_point(cfg, Ns[i]);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ns.size()); ++i)
            out[static_cast<std::size_t>(i)] = evaluate_point(cfg, Ns[static_cast<std::size_t>(i)]);
    }
    return out;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    if (lx.size() < 3) throw DomainError("slope fit needs at least 3 positive points");
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    f.used = lx.size();
    return f;
}

SlopeFit fit_decay_slope(const std::vector<SweepRecord>& records) {
    std::vector<double> x, y;
    for (const auto& r : records)
        if (r.applicable) {
            x.push_back(static_cast<double>(r.N));
            y.push_back(r.tv);
        }
    return fit_loglog(x, y);
}

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string to_csv(const std::vector<SweepRecord>& records) {
    std::string s = std::string(kCsvHeader) + "\n";
    for (const auto& r : records) {
        s += std::to_string(r.N) + "," + std::to_string(r.k1) + "," + std::to_string(r.k2) + "," + g17(r.p) + "," +
             g17(r.gamma1) + "," + g17(r.gamma2) + "," + g17(r.gamma3) + "," + r.target + "," + g17(r.n) + "," +
             g17(r.p_match) + "," + g17(r.lambda) + "," + g17(r.delta) + "," + g17(r.r) + "," + g17(r.p_bar) + "," +
             g17(r.theta) + "," + g17(r.tv) + "," + g17(r.bound) + "," + g17(r.bound_wx) + "," + g17(r.ratio) + "," +
             (r.applicable ? "true" : "false") + "\n";
    }
    return s;
}

std::string to_json(const std::vector<SweepRecord>& records) {
    using nlohmann::json;
    json arr = json::array();
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    for (const auto& r : records) {
        arr.push_back({{"N", r.N},
                       {"k1", r.k1},
                       {"k2", r.k2},
                       {"p", num(r.p)},
                       {"gamma1", num(r.gamma1)},
                       {"gamma2", num(r.gamma2)},
                       {"gamma3", num(r.gamma3)},
                       {"target", r.target},
                       {"n", num(r.n)},
                       {"p_match", num(r.p_match)},
                       {"lambda", num(r.lambda)},
                       {"delta", num(r.delta)},
                       {"r", num(r.r)},
                       {"p_bar", num(r.p_bar)},
                       {"theta", num(r.theta)},
                       {"tv", num(r.tv)},
                       {"tv_is_estimate", r.tv_is_estimate},
                       {"bound", num(r.bound)},
                       {"bound_wx", num(r.bound_wx)},
                       {"ratio", num(r.ratio)},
                       {"applicable", r.applicable},
                       {"note", r.note}});
    }
    // json's number output is shortest round-trip, so no digits are lost
    return arr.dump(2) + "\n";
}

void emit(const std::vector<SweepRecord>& records, const std::string& format, const std::string& path) {
    const std::string body = format == "json" ? to_json(records) : to_csv(records);
    if (path.empty() || path == "-") {
        std::fwrite(body.data(), 1, body.size(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << body;
    if (!out) throw Error("write failed for " + path);
}

}  // namespace cpa
