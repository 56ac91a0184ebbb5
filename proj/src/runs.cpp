#include "cpa/runs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cpa/detail/sum.hpp"
#include "cpa/errors.hpp"

namespace cpa {

using detail::Accumulator;

const char* to_string(RunsKind k) {
    switch (k) {
        case RunsKind::OneOne: return "one_one";
        case RunsKind::K1K2: return "k1k2";
        case RunsKind::KRuns: return "kruns";
    }
    return "?";
}

namespace {

void validate(const RunsModel& m) {
    if (m.k2 < 1 || m.k1 < 0) throw DomainError("run pattern needs k2 >= 1 and k1 >= 0");
    if (m.window() > 12) throw StateSpaceError("pattern window above 12 trials");
    for (double p : m.probs)
        if (!(p > 0.0 && p < 1.0)) throw DomainError("success probabilities must lie in (0,1)");
    if (m.L() < m.pattern_len()) throw DomainError("fewer trials than the pattern length");
}

std::int64_t mod(std::int64_t a, std::int64_t n) {
    const std::int64_t r = a % n;
    return r < 0 ? r + n : r;
}

std::int64_t circ_dist(std::int64_t a, std::int64_t b, std::int64_t n) {
    const std::int64_t d = mod(a - b, n);
    return std::min(d, n - d);
}

}  // namespace

bool RunsModel::identical() const {
    return std::all_of(probs.begin(), probs.end(), [&](double p) { return p == probs.front(); });
}

double RunsModel::prob(std::int64_t j) const { return probs[static_cast<std::size_t>(mod(j, L()))]; }

RunsModel RunsModel::one_one(std::int64_t N, double p) {
    if (N < 2) throw DomainError("(1,1)-runs need N >= 2");
    return one_one(std::vector<double>(static_cast<std::size_t>(N), p));
}

RunsModel RunsModel::one_one(std::vector<double> probs) {
    RunsModel m;
    m.kind = RunsKind::OneOne;
    m.N = static_cast<std::int64_t>(probs.size());
    m.probs = std::move(probs);
    validate(m);
    return m;
}

RunsModel RunsModel::k1k2(std::int64_t N, int k1, int k2, double p) {
    if (k1 < 1 || k2 < 1) throw DomainError("(k1,k2)-runs need k1, k2 >= 1");
    const int m = k1 + k2 - 1;
    return k1k2(k1, k2, std::vector<double>(static_cast<std::size_t>(N * m), p));
}

RunsModel RunsModel::k1k2(int k1, int k2, std::vector<double> probs) {
    if (k1 < 1 || k2 < 1) throw DomainError("(k1,k2)-runs need k1, k2 >= 1");
    RunsModel r;
    r.kind = RunsKind::K1K2;
    r.k1 = k1;
    r.k2 = k2;
    const int m = k1 + k2 - 1;
    if (probs.size() % static_cast<std::size_t>(m) != 0) throw DomainError("trial count must be a multiple of m");
    r.N = static_cast<std::int64_t>(probs.size()) / m;
    r.probs = std::move(probs);
    validate(r);
    return r;
}

RunsModel RunsModel::kruns(std::int64_t N, int k, double p) {
    return kruns(k, std::vector<double>(static_cast<std::size_t>(std::max<std::int64_t>(N, 0)), p));
}

RunsModel RunsModel::kruns(int k, std::vector<double> probs) {
    if (k < 1) throw DomainError("k-runs need k >= 1");
    RunsModel r;
    r.kind = RunsKind::KRuns;
    r.k1 = 0;
    r.k2 = k;
    r.N = static_cast<std::int64_t>(probs.size());
    r.probs = std::move(probs);
    validate(r);
    return r;
}

Radii neighborhood_radii(const RunsModel& m, RadiusConvention conv) {
    const int base = conv == RadiusConvention::Tight ? m.window() : m.window() + 1;
    return {base, 2 * base, 3 * base};
}

RadiusConvention default_bound_convention(RunsKind kind) {
    return kind == RunsKind::OneOne ? RadiusConvention::Tight : RadiusConvention::Wide;
}

Neighborhoods neighborhoods(std::int64_t i, const Radii& r, std::int64_t units) {
    Neighborhoods nb;
    for (std::int64_t j = 0; j < units; ++j) {
        const auto d = circ_dist(i, j, units);
        if (d <= r.a) nb.A.push_back(j);
        if (d <= r.b) nb.B.push_back(j);
        if (d <= r.c) nb.C.push_back(j);
    }
    return nb;
}

std::vector<double> arc_law(const RunsModel& model, std::int64_t a, std::int64_t len, std::uint32_t entry,
                            std::uint32_t exit) {
    const int w = model.window();
    const std::uint32_t mask_w = (1u << w) - 1u, mask_f = (1u << (w + 1)) - 1u, code = model.pattern_code();
    const std::size_t S = std::size_t{1} << w;
    const auto maxc = static_cast<std::size_t>(len + w);
    std::vector<double> cur(S * (maxc + 1), 0.0), nxt(S * (maxc + 1), 0.0);
    cur[(entry & mask_w) * (maxc + 1)] = 1.0;
    std::size_t top = 0;  // highest count reachable so far
    for (std::int64_t t = 0; t < len; ++t) {
        const double p = model.prob(a + t);
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (std::uint32_t st = 0; st < S; ++st) {
            const double* row = &cur[st * (maxc + 1)];
            for (std::uint32_t b = 0; b < 2; ++b) {
                const std::uint32_t full = ((st << 1) | b) & mask_f;
                const std::size_t x = full == code ? 1 : 0;
                const double pb = b ? p : 1.0 - p;
                double* out = &nxt[(full & mask_w) * (maxc + 1) + x];
                for (std::size_t c = 0; c <= top; ++c) out[c] += row[c] * pb;
            }
        }
        std::swap(cur, nxt);
        ++top;
    }
    for (int t = 0; t < w; ++t) {
        const std::uint32_t b = (exit >> (w - 1 - t)) & 1u;
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (std::uint32_t st = 0; st < S; ++st) {
            const std::uint32_t full = ((st << 1) | b) & mask_f;
            const std::size_t x = full == code ? 1 : 0;
            const double* row = &cur[st * (maxc + 1)];
            double* out = &nxt[(full & mask_w) * (maxc + 1) + x];
            for (std::size_t c = 0; c <= top; ++c) out[c] += row[c];
        }
        std::swap(cur, nxt);
        ++top;
    }
    std::vector<double> law(maxc + 1, 0.0);
    for (std::uint32_t st = 0; st < S; ++st)
        for (std::size_t c = 0; c <= maxc; ++c) law[c] += cur[st * (maxc + 1) + c];
    return law;
}

LatticeMeasure exact_law(const RunsModel& model) {
    validate(model);
    const int w = model.window();
    const std::int64_t L = model.L();
    std::vector<double> total(static_cast<std::size_t>(L) + 1, 0.0);
    for (std::uint32_t s0 = 0; s0 < (1u << w); ++s0) {
        double pw = 1.0;
        for (int t = 0; t < w; ++t) {
            const double p = model.prob(t);
            pw *= ((s0 >> (w - 1 - t)) & 1u) ? p : 1.0 - p;
        }
        if (pw == 0.0) continue;
        // The opening window doubles as the closing one: trials L..L+w-1 are 0..w-1.
        const auto law = arc_law(model, w, L - w, s0, s0);
        for (std::size_t c = 0; c < law.size() && c < total.size(); ++c) total[c] += pw * law[c];
    }
    auto m = LatticeMeasure::from_weights(0, std::move(total));
    trim(m);
    return m;
}

namespace {

std::int64_t count_matches(const RunsModel& model, std::uint64_t mask) {
    const int w = model.window();
    const std::int64_t L = model.L();
    const std::uint32_t code = model.pattern_code();
    std::int64_t cnt = 0;
    for (std::int64_t j = 0; j < L; ++j) {
        std::uint32_t full = 0;
        for (int t = -w; t <= 0; ++t) full = (full << 1) | static_cast<std::uint32_t>((mask >> mod(j + t, L)) & 1u);
        cnt += full == code;
    }
    return cnt;
}

double mask_prob(const RunsModel& model, std::uint64_t mask) {
    double pr = 1.0;
    for (std::int64_t j = 0; j < model.L(); ++j) pr *= ((mask >> j) & 1u) ? model.prob(j) : 1.0 - model.prob(j);
    return pr;
}

}  // namespace

LatticeMeasure brute_force_law(const RunsModel& model, Exec exec) {
    validate(model);
    const std::int64_t L = model.L();
    if (L > 22) throw StateSpaceError("brute force enumeration refuses L > 22");
    const std::uint64_t total = std::uint64_t{1} << L;
    std::vector<double> hist(static_cast<std::size_t>(L) + 1, 0.0);
    if (exec == Exec::Serial) {
        for (std::uint64_t mask = 0; mask < total; ++mask)
            hist[static_cast<std::size_t>(count_matches(model, mask))] += mask_prob(model, mask);
    } else {
        int nthreads = 1;
#ifdef _OPENMP
        nthreads = omp_get_max_threads();
#endif
        std::vector<std::vector<double>> local(static_cast<std::size_t>(nthreads), hist);
#pragma omp parallel for schedule(static)
        for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(total); ++mi) {
            int tid = 0;
#ifdef _OPENMP
            tid = omp_get_thread_num();
#endif
            const auto mask = static_cast<std::uint64_t>(mi);
            local[static_cast<std::size_t>(tid)][static_cast<std::size_t>(count_matches(model, mask))] +=
                mask_prob(model, mask);
        }
        for (const auto& h : local)
            for (std::size_t c = 0; c < hist.size(); ++c) hist[c] += h[c];
    }
    auto m = LatticeMeasure::from_weights(0, std::move(hist));
    trim(m);
    return m;
}

CumulantTriple closed_cumulants_11(const std::vector<double>& probs) { return closed_cumulants_k1k2(probs, 1, 1); }

CumulantTriple closed_cumulants_k1k2(const std::vector<double>& probs, int k1, int k2) {
    const auto L = static_cast<std::int64_t>(probs.size());
    const int w = k1 + k2 - 1;
    if (k1 < 1 || k2 < 1) throw DomainError("closed (k1,k2) cumulants need k1, k2 >= 1");
    auto pr = [&](std::int64_t j) { return probs[static_cast<std::size_t>(mod(j, L))]; };
    std::vector<double> b(static_cast<std::size_t>(L));
    for (std::int64_t j = 0; j < L; ++j) {
        double v = 1.0;
        for (int t = 0; t <= w; ++t) v *= t < k1 ? 1.0 - pr(j - w + t) : pr(j - w + t);
        b[static_cast<std::size_t>(j)] = v;
    }
    // Non-overlapping pattern: X_i X_j = 0 within distance m, independent beyond.
    const Radii r{w, 2 * w, 3 * w};
    Accumulator g1, g2, g3;
    for (std::int64_t i = 0; i < L; ++i) {
        const auto nb = neighborhoods(i, r, L);
        const double bi = b[static_cast<std::size_t>(i)];
        double sa = 0.0;
        for (auto j : nb.A) sa += b[static_cast<std::size_t>(j)];
        g1 += bi;
        g2 += -bi * sa;
        g3 += bi * sa * sa;
        for (auto k : nb.B) {
            if (circ_dist(i, k, L) <= r.a) continue;
            double s = 0.0;
            for (auto l : nb.A)
                if (circ_dist(l, k, L) <= r.a) s += b[static_cast<std::size_t>(l)];
            g3 += 0.5 * bi * b[static_cast<std::size_t>(k)] * s;
        }
    }
    return {g1.value(), g2.value(), g3.value()};
}

double kruns_m3(double p, int k, std::int64_t N) {
    if (N < 3 * k - 2) throw DomainError("k-runs third moment groups need N >= 3k - 2");
    const double n = static_cast<double>(N);
    auto pw = [p](int e) { return std::pow(p, e); };
    auto tsum = [&](int lo, int hi, int base) {  // sum_{t=lo}^{hi} p^{base+t}
        double s = 0.0;
        for (int t = lo; t <= hi; ++t) s += pw(base + t);
        return s;
    };
    // (j, l) positions relative to an occurrence at 1, grouped by how the
    // three windows overlap.
    const double ca1 = pw(k) + 2.0 * tsum(1, k - 1, k) + (n - 2 * k + 1) * pw(2 * k);
    double ca2 = 0.0;
    for (int d = 1; d <= k - 1; ++d)
        ca2 += 2.0 * ((d + 1) * pw(k + d) + 2.0 * tsum(1, k - 1, k + d) + (n - 2 * k - d + 1) * pw(2 * k + d));
    const double ca3 = 2.0 * ((k + 1) * pw(2 * k) + 2.0 * tsum(1, k - 1, 2 * k) + (n - 3 * k + 1) * pw(3 * k));
    double ca4 = 0.0;
    for (int d = k + 1; d <= 2 * k - 2; ++d)
        ca4 += 2.0 * (2.0 * pw(2 * k) + 2.0 * tsum(1, d - k, 2 * k) + (2 * k - d - 1) * pw(k + d) +
                      2.0 * tsum(1, k - 1, 2 * k) + (n - d - 2 * k + 1) * pw(3 * k));
    const double cnt = n - 1.0 - (k >= 2 ? 2.0 * (2 * k - 2) : 2.0);
    const double ca5 = cnt * (2.0 * pw(2 * k) + 4.0 * tsum(1, k - 1, 2 * k) + (n - 4 * k + 2) * pw(3 * k));
    return n * (ca1 + ca2 + ca3 + ca4 + ca5);
}

CumulantTriple closed_cumulants_kruns(double p, int k, std::int64_t N) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("p must lie in (0,1)");
    const double n = static_cast<double>(N), pk = std::pow(p, k);
    const double m1 = n * pk;
    const double g2 = (n * pk / (1.0 - p)) * (2.0 * (p - pk) - (2.0 * k - 1.0) * pk * (1.0 - p));
    const double m2 = g2 + m1 * m1 + m1;
    const double m3 = kruns_m3(p, k, N);
    const double g3 = 0.5 * (m3 - 3.0 * m1 * m2 - 3.0 * m2 + 2.0 * m1 * m1 * m1 + 3.0 * m1 * m1 + 2.0 * m1);
    return {m1, g2, g3};
}

namespace {

struct WindowGeometry {
    std::int64_t xs = 0, xe = 0;  // first/last indicator index covered by C_i (unwrapped)
    std::int64_t s = 0;           // first trial of the window (unwrapped)
    int nbits = 0;
    int nunits = 0;
    int bpu = 1;  // bits per unit value in the packed key
};

WindowGeometry geometry(const UnitView& view, std::int64_t i) {
    const auto& m = *view.model;
    if (view.block < 1 || m.L() % view.block != 0) throw DomainError("block must divide the trial count");
    WindowGeometry g;
    g.nunits = 2 * view.radii.c + 1;
    if (g.nunits > view.units()) throw StateSpaceError("neighbourhood C_i wraps around the circle");
    g.xs = (i - view.radii.c) * view.block;
    g.xe = (i + view.radii.c + 1) * view.block - 1;
    g.s = g.xs - m.window();
    g.nbits = static_cast<int>(g.xe - g.s + 1);
    if (g.nbits > kMaxWindowBits)
        throw StateSpaceError("window of " + std::to_string(g.nbits) + " trials exceeds " + std::to_string(kMaxWindowBits));
    if (g.nbits > m.L()) throw StateSpaceError("window longer than the circle");
    while ((1 << g.bpu) <= view.block) ++g.bpu;
    if (g.bpu * g.nunits > 64) throw StateSpaceError("unit key does not fit in 64 bits");
    return g;
}

using GroupMap = std::unordered_map<std::uint64_t, WindowGroup>;

void scan_range(const UnitView& view, const WindowGeometry& g, std::uint64_t from, std::uint64_t to, GroupMap& out) {
    const auto& m = *view.model;
    const int w = m.window();
    const std::uint32_t mask_f = (1u << (w + 1)) - 1u, mask_w = (1u << w) - 1u, code = m.pattern_code();
    const std::size_t nb = std::size_t{1} << (2 * w);
    const int nx = g.nunits * view.block;
    // Split probability tables: low bits are the newest trials.
    const int h = g.nbits / 2;
    std::vector<double> lowt(std::size_t{1} << h), hight(std::size_t{1} << (g.nbits - h));
    for (std::size_t v = 0; v < lowt.size(); ++v) {
        double pr = 1.0;
        for (int t = 0; t < h; ++t) {
            const double p = m.prob(g.s + g.nbits - 1 - t);
            pr *= ((v >> t) & 1u) ? p : 1.0 - p;
        }
        lowt[v] = pr;
    }
    for (std::size_t v = 0; v < hight.size(); ++v) {
        double pr = 1.0;
        for (int t = 0; t < g.nbits - h; ++t) {
            const double p = m.prob(g.s + g.nbits - 1 - h - t);
            pr *= ((v >> t) & 1u) ? p : 1.0 - p;
        }
        hight[v] = pr;
    }
    std::vector<int> vals(static_cast<std::size_t>(g.nunits));
    for (std::uint64_t cfg = from; cfg < to; ++cfg) {
        const double pr = lowt[cfg & ((std::uint64_t{1} << h) - 1)] * hight[cfg >> h];
        if (pr == 0.0) continue;
        std::uint64_t key = 0;
        for (int u = 0; u < g.nunits; ++u) {
            int v = 0;
            for (int r = u * view.block; r < (u + 1) * view.block; ++r)
                v += ((cfg >> (nx - 1 - r)) & mask_f) == code;
            vals[static_cast<std::size_t>(u)] = v;
            key = (key << g.bpu) | static_cast<std::uint64_t>(v);
        }
        const auto first = static_cast<std::uint32_t>(cfg >> (g.nbits - w)) & mask_w;
        const auto last = static_cast<std::uint32_t>(cfg) & mask_w;
        auto [it, fresh] = out.try_emplace(key);
        if (fresh) {
            it->second.key = key;
            it->second.values = vals;
            it->second.boundary.assign(nb, 0.0);
        }
        it->second.weight += pr;
        it->second.boundary[(static_cast<std::size_t>(first) << w) | last] += pr;
    }
}

void merge_into(GroupMap& dst, GroupMap&& src) {
    for (auto& [key, grp] : src) {
        auto [it, fresh] = dst.try_emplace(key, std::move(grp));
        if (!fresh) {
            it->second.weight += grp.weight;
            for (std::size_t b = 0; b < grp.boundary.size(); ++b) it->second.boundary[b] += grp.boundary[b];
        }
    }
}

}  // namespace

WindowEnumeration enumerate_window(const UnitView& view, std::int64_t i, Exec exec) {
    const auto g = geometry(view, i);
    const std::uint64_t total = std::uint64_t{1} << g.nbits;
    GroupMap all;
    if (exec == Exec::Serial) {
        scan_range(view, g, 0, total, all);
    } else {
        int nthreads = 1;
#ifdef _OPENMP
        nthreads = omp_get_max_threads();
#endif
        std::vector<GroupMap> local(static_cast<std::size_t>(nthreads));
#pragma omp parallel num_threads(nthreads)
        {
            int tid = 0, nt = 1;
#ifdef _OPENMP
            tid = omp_get_thread_num();
            nt = omp_get_num_threads();
#endif
            const std::uint64_t chunk = (total + static_cast<std::uint64_t>(nt) - 1) / static_cast<std::uint64_t>(nt);
            const std::uint64_t from = std::min(total, chunk * static_cast<std::uint64_t>(tid));
            const std::uint64_t to = std::min(total, from + chunk);
            scan_range(view, g, from, to, local[static_cast<std::size_t>(tid)]);
        }
        for (auto& l : local) merge_into(all, std::move(l));
    }
    WindowEnumeration en;
    en.window_start = mod(g.s, view.model->L());
    en.window_bits = g.nbits;
    en.groups.reserve(all.size());
    for (auto& [key, grp] : all) en.groups.push_back(std::move(grp));
    std::sort(en.groups.begin(), en.groups.end(), [](const WindowGroup& a, const WindowGroup& b) { return a.key < b.key; });
    return en;
}

std::vector<LatticeMeasure> outside_laws(const UnitView& view, const WindowEnumeration& en) {
    const auto& m = *view.model;
    const int w = m.window();
    const std::int64_t e = en.window_start + en.window_bits - 1;
    const std::int64_t len = m.L() - en.window_bits;
    const std::size_t nb = std::size_t{1} << (2 * w);
    std::vector<LatticeMeasure> laws(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        const auto first = static_cast<std::uint32_t>(b >> w), last = static_cast<std::uint32_t>(b) & ((1u << w) - 1u);
        laws[b] = LatticeMeasure::from_weights(0, arc_law(m, e + 1, len, last, first));
    }
    return laws;
}

namespace {

LatticeMeasure group_law(const WindowGroup& grp, const std::vector<LatticeMeasure>& outside) {
    std::vector<double> w;
    std::vector<const LatticeMeasure*> laws;
    for (std::size_t b = 0; b < grp.boundary.size(); ++b) {
        if (grp.boundary[b] == 0.0) continue;
        w.push_back(grp.boundary[b] / grp.weight);
        laws.push_back(&outside[b]);
    }
    return mixture(w, laws);
}

}  // namespace

std::vector<double> conditional_smoothness(const UnitView& view, const WindowEnumeration& en) {
    const auto outside = outside_laws(view, en);
    std::vector<double> D(en.groups.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t gi = 0; gi < static_cast<std::int64_t>(en.groups.size()); ++gi)
        D[static_cast<std::size_t>(gi)] = smoothness_D(group_law(en.groups[static_cast<std::size_t>(gi)], outside));
    return D;
}

ConditionalLawTable conditional_laws(const UnitView& view, std::int64_t i, Exec exec) {
    const auto en = enumerate_window(view, i, exec);
    const auto outside = outside_laws(view, en);
    ConditionalLawTable tab;
    for (const auto& grp : en.groups) {
        ConditionalEntry ce;
        ce.weight = grp.weight;
        ce.values = grp.values;
        std::int64_t shift = 0;
        for (int v : grp.values) shift += v;
        ce.law = shifted(group_law(grp, outside), shift);
        trim(ce.law);
        tab.entries.push_back(std::move(ce));
    }
    return tab;
}

ConditionalLawTable conditional_laws(const RunsModel& model, std::int64_t i) {
    return conditional_laws(UnitView{&model, 1, neighborhood_radii(model, default_bound_convention(model.kind))}, i);
}

BlockModel block_sums(const RunsModel& model) {
    if (model.kind == RunsKind::KRuns) throw DomainError("block sums are defined for (k1,k2)-runs");
    BlockModel bm;
    bm.model = &model;
    bm.m = model.window();
    bm.units = model.L() / bm.m;
    const int w = model.window(), m = bm.m;
    const std::uint32_t mask_f = (1u << (w + 1)) - 1u, code = model.pattern_code();
    const int nbits = 3 * m + w;
    bm.abar.resize(static_cast<std::size_t>(bm.units));
    bm.abar_live.resize(bm.abar.size());
    bm.rho.resize(bm.abar.size());
    for (std::int64_t j = 0; j < bm.units; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (model.identical() && j > 0) {
            bm.abar[ju] = bm.abar[0];
            bm.abar_live[ju] = bm.abar_live[0];
            bm.rho[ju] = bm.rho[0];
            continue;
        }
        const std::int64_t s = (j - 1) * m - w;
        std::map<std::tuple<int, int, int>, double> joint;
        for (std::uint64_t cfg = 0; cfg < (std::uint64_t{1} << nbits); ++cfg) {
            double pr = 1.0;
            for (int t = 0; t < nbits; ++t) {
                const double p = model.prob(s + t);
                pr *= ((cfg >> (nbits - 1 - t)) & 1u) ? p : 1.0 - p;
            }
            int T[3] = {0, 0, 0};
            for (int r = 0; r < 3 * m; ++r) T[r / m] += ((cfg >> (3 * m - 1 - r)) & mask_f) == code;
            joint[{T[0], T[1], T[2]}] += pr;
        }
        // (zero mass, total) per neighbour pair, and the neighbour marginals
        std::map<std::pair<int, int>, std::pair<double, double>> cond;
        std::map<int, double> left, right;
        for (const auto& [key, pr] : joint) {
            auto& c = cond[{std::get<0>(key), std::get<2>(key)}];
            c.second += pr;
            if (std::get<1>(key) == 0) c.first += pr;
            left[std::get<0>(key)] += pr;
            right[std::get<2>(key)] += pr;
        }
        double best = 0.0, live = 0.0, dead = 0.0;
        for (const auto& [nbv, c] : cond) {
            if (c.second <= 0.0) continue;
            best = std::max(best, c.first / c.second);
            if (c.first < c.second)
                live = std::max(live, c.first / c.second);
            else  // T_{j-1} and T_{j+1} are independent (distance 2)
                dead += left[nbv.first] * right[nbv.second];
        }
        bm.abar[ju] = best;
        bm.abar_live[ju] = live;
        bm.rho[ju] = 1.0 - dead;
    }
    return bm;
}

}  // namespace cpa
