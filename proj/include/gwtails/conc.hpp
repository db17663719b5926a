#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "detail/fft.hpp"
#include "detail/numeric.hpp"
#include "offspring.hpp"
#include "parallel.hpp"
#include "scales.hpp"
#include "stats.hpp"

namespace gwtails {

/// Exact pmf of an integer variable on [offset, offset + mass.size()) plus the
/// mass that fell outside the window on either side.
struct LatticeLaw {
    std::int64_t offset = 0;
    std::vector<double> mass;
    double escaped_below = 0.0;
    double escaped_above = 0.0;

    std::int64_t lo() const noexcept { return offset; }
    std::int64_t hi() const noexcept { return offset + static_cast<std::int64_t>(mass.size()) - 1; }
    double pmf(std::int64_t v) const noexcept {
        if (v < lo() || v > hi()) return 0.0;
        return mass[static_cast<std::size_t>(v - offset)];
    }
    double window_mass() const { return detail::compensated_sum(mass); }
    double total() const {
        detail::KahanSum acc;
        for (double m : mass) acc.add(m);
        acc.add(escaped_below);
        acc.add(escaped_above);
        return acc.value();
    }
    static LatticeLaw point(std::int64_t v) { return {v, {1.0}, 0.0, 0.0}; }
};

/// Q(Z, L) = sup_x P(Z in [x, x + L)) over the window: the max mass of
/// ceil(L) consecutive atoms.
inline double concentration_Q(const LatticeLaw& law, double L) {
    if (!(L > 0.0)) throw std::invalid_argument("concentration_Q: L must be positive");
    if (law.mass.empty()) throw std::invalid_argument("concentration_Q: empty law");
    const auto w = static_cast<std::size_t>(std::ceil(L));
    const auto n = law.mass.size();
    if (w >= n) return law.window_mass();
    double best = 0.0;
    if (w <= 64) {
        for (std::size_t i = 0; i + w <= n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < w; ++j) s += law.mass[i + j];
            best = std::max(best, s);
        }
    } else {
        std::vector<long double> prefix(n + 1, 0.0L);
        for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + law.mass[i];
        for (std::size_t i = 0; i + w <= n; ++i) best = std::max(best, static_cast<double>(prefix[i + w] - prefix[i]));
    }
    return best;
}

/// Empirical Q(Z, L): the largest fraction of samples in some [x, x + L).
inline double concentration_Q(std::span<const double> samples, double L) {
    if (!(L > 0.0)) throw std::invalid_argument("concentration_Q: L must be positive");
    if (samples.empty()) throw std::invalid_argument("concentration_Q: no samples");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    std::size_t best = 0, j = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (j < i) j = i;
        while (j < v.size() && v[j] < v[i] + L) ++j;
        best = std::max(best, j - i);
    }
    return static_cast<double>(best) / static_cast<double>(v.size());
}

namespace detail {

inline constexpr double kKernelTailCut = 0x1.0p-60;

/// nu(-1), nu(0), ..., nu(jmax) with jmax <= limit, and the mass beyond.
struct StepKernel {
    std::vector<double> p;  // p[j + 1] = nu(j)
    double beyond = 0.0;    // nu([jmax + 1, infinity))
    std::int64_t jmax() const noexcept { return static_cast<std::int64_t>(p.size()) - 2; }
};

inline StepKernel step_kernel(const StepDistribution& nu, std::int64_t limit) {
    std::int64_t jmax = limit;
    if (auto top = nu.support_max()) jmax = std::min(jmax, *top);
    // Light tails: stop once the remaining mass is negligible.
    if (nu.offspring().family() != Family::power) {
        std::int64_t j = -1;
        while (j < jmax && nu.tail(j + 1) >= kKernelTailCut) ++j;
        jmax = j;
    }
    jmax = std::max<std::int64_t>(jmax, -1);
    StepKernel k;
    k.p.resize(static_cast<std::size_t>(jmax + 2));
    for (std::int64_t j = -1; j <= jmax; ++j) k.p[static_cast<std::size_t>(j + 1)] = nu.pmf(j);
    k.beyond = nu.tail(jmax + 1);
    return k;
}

}  // namespace detail

enum class ConvMethod { automatic, direct, fft };

/// Exact law of S_n = X_1 + ... + X_n on [lo, hi] with escaped-mass buckets.
///
/// Steps are at least -1, so a partial sum above hi + (n - k) after k steps can
/// never come back to [lo, hi]; such mass is moved to the upper bucket as soon
/// as it appears. The direct method books every escape explicitly; the FFT
/// method (binary powering, each factor cut at hi + n) fills the upper bucket
/// by complement.
inline LatticeLaw convolve_steps(const StepDistribution& nu, std::int64_t n, std::int64_t lo, std::int64_t hi,
                                 ConvMethod method = ConvMethod::automatic) {
    if (n < 0 || n > 10'000) throw std::length_error("convolve_steps: n must lie in [0, 10^4]");
    if (hi < lo || hi - lo > 1'000'000) throw std::length_error("convolve_steps: window width must lie in [0, 10^6]");
    if (n == 0) {
        LatticeLaw out{lo, std::vector<double>(static_cast<std::size_t>(hi - lo + 1), 0.0), 0.0, 0.0};
        if (0 < lo) out.escaped_below = 1.0;
        else if (0 > hi) out.escaped_above = 1.0;
        else out.mass[static_cast<std::size_t>(-lo)] = 1.0;
        return out;
    }
    const std::int64_t top = hi + n;  // highest partial sum that can still matter
    const auto kernel = detail::step_kernel(nu, top + 1);
    const std::int64_t J = kernel.jmax();
    const std::int64_t base = -n;     // lowest reachable value
    const auto width = static_cast<std::size_t>(top - base + 1);
    if (method == ConvMethod::automatic) {
        const double cost = static_cast<double>(n) * static_cast<double>(J + 2) * static_cast<double>(width);
        method = cost <= 1e9 ? ConvMethod::direct : ConvMethod::fft;
    }

    std::vector<double> law;  // index v - base
    double above = 0.0;
    if (method == ConvMethod::direct) {
        std::vector<double> cur(width, 0.0), next(width, 0.0);
        cur[static_cast<std::size_t>(-base)] = 1.0;
        detail::KahanSum escaped;
        for (std::int64_t k = 1; k <= n; ++k) {
            const std::int64_t cur_lo = -(k - 1), cur_hi = hi + n - (k - 1);
            const std::int64_t top_k = hi + (n - k);
            std::fill(next.begin(), next.end(), 0.0);
            double cur_mass_beyond = 0.0;
            for (std::int64_t v = cur_lo; v <= cur_hi; ++v) cur_mass_beyond += cur[static_cast<std::size_t>(v - base)];
            escaped.add(cur_mass_beyond * kernel.beyond);
            for (std::int64_t j = -1; j <= J; ++j) {
                const double pj = kernel.p[static_cast<std::size_t>(j + 1)];
                if (pj == 0.0) continue;
                const std::int64_t v_end = std::min(cur_hi, top_k - j);  // last v landing inside
                const double* src = cur.data() + (cur_lo - base);
                double* dst = next.data() + (cur_lo + j - base);
                const std::int64_t cnt = v_end - cur_lo + 1;
                for (std::int64_t i = 0; i < cnt; ++i) dst[i] += pj * src[i];
                if (v_end < cur_hi) {
                    double s = 0.0;
                    for (std::int64_t v = std::max(v_end + 1, cur_lo); v <= cur_hi; ++v)
                        s += cur[static_cast<std::size_t>(v - base)];
                    escaped.add(pj * s);
                }
            }
            std::swap(cur, next);
        }
        law = std::move(cur);
        above = escaped.value();
    } else {
        detail::RealConvolver conv(2 * width + static_cast<std::size_t>(J) + 4);
        // Each array holds the law of S_k on [-k, top].
        auto multiply = [&](const std::vector<double>& a, std::int64_t ka, const std::vector<double>& b,
                            std::int64_t kb) {
            const auto len = static_cast<std::size_t>(top + ka + kb + 1);
            auto c = conv.convolve(a, b, len);
            for (auto& x : c) x = std::max(0.0, x);
            return c;
        };
        std::vector<double> step(static_cast<std::size_t>(top + 2), 0.0);
        for (std::int64_t j = -1; j <= std::min(J, top); ++j) step[static_cast<std::size_t>(j + 1)] = kernel.p[static_cast<std::size_t>(j + 1)];
        std::vector<double> acc{1.0};
        acc.resize(static_cast<std::size_t>(top + 1), 0.0);
        std::int64_t k_acc = 0, k_pow = 1;
        std::vector<double> pw = step;
        for (std::int64_t r = n; r > 0; r >>= 1) {
            if (r & 1) {
                acc = multiply(acc, k_acc, pw, k_pow);
                k_acc += k_pow;
            }
            if (r > 1) {
                pw = multiply(pw, k_pow, pw, k_pow);
                k_pow *= 2;
            }
        }
        law = std::move(acc);  // indices v + n, v in [-n, top]
    }

    LatticeLaw out{lo, std::vector<double>(static_cast<std::size_t>(hi - lo + 1), 0.0), 0.0, 0.0};
    detail::KahanSum below, kept;
    for (std::int64_t v = base; v <= hi; ++v) {
        const double m = law[static_cast<std::size_t>(v - base)];
        if (v < lo) below.add(m);
        else {
            out.mass[static_cast<std::size_t>(v - lo)] = m;
            kept.add(m);
        }
    }
    out.escaped_below = below.value();
    out.escaped_above = method == ConvMethod::direct ? above : std::max(0.0, 1.0 - kept.value() - below.value());
    return out;
}

/// E[(X_1 - X_2)^2 1{|X_1 - X_2| <= L}] by direct summation over pairs, with a
/// bound on what the cut at j_max leaves out.
struct TruncatedSecondMoment {
    double value;
    double error_bound;
};

inline TruncatedSecondMoment truncated_difference_moment(const StepDistribution& nu, double L,
                                                         std::int64_t j_max = 1 << 20) {
    if (!(L > 0.0)) throw std::invalid_argument("truncated_difference_moment: L must be positive");
    const auto kernel = detail::step_kernel(nu, j_max);
    const auto& p = kernel.p;
    const auto D = static_cast<std::int64_t>(std::floor(L));
    detail::KahanSum acc;
    for (std::int64_t d = 1; d <= D; ++d) {
        detail::KahanSum pair;
        for (std::size_t i = 0; i + static_cast<std::size_t>(d) < p.size(); ++i) pair.add(p[i] * p[i + static_cast<std::size_t>(d)]);
        acc.add(2.0 * static_cast<double>(d * d) * pair.value());
    }
    // Pairs with the smaller index beyond j_max: each term is at most
    // nu(j) * max_{k > j_max} nu(k) <= nu(j) * nu(j_max + 1) for nonincreasing tails.
    const double far = kernel.beyond * nu.pmf(kernel.jmax() + 1);
    return {acc.value(), 2.0 * static_cast<double>(D * D) * static_cast<double>(D) * far};
}

/// Q(X, 1/2) for an integer variable: its largest atom.
inline double largest_atom(const StepDistribution& nu) {
    const auto kernel = detail::step_kernel(nu, 1 << 20);
    return *std::max_element(kernel.p.begin(), kernel.p.end());
}

/// E[X^2 1{X in [0, 2^m)}].
inline double dispersal_moment(const StepDistribution& nu, int m) {
    const auto kernel = detail::step_kernel(nu, (std::int64_t{1} << m) - 1);
    detail::KahanSum acc;
    for (std::int64_t j = 0; j <= kernel.jmax(); ++j) acc.add(static_cast<double>(j * j) * kernel.p[static_cast<std::size_t>(j + 1)]);
    return acc.value();
}

struct KestenRow {
    std::int64_t n;
    double Q;             // Q(S_n, L)
    double Q_dyadic;      // Q(S_n, 2^m), m = ceil(log2 L)
    double ratio_moment;  // Q * sqrt(n E[(X1-X2)^2 1{|X1-X2| <= L}]) / L
    double ratio_atom;    // Q * sqrt(n) sqrt(1 - Q(X, 1/2)) / L
    double ratio_disperse;  // Q(S_n, 2^m) * sqrt(n P(X=-1) E[X^2 1{X in [0, 2^m)}]) / 2^m
    double escaped;       // mass of S_n outside the computed window
};

struct KestenReport {
    double L;
    int m;
    double moment;        // E[(X1-X2)^2 1{|X1-X2| <= L}]
    double moment_error;
    double atom;          // Q(X, 1/2)
    double dispersal;     // E[X^2 1{X in [0, 2^m)}]
    std::vector<KestenRow> rows;
    double C_moment = 0.0, C_atom = 0.0, C_disperse = 0.0;  // max ratio over n
    double spread_moment = 1.0, spread_atom = 1.0;          // max / min ratio over n
};

/// Exact Q(S_n, L) on an n-grid against both concentration bounds and the
/// dyadic dispersal form. S_n is resolved on [-n, n].
inline KestenReport kesten_check(const StepDistribution& nu, const std::vector<std::int64_t>& n_grid, double L) {
    if (n_grid.empty()) throw std::invalid_argument("kesten_check: empty n-grid");
    KestenReport r;
    r.L = L;
    r.m = std::max(0, static_cast<int>(std::ceil(std::log2(L))));
    const auto mom = truncated_difference_moment(nu, L);
    r.moment = mom.value;
    r.moment_error = mom.error_bound;
    r.atom = largest_atom(nu);
    r.dispersal = dispersal_moment(nu, r.m);
    const double dyadic = std::ldexp(1.0, r.m);
    double lo_m = detail::kInf, lo_a = detail::kInf;
    for (auto n : n_grid) {
        if (n < 1) throw std::invalid_argument("kesten_check: n must be positive");
        const auto law = convolve_steps(nu, n, -n, n);
        KestenRow row{};
        row.n = n;
        row.Q = concentration_Q(law, L);
        row.Q_dyadic = concentration_Q(law, dyadic);
        const double dn = static_cast<double>(n);
        row.ratio_moment = row.Q * std::sqrt(dn * r.moment) / L;
        row.ratio_atom = row.Q * std::sqrt(dn) * std::sqrt(1.0 - r.atom) / L;
        row.ratio_disperse = row.Q_dyadic * std::sqrt(dn * nu.p_minus1() * r.dispersal) / dyadic;
        row.escaped = law.escaped_above + law.escaped_below;
        r.C_moment = std::max(r.C_moment, row.ratio_moment);
        r.C_atom = std::max(r.C_atom, row.ratio_atom);
        r.C_disperse = std::max(r.C_disperse, row.ratio_disperse);
        lo_m = std::min(lo_m, row.ratio_moment);
        lo_a = std::min(lo_a, row.ratio_atom);
        r.rows.push_back(row);
    }
    r.spread_moment = r.C_moment / lo_m;
    r.spread_atom = r.C_atom / lo_a;
    return r;
}

// ---------------------------------------------------------------------------
// Scale exit times

enum class NlMethod { dp, mc };

inline const char* to_string(NlMethod m) { return m == NlMethod::dp ? "exact-DP" : "monte-carlo"; }

struct ScaleExitEntry {
    int ell = 0;
    std::int64_t n = 0;                // n_l (MC: upper-envelope grid value)
    std::int64_t n_lower = 0;          // MC: largest grid t known to lie below n_l; DP: n - 1
    NlMethod method = NlMethod::dp;
    std::vector<std::pair<std::int64_t, double>> survival;  // (t, sup_x P_x(tau >= t))
    bool pointwise_monotone = true;    // DP: u_{t+1} <= u_t at every state and t
    std::vector<double> sup_at_multiples;  // DP: sup_x P_x(tau >= k n_l), k = 1, 2, ...
};

/// Iterates u_{t+1} = K u_t with u_t(x) = P_x(tau >= t) on the scale window,
/// tau the exit time of [2^{l-1}, 2^{l+2}). Runs until sup u_t <= 1/2 and then
/// on to t = multiples * n_l. Jumps whose tail mass is below 2^-60 are treated
/// as exits.
namespace detail {

inline ScaleExitEntry n_ell_dp_uncached(const StepDistribution& nu, int ell, int multiples) {
    const auto win = scale_window(ell);
    const auto W = static_cast<std::size_t>(win.hi - win.lo);
    const auto kernel = detail::step_kernel(nu, static_cast<std::int64_t>(W) - 1);
    const auto J = static_cast<std::size_t>(std::max<std::int64_t>(kernel.jmax(), -1) + 1);  // entries j = 0..jmax
    const bool direct = J + 1 <= 64;

    ScaleExitEntry e;
    e.ell = ell;
    e.method = NlMethod::dp;
    // a holds u_t at a[1 .. W], a[0] = 0 is the state below the window, zeros beyond.
    std::vector<double> a(W + J + 2, 0.0), next(W, 0.0);
    std::fill(a.begin() + 1, a.begin() + 1 + static_cast<std::ptrdiff_t>(W), 1.0);
    std::unique_ptr<detail::RealConvolver> conv;
    std::vector<double> u_in;
    if (!direct) {
        conv = std::make_unique<detail::RealConvolver>(2 * W + 1);
        std::vector<double> g(W + 1, 0.0);  // g[p] = nu(W - 1 - p)
        for (std::size_t p = 0; p <= W; ++p) {
            const auto j = static_cast<std::int64_t>(W) - 1 - static_cast<std::int64_t>(p);
            if (j <= kernel.jmax()) g[p] = kernel.p[static_cast<std::size_t>(j + 1)];
        }
        conv->set_fixed(g);
        u_in.assign(W, 0.0);
    }
    auto record = [&](std::int64_t t, double sup) {
        const bool keep = t <= 4096 || (t & (t - 1)) == 0 || (t % 4096) == 0;
        if (keep) e.survival.emplace_back(t, sup);
    };
    record(0, 1.0);
    record(1, 1.0);
    std::int64_t t = 1;
    double sup = 1.0;
    std::int64_t n_found = 0;
    for (;;) {
        if (direct) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t jj = 0; jj <= J; ++jj) {  // jj = j + 1
                const double pj = kernel.p[jj];
                if (pj == 0.0) continue;
                const double* src = a.data() + jj;
                for (std::size_t x = 0; x < W; ++x) next[x] += pj * src[x];
            }
        } else {
            std::copy(a.begin() + 1, a.begin() + 1 + static_cast<std::ptrdiff_t>(W), u_in.begin());
            conv->convolve_fixed(u_in, W - 1, W, next.data());
            for (auto& v : next) v = std::clamp(v, 0.0, 1.0);
        }
        ++t;
        double s = 0.0;
        for (std::size_t x = 0; x < W; ++x) {
            if (next[x] > a[x + 1]) e.pointwise_monotone = false;
            s = std::max(s, next[x]);
            a[x + 1] = next[x];
        }
        sup = s;
        record(t, sup);
        if (n_found == 0 && sup <= 0.5) {
            n_found = t;
            if (multiples == 1) break;
        }
        if (n_found > 0 && t % n_found == 0) {
            e.sup_at_multiples.push_back(sup);
            if (static_cast<int>(e.sup_at_multiples.size()) == multiples) break;
        }
    }
    if (e.sup_at_multiples.empty()) e.sup_at_multiples.push_back(sup);
    if (e.survival.back().first != t) e.survival.emplace_back(t, sup);
    e.n = n_found;
    e.n_lower = n_found - 1;
    if (!direct) e.pointwise_monotone = false;  // FFT rounding: not asserted
    return e;
}

// The DP is a pure function of (law, l, multiples); large scales are slow.
struct NlCache {
    std::mutex mu;
    std::map<std::string, ScaleExitEntry> entries;
};

inline NlCache& nl_cache() {
    static NlCache c;
    return c;
}

}  // namespace detail

inline ScaleExitEntry estimate_n_ell_dp(const StepDistribution& nu, int ell, int multiples = 1) {
    if (ell < 0 || ell > 30) throw std::out_of_range("estimate_n_ell: scale outside [0, 30]");
    if (!(nu.p_minus1() > 0.0)) throw std::invalid_argument("estimate_n_ell: need mu(0) > 0");
    if (multiples < 1) throw std::invalid_argument("estimate_n_ell: multiples must be >= 1");
    const auto key = nu.offspring().describe() + "|" + std::to_string(ell) + "|" + std::to_string(multiples);
    auto& cache = detail::nl_cache();
    {
        std::lock_guard lock(cache.mu);
        if (auto it = cache.entries.find(key); it != cache.entries.end()) return it->second;
    }
    auto e = detail::n_ell_dp_uncached(nu, ell, multiples);
    std::lock_guard lock(cache.mu);
    return cache.entries.emplace(key, std::move(e)).first->second;
}

/// Monte Carlo n_l: exit times from up to `starts` starting points (both
/// window ends included), survival on a 2^{1/8} geometric t-grid, and the
/// Wilson envelopes of the worst start.
inline ScaleExitEntry estimate_n_ell_mc(const StepDistribution& nu, int ell, std::uint64_t trials_per_start,
                                        std::uint64_t seed, int starts = 64, std::int64_t t_cap = 0) {
    if (ell < 0 || ell > 30) throw std::out_of_range("estimate_n_ell: scale outside [0, 30]");
    if (trials_per_start == 0 || starts < 2) throw std::invalid_argument("estimate_n_ell: need trials and >= 2 starts");
    const auto win = scale_window(ell);
    const std::int64_t W = win.hi - win.lo;
    if (t_cap <= 0) t_cap = std::int64_t{1} << std::min(62, 2 * ell + 12);
    std::vector<std::int64_t> xs;
    if (W <= starts) {
        for (std::int64_t x = win.lo; x < win.hi; ++x) xs.push_back(x);
    } else {
        for (int i = 0; i < starts; ++i) xs.push_back(win.lo + (W - 1) * i / (starts - 1));
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    }
    std::vector<std::int64_t> grid;
    for (int g = 0;; ++g) {
        const auto v = static_cast<std::int64_t>(std::llround(std::exp2(g / 8.0)));
        if (v > t_cap) break;
        if (grid.empty() || v != grid.back()) grid.push_back(v);
    }
    const auto total = static_cast<std::uint64_t>(xs.size()) * trials_per_start;
    const auto times = parallel_map(total, [&](std::uint64_t i) {
        return exit_time_trial(nu, ell, xs[i / trials_per_start], t_cap, seed, i);
    });
    std::vector<double> sup_hi(grid.size(), 0.0), sup_lo(grid.size(), 0.0), sup_hat(grid.size(), 0.0);
    for (std::size_t s = 0; s < xs.size(); ++s) {
        std::vector<std::int64_t> v(times.begin() + static_cast<std::ptrdiff_t>(s * trials_per_start),
                                    times.begin() + static_cast<std::ptrdiff_t>((s + 1) * trials_per_start));
        std::sort(v.begin(), v.end());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto ge = static_cast<std::uint64_t>(v.end() - std::lower_bound(v.begin(), v.end(), grid[g]));
            const auto est = estimate_tail(ge, trials_per_start);
            sup_hi[g] = std::max(sup_hi[g], est.hi);
            sup_lo[g] = std::max(sup_lo[g], est.lo);
            sup_hat[g] = std::max(sup_hat[g], est.p_hat);
        }
    }
    ScaleExitEntry e;
    e.ell = ell;
    e.method = NlMethod::mc;
    e.pointwise_monotone = false;
    e.n = -1;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        e.survival.emplace_back(grid[g], sup_hat[g]);
        if (e.n < 0 && sup_hi[g] <= 0.5) e.n = grid[g];
        if (sup_lo[g] > 0.5) e.n_lower = grid[g];
    }
    if (e.n < 0) throw std::runtime_error("estimate_n_ell: survival never fell to 1/2 below the t cap");
    return e;
}

/// n_l per scale.
struct ScaleExitTable {
    std::map<int, ScaleExitEntry> entries;

    std::int64_t n(int ell) const {
        auto it = entries.find(ell);
        if (it == entries.end()) throw std::out_of_range("ScaleExitTable: missing n_" + std::to_string(ell));
        return it->second.n;
    }
    bool covers(int m) const {
        for (int ell = 0; ell <= m; ++ell)
            if (!entries.count(ell)) return false;
        return true;
    }
};

inline ScaleExitTable exit_table_dp(const StepDistribution& nu, int ell_max) {
    ScaleExitTable t;
    std::vector<ScaleExitEntry> rows(static_cast<std::size_t>(ell_max + 1));
    parallel_for(static_cast<std::uint64_t>(ell_max + 1), [&](std::uint64_t ell) {
        rows[ell] = estimate_n_ell_dp(nu, static_cast<int>(ell));
    });
    for (auto& r : rows) t.entries.emplace(r.ell, std::move(r));
    return t;
}

struct BoundBudget {
    int m;
    std::vector<double> b;
    double V;      // 36 sum b_l n_l / 2^l
    double Delta;  // 4 sum 2^{-l - b_l}
};

inline BoundBudget budget(const std::vector<double>& b, const ScaleExitTable& table) {
    if (b.empty()) throw std::invalid_argument("budget: empty b");
    for (double x : b)
        if (!(x > 0.0)) throw std::invalid_argument("budget: b must be positive");
    BoundBudget r{static_cast<int>(b.size()) - 1, b, 0.0, 0.0};
    detail::KahanSum v, d;
    for (int ell = 0; ell <= r.m; ++ell) {
        const double bl = b[static_cast<std::size_t>(ell)];
        v.add(bl * static_cast<double>(table.n(ell)) / std::ldexp(1.0, ell));
        d.add(std::exp2(-static_cast<double>(ell) - bl));
    }
    r.V = 36.0 * v.value();
    r.Delta = 4.0 * d.value();
    return r;
}

/// M = sup_l n_l / 2^{alpha l} over the scales in the table.
inline double stable_scale_constant(const ScaleExitTable& table, double alpha) {
    if (table.entries.empty()) throw std::invalid_argument("stable_scale_constant: empty table");
    double m = 0.0;
    for (const auto& [ell, e] : table.entries) m = std::max(m, static_cast<double>(e.n) / std::exp2(alpha * ell));
    return m;
}

}  // namespace gwtails
