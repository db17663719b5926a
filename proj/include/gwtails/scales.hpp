#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <climits>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "detail/numeric.hpp"
#include "offspring.hpp"
#include "rng.hpp"
#include "treegen.hpp"
#include "walk.hpp"

namespace gwtails {

inline constexpr int kNoScale = INT_MIN;  // the scale -infinity at absorption
inline constexpr int kMaxScale = 61;

/// Window [2^{l-1}, 2^{l+2}) of scale l on the integers: lower end 1 for l = 0.
struct ScaleWindow {
    std::int64_t lo;
    std::int64_t hi;
    bool contains(std::int64_t s) const noexcept { return s >= lo && s < hi; }
};

inline ScaleWindow scale_window(int ell) {
    if (ell < 0 || ell > kMaxScale) throw std::out_of_range("scale_window: scale outside [0, 61]");
    return {ell == 0 ? 1 : (std::int64_t{1} << (ell - 1)), std::int64_t{1} << (ell + 2)};
}

/// floor(log2 s) for s >= 1, kNoScale for s <= 0.
inline int scale_of(std::int64_t s) noexcept { return s > 0 ? detail::floor_log2(s) : kNoScale; }

struct ScaleTally {
    std::int64_t n = 0;                 // N_l
    double h = 0.0;                     // H_l
    std::int64_t visits = 0;            // M(l)
    std::vector<std::size_t> visit_index;  // i(l, m), m = 1..M(l)
};

/// Change-of-scale times, scale sequence and per-scale tallies of one path.
struct ScaleDecomposition {
    std::vector<std::int64_t> tau;  // tau_0 = 0 < tau_1 < ...
    std::vector<int> L;             // L_i; the last entry is kNoScale at sigma
    std::map<int, ScaleTally> per_scale;
    std::int64_t sigma = 0;

    /// Lambda(t) for 0 <= t <= sigma.
    int lambda(std::int64_t t) const {
        if (t < 0 || t > sigma) throw std::out_of_range("lambda: t outside [0, sigma]");
        const auto it = std::upper_bound(tau.begin(), tau.end(), t);
        return L[static_cast<std::size_t>(it - tau.begin()) - 1];
    }
    std::int64_t N(int ell) const {
        auto it = per_scale.find(ell);
        return it == per_scale.end() ? 0 : it->second.n;
    }
    double H(int ell) const {
        auto it = per_scale.find(ell);
        return it == per_scale.end() ? 0.0 : it->second.h;
    }
    std::int64_t M(int ell) const {
        auto it = per_scale.find(ell);
        return it == per_scale.end() ? 0 : it->second.visits;
    }
};

/// Streaming scale tracker: feed S_0, S_1, ... and read N_l, H_l, M(l).
class ScaleTracker {
public:
    explicit ScaleTracker(std::int64_t s0) { reset(s0); }

    void reset(std::int64_t s0) {
        if (s0 < 1) throw std::invalid_argument("ScaleTracker: start must be positive");
        n_.fill(0);
        visits_.fill(0);
        for (auto& h : h_) h = detail::ReciprocalSum{};
        t_ = 0;
        enter(scale_of(s0));
        changed_ = false;
    }

    /// Records position S_t at the current time t, then advances t. Returns
    /// the scale in force at t (kNoScale once absorbed).
    int push(std::int64_t s) {
        changed_ = false;
        if (s <= 0) {
            if (scale_ != kNoScale) {
                scale_ = kNoScale;
                changed_ = true;
            }
            ++t_;
            return scale_;
        }
        if (!window_.contains(s)) {
            enter(scale_of(s));
            changed_ = true;
        }
        ++n_[static_cast<std::size_t>(scale_)];
        h_[static_cast<std::size_t>(scale_)].add(s);
        ++t_;
        return scale_;
    }

    int scale() const noexcept { return scale_; }
    bool changed() const noexcept { return changed_; }
    std::int64_t time() const noexcept { return t_; }
    std::int64_t N(int ell) const { return n_.at(static_cast<std::size_t>(ell)); }
    double H(int ell) { return h_.at(static_cast<std::size_t>(ell)).value(); }
    std::int64_t M(int ell) const { return visits_.at(static_cast<std::size_t>(ell)); }

private:
    void enter(int ell) {
        if (ell > kMaxScale) throw std::overflow_error("ScaleTracker: position beyond scale 61");
        scale_ = ell;
        window_ = scale_window(ell);
        ++visits_[static_cast<std::size_t>(ell)];
    }

    std::array<std::int64_t, kMaxScale + 1> n_{};
    std::array<std::int64_t, kMaxScale + 1> visits_{};
    std::array<detail::ReciprocalSum, kMaxScale + 1> h_{};
    ScaleWindow window_{1, 4};
    int scale_ = 0;
    bool changed_ = false;
    std::int64_t t_ = 0;
};

/// One linear pass over an uncensored retained path.
inline ScaleDecomposition decompose(const WalkPath& path) {
    if (path.censored) throw std::invalid_argument("decompose: censored path");
    if (!path.full()) throw std::invalid_argument("decompose: path was simulated in summary mode");
    ScaleDecomposition d;
    d.sigma = path.length;
    const auto& S = path.steps;
    int cur = scale_of(S[0]);
    ScaleWindow w = scale_window(cur);
    d.tau.push_back(0);
    d.L.push_back(cur);
    std::map<int, detail::ReciprocalSum> h;
    auto visit = [&](int ell) {
        auto& tally = d.per_scale[ell];
        ++tally.visits;
        tally.visit_index.push_back(d.L.size() - 1);
    };
    visit(cur);
    for (std::int64_t t = 0; t < d.sigma; ++t) {
        const auto s = S[static_cast<std::size_t>(t)];
        if (!w.contains(s)) {
            cur = scale_of(s);
            w = scale_window(cur);
            d.tau.push_back(t);
            d.L.push_back(cur);
            visit(cur);
        }
        ++d.per_scale[cur].n;
        h[cur].add(s);
    }
    d.tau.push_back(d.sigma);
    d.L.push_back(kNoScale);
    for (auto& [ell, acc] : h) d.per_scale[ell].h = acc.value();
    return d;
}

/// Returns an empty string when every decomposition invariant holds on `path`,
/// else a description of the first failure.
inline std::string check_decomposition(const ScaleDecomposition& d, const WalkPath& path) {
    const auto& S = path.steps;
    if (d.tau.empty() || d.tau.front() != 0) return "tau_0 != 0";
    if (d.L.front() != scale_of(S[0])) return "L_0 != floor(log2 S_0)";
    for (std::size_t i = 0; i + 1 < d.tau.size(); ++i) {
        if (d.L[i] == kNoScale) return "interior -infinity scale";
        const auto w = scale_window(d.L[i]);
        for (std::int64_t t = d.tau[i]; t < d.tau[i + 1]; ++t)
            if (!w.contains(S[static_cast<std::size_t>(t)])) return "walk leaves window before change of scale";
        if (d.tau[i + 1] <= d.tau[i]) return "tau not increasing";
        const auto next = d.L[i + 1];
        const auto s = S[static_cast<std::size_t>(d.tau[i + 1])];
        if (next == kNoScale) {
            if (s != 0) return "-infinity scale away from zero";
            continue;
        }
        if (s >= w.hi) {
            if (next < d.L[i] + 2) return "up-move by less than two scales";
        } else if (d.L[i] >= 2) {
            if (next != d.L[i] - 2) return "down-move not by exactly two scales";
            if (s != (std::int64_t{1} << (d.L[i] - 1)) - 1) return "down-move does not land at 2^{L-1} - 1";
        }
    }
    std::int64_t total_n = 0;
    detail::KahanSum total_h;
    for (const auto& [ell, tally] : d.per_scale) {
        total_n += tally.n;
        total_h.add(tally.h);
        const double lo = std::ldexp(tally.h, ell - 1), hi = std::ldexp(tally.h, ell + 2);
        const double n = static_cast<double>(tally.n);
        if (n < lo * (1 - 1e-12) || n > hi * (1 + 1e-12)) return "N_l outside [2^{l-1} H_l, 2^{l+2} H_l]";
    }
    if (total_n != d.sigma) return "sum N_l != sigma";
    if (std::fabs(total_h.value() - path.h_sigma) > 1e-9 * std::max(1.0, path.h_sigma)) return "sum H_l != H(sigma)";
    return {};
}

struct UpcrossingCount {
    std::int64_t x = 0, y = 0;
    std::int64_t count = 0;                 // U(t; [x, y))
    std::vector<std::int64_t> down_times;   // tau_i^-
    std::vector<std::int64_t> up_times;     // tau_i^+
};

/// Completed upcrossings of [x, y) by time t, from the alternation
///   tau_0^- = inf{t >= 0 : S_t < x},  tau_i^+ = inf{t > tau_i^- : S_t >= y},
///   tau_{i+1}^- = inf{t > tau_i^+ : S_t < x}.
inline UpcrossingCount upcrossings(const WalkPath& path, std::int64_t x, std::int64_t y, std::int64_t t) {
    if (!(0 < x && x < y)) throw std::invalid_argument("upcrossings: need 0 < x < y");
    if (!path.full()) throw std::invalid_argument("upcrossings: path was simulated in summary mode");
    if (t < 0 || t > path.length) throw std::out_of_range("upcrossings: t outside [0, length]");
    UpcrossingCount u{x, y, 0, {}, {}};
    bool armed = false;
    for (std::int64_t i = 0; i <= t; ++i) {
        const auto s = path.steps[static_cast<std::size_t>(i)];
        if (!armed && s < x) {
            armed = true;
            u.down_times.push_back(i);
        } else if (armed && s >= y) {
            armed = false;
            u.up_times.push_back(i);
            ++u.count;
        }
    }
    return u;
}

/// Streams upcrossing counts of every dyadic interval [2^j, 2^{j+1}) at once.
class DyadicUpcrossings {
public:
    void push(std::int64_t s) noexcept {
        const int fl = s > 0 ? detail::floor_log2(s) : -1;
        // Below 2^j for all j > fl.
        armed_ |= fl >= 63 ? 0 : ~((std::uint64_t{2} << fl) - 1);
        if (fl >= 1) {
            std::uint64_t done = armed_ & ((std::uint64_t{1} << fl) - 1);  // 2^{j+1} <= s
            armed_ &= ~done;
            while (done) {
                ++counts_[static_cast<std::size_t>(std::countr_zero(done))];
                done &= done - 1;
            }
        }
    }
    /// U for [2^j, 2^{j+1}); j = -1 stands for [1/2, 1), which no path can upcross before absorption.
    std::int64_t count(int j) const { return j < 0 ? 0 : counts_.at(static_cast<std::size_t>(j)); }

private:
    std::uint64_t armed_ = 0;
    std::array<std::int64_t, 64> counts_{};
};

struct UpBoundReport {
    int ell;
    std::int64_t visits;   // M(l)
    std::int64_t u_low;    // U(sigma; [2^{l-1}, 2^l))
    std::int64_t u_high;   // U(sigma; [2^{l+1}, 2^{l+2}))
    std::int64_t slack;    // 1 if the first visit needs no upcrossing, else 0
    bool literal;          // M <= U_low + U_high
    bool holds;            // M <= U_low + U_high + slack
};

/// Visit-count versus upcrossing check for every visited scale. The first
/// visit to l comes for free when l <= L_0 + 1 (the walk starts in or just
/// below that scale); later visits each need one completed upcrossing.
inline std::vector<UpBoundReport> check_up_bd(const ScaleDecomposition& d, const WalkPath& path) {
    DyadicUpcrossings up;
    for (std::int64_t t = 0; t <= path.length; ++t) up.push(path.steps[static_cast<std::size_t>(t)]);
    std::vector<UpBoundReport> out;
    const int l0 = d.L.front();
    for (const auto& [ell, tally] : d.per_scale) {
        UpBoundReport r{ell, tally.visits, up.count(ell - 1), up.count(ell + 1), ell <= l0 + 1 ? 1 : 0, false, false};
        r.literal = r.visits <= r.u_low + r.u_high;
        r.holds = r.visits <= r.u_low + r.u_high + r.slack;
        out.push_back(r);
    }
    return out;
}

namespace detail {

inline void require_lower_bounded(const StepDistribution& nu) {
    if (!(nu.p_minus1() > 0.0)) throw std::invalid_argument("walk trial: need mu(0) > 0");
}

}  // namespace detail

/// Walk from z until it leaves [a, b); true when it exits at or above b.
inline bool exit_interval_trial(const StepDistribution& nu, std::int64_t a, std::int64_t z, std::int64_t b,
                                std::uint64_t seed, std::uint64_t trial) {
    if (!(a <= z && z < b)) throw std::invalid_argument("exit_interval_trial: need a <= z < b");
    detail::require_lower_bounded(nu);
    KeyedStream rng(seed, trial);
    std::int64_t s = z;
    while (s >= a && s < b) s += nu.sample(rng.open_closed());
    return s >= b;
}

/// U(sigma; [x, y)) for the walk from `start`, counted up to `k_max`.
///
/// Every completed upcrossing ends at or above y, after which a walk with
/// nonpositive drift reaches x - 1 almost surely (it is skip-free downwards);
/// the simulation restarts there, which leaves the law of U(sigma) unchanged.
inline std::int64_t upcrossing_trial(const StepDistribution& nu, std::int64_t x, std::int64_t y, std::int64_t start,
                                     std::int64_t k_max, std::uint64_t seed, std::uint64_t trial) {
    if (!(0 < x && x < y)) throw std::invalid_argument("upcrossing_trial: need 0 < x < y");
    if (start < 1) throw std::invalid_argument("upcrossing_trial: start must be positive");
    if (nu.mean() > kCriticalityTol) throw std::invalid_argument("upcrossing_trial: needs a walk with mean <= 0");
    detail::require_lower_bounded(nu);
    KeyedStream rng(seed, trial);
    std::int64_t s = start, u = 0;
    bool armed = s < x;
    if (!armed && s >= y) {
        s = x - 1;
        armed = true;
    }
    while (s > 0 && u < k_max) {
        s += nu.sample(rng.open_closed());
        if (!armed) {
            if (s < x) armed = true;
            else if (s >= y) {
                s = x - 1;
                armed = true;
            }
        } else if (s >= y) {
            ++u;
            s = x - 1;
        }
    }
    return u;
}

/// Exit time of [2^{l-1}, 2^{l+2}) from x, or `cap` if still inside then.
inline std::int64_t exit_time_trial(const StepDistribution& nu, int ell, std::int64_t x, std::int64_t cap,
                                    std::uint64_t seed, std::uint64_t trial) {
    const auto w = scale_window(ell);
    if (!w.contains(x)) throw std::invalid_argument("exit_time_trial: start outside the scale window");
    detail::require_lower_bounded(nu);
    KeyedStream rng(seed, trial);
    std::int64_t s = x, t = 0;
    while (w.contains(s) && t < cap) {
        s += nu.sample(rng.open_closed());
        ++t;
    }
    return t;
}

struct OccupationTrial {
    std::int64_t n_ell = 0;   // N_l, or a lower bound when stopped early
    double h_ell = 0.0;       // H_l likewise
    bool reached = false;     // stopped because N_l reached the stop level
    bool censored = false;    // step cap hit before sigma
};

/// Occupation time and harmonic mass of scale l for the walk from z, stopped
/// once N_l >= stop_at or after step_cap steps.
inline OccupationTrial occupation_trial(const StepDistribution& nu, int ell, std::int64_t z, std::int64_t stop_at,
                                        std::int64_t step_cap, std::uint64_t seed, std::uint64_t trial) {
    detail::require_lower_bounded(nu);
    KeyedStream rng(seed, trial);
    ScaleTracker tr(z);
    std::int64_t s = z;
    OccupationTrial out;
    while (s > 0 && tr.time() < step_cap) {
        tr.push(s);
        if (tr.N(ell) >= stop_at) {
            out.reached = true;
            break;
        }
        s += nu.sample(rng.open_closed());
    }
    out.n_ell = tr.N(ell);
    out.h_ell = tr.H(ell);
    out.censored = !out.reached && s > 0;
    return out;
}

/// H(min(s, sigma)) for the walk from 1.
inline double harmonic_until(const StepDistribution& nu, std::int64_t s_max, std::uint64_t seed,
                             std::uint64_t trial) {
    detail::require_lower_bounded(nu);
    KeyedStream rng(seed, trial);
    detail::ReciprocalSum h;
    std::int64_t s = 1;
    for (std::int64_t t = 0; t < s_max && s > 0; ++t) {
        h.add(s);
        s += nu.sample(rng.open_closed());
    }
    return h.value();
}

}  // namespace gwtails
