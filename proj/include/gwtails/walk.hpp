#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "detail/numeric.hpp"
#include "offspring.hpp"
#include "rng.hpp"
#include "treegen.hpp"

namespace gwtails {

inline constexpr std::int64_t kDefaultStepCap = 100'000'000;

enum class Retain { summary, full };

/// A realised Lukasiewicz walk from S_0 until it hits zero or the step cap.
struct WalkPath {
    std::int64_t start = 1;
    std::int64_t length = 0;  // sigma when not censored, else the step cap
    bool censored = false;
    std::int64_t max_s = 0;   // max_{t < length} S_t
    double h_sigma = 0.0;     // sum_{t < length} 1/S_t
    std::vector<std::int64_t> steps;  // S_0 .. S_length when retained

    bool full() const noexcept { return !steps.empty(); }
    std::int64_t sigma() const {
        if (censored) throw std::logic_error("WalkPath: censored path has no sigma");
        return length;
    }

    /// Wraps an explicit trajectory; it is censored unless it ends at zero.
    static WalkPath from_steps(std::vector<std::int64_t> s) {
        if (s.empty()) throw std::invalid_argument("WalkPath: empty trajectory");
        WalkPath p;
        p.start = s.front();
        p.length = static_cast<std::int64_t>(s.size()) - 1;
        detail::ReciprocalSum h;
        for (std::int64_t t = 0; t < p.length; ++t) {
            const auto v = s[static_cast<std::size_t>(t)];
            if (v <= 0) throw std::invalid_argument("WalkPath: trajectory touches zero before its end");
            if (s[static_cast<std::size_t>(t) + 1] - v < -1) throw std::invalid_argument("WalkPath: step below -1");
            h.add(v);
            p.max_s = std::max(p.max_s, v);
        }
        p.censored = s.back() != 0;
        p.h_sigma = h.value();
        p.steps = std::move(s);
        return p;
    }
};

/// Runs the walk with steps nu from `start` on stream (seed, trial).
inline WalkPath simulate(const StepDistribution& nu, std::uint64_t seed, std::uint64_t trial,
                         std::int64_t step_cap = kDefaultStepCap, Retain retain = Retain::summary,
                         std::int64_t start = 1) {
    if (step_cap < 1) throw std::invalid_argument("simulate: step_cap must be >= 1");
    if (start < 1) throw std::invalid_argument("simulate: start must be positive");
    if (!(nu.p_minus1() > 0.0)) throw std::invalid_argument("simulate: need mu(0) > 0");
    KeyedStream rng(seed, trial);
    WalkPath p;
    p.start = start;
    detail::ReciprocalSum h;
    std::int64_t s = start, t = 0, max_s = start;
    if (retain == Retain::full) p.steps.push_back(s);
    while (s > 0 && t < step_cap) {
        h.add(s);
        if (s > max_s) max_s = s;
        s += nu.sample(rng.open_closed());
        ++t;
        if (retain == Retain::full) p.steps.push_back(s);
    }
    p.length = t;
    p.censored = s > 0;
    p.max_s = max_s;
    p.h_sigma = h.value();
    return p;
}

/// H(t) = sum_{i < t} 1/S_i on a retained trajectory.
inline double harmonic(const WalkPath& path, std::int64_t t) {
    if (!path.full()) throw std::invalid_argument("harmonic: path was simulated in summary mode");
    if (t < 0 || t > path.length) throw std::out_of_range("harmonic: t outside [0, length]");
    detail::ReciprocalSum h;
    for (std::int64_t i = 0; i < t; ++i) h.add(path.steps[static_cast<std::size_t>(i)]);
    return h.value();
}

struct RatioStatistics {
    double h_over_sqrt;    // H(sigma) / sigma^{1/2}
    double h_over_stable;  // H(sigma) / sigma^{(alpha-1)/alpha}
    std::int64_t sigma;
    std::int64_t max_s;
};

inline RatioStatistics ratio_statistics(const WalkPath& path, double alpha = 2.0) {
    if (path.censored) throw std::invalid_argument("ratio_statistics: censored path");
    if (!(alpha > 1.0 && alpha <= 2.0)) throw std::invalid_argument("ratio_statistics: alpha must lie in (1, 2]");
    const double sigma = static_cast<double>(path.length);
    return {path.h_sigma / std::sqrt(sigma), path.h_sigma / std::pow(sigma, (alpha - 1.0) / alpha), path.length,
            path.max_s};
}

}  // namespace gwtails
