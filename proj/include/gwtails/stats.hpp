#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace gwtails {

inline constexpr double kWilsonZ = 1.959964;

struct TailEstimate {
    double p_hat;
    double lo;
    double hi;
    double half_width() const noexcept { return 0.5 * (hi - lo); }
};

/// Point estimate and 95% Wilson score interval for hits out of trials.
inline TailEstimate estimate_tail(std::uint64_t hits, std::uint64_t trials) {
    if (trials == 0) throw std::invalid_argument("estimate_tail: trials must be positive");
    if (hits > trials) throw std::invalid_argument("estimate_tail: hits exceed trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(hits) / n;
    const double z2 = kWilsonZ * kWilsonZ;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = kWilsonZ * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    double lo = centre - half, hi = centre + half;
    // Clamp rounding so that lo <= p_hat <= hi and the ends are exact at 0 and 1.
    if (hits == 0) lo = 0.0;
    if (hits == trials) hi = 1.0;
    lo = std::fmax(0.0, std::fmin(lo, p));
    hi = std::fmin(1.0, std::fmax(hi, p));
    return {p, lo, hi};
}

}  // namespace gwtails
