#pragma once

#include <cstdint>

namespace gwtails {

/// Counter-based random stream keyed by (seed, trial).
///
/// The algorithm is fixed so that independent implementations reproduce the
/// same draws bit for bit:
///
///     mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///              return z ^ (z >> 31)
///
///     state_0  = mix(seed ^ mix(trial ^ 0xD1B54A32D192ED03))
///     next():    state += 0x9E3779B97F4A7C15; return mix(state)
///
/// All arithmetic is modulo 2^64. A uniform double in (0, 1] is
/// ((next() >> 11) + 1) * 2^-53.
class KeyedStream {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kTrialSalt = 0xD1B54A32D192ED03ULL;

    KeyedStream(std::uint64_t seed, std::uint64_t trial) noexcept
        : state_(mix(seed ^ mix(trial ^ kTrialSalt))) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() noexcept {
        state_ += kGamma;
        return mix(state_);
    }

    /// Uniform on (0, 1]; never returns zero, so it can be compared against
    /// tail probabilities directly.
    double open_closed() noexcept {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

}  // namespace gwtails
