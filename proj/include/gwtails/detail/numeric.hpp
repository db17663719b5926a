#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>

namespace gwtails::detail {

/// Neumaier-compensated accumulator.
class KahanSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    KahanSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    void merge(const KahanSum& other) noexcept {
        add(other.sum_);
        add(other.comp_);
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
    KahanSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

/// Hurwitz zeta  sum_{k>=0} (a+k)^{-s}  for s > 1, a > 0, by Euler-Maclaurin
/// with ten explicit terms and six Bernoulli corrections.
inline double hurwitz_zeta(double s, double a) {
    if (!(s > 1.0) || !(a > 0.0)) throw std::domain_error("hurwitz_zeta: need s > 1, a > 0");
    // B_{2j} / (2j)!
    static constexpr std::array<double, 7> kB = {
        1.0 / 12.0,           -1.0 / 720.0,           1.0 / 30240.0,
        -1.0 / 1209600.0,     1.0 / 47900160.0,       -691.0 / 1307674368000.0,
        1.0 / 74724249600.0};
    constexpr int kDirect = 10;
    KahanSum acc;
    for (int k = 0; k < kDirect; ++k) acc.add(std::pow(a + k, -s));
    const double x = a + kDirect;
    acc.add(std::pow(x, 1.0 - s) / (s - 1.0));
    acc.add(0.5 * std::pow(x, -s));
    // Correction terms B_{2j}/(2j)! * s(s+1)...(s+2j-2) * x^{-s-2j+1}
    double rising = s;
    double xpow = std::pow(x, -s - 1.0);
    const double inv_x2 = 1.0 / (x * x);
    for (std::size_t j = 0; j < kB.size(); ++j) {
        acc.add(kB[j] * rising * xpow);
        rising *= (s + 2.0 * j + 1.0) * (s + 2.0 * j + 2.0);
        xpow *= inv_x2;
    }
    return acc.value();
}

inline double riemann_zeta(double s) { return hurwitz_zeta(s, 1.0); }

constexpr double kInf = std::numeric_limits<double>::infinity();

/// floor(log2(v)) for v >= 1.
inline int floor_log2(std::int64_t v) noexcept {
    return 63 - __builtin_clzll(static_cast<unsigned long long>(v));
}

}  // namespace gwtails::detail
