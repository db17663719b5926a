#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "detail/numeric.hpp"

namespace gwtails {

enum class Family { finite, geometric, poisson, power };
enum class Criticality { subcritical, critical, supercritical };

inline const char* to_string(Criticality c) {
    switch (c) {
        case Criticality::subcritical: return "subcritical";
        case Criticality::critical: return "critical";
        case Criticality::supercritical: return "supercritical";
    }
    return "?";
}

inline const char* to_string(Family f) {
    switch (f) {
        case Family::finite: return "finite";
        case Family::geometric: return "geometric";
        case Family::poisson: return "poisson";
        case Family::power: return "power";
    }
    return "?";
}

/// Thrown when a requested law cannot exist (e.g. a power tail whose
/// normalisation would need a negative mass at zero).
class InfeasibleLaw : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline constexpr double kCriticalityTol = 1e-12;
inline constexpr double kMassTol = 1e-12;

/// Target mean for the power-tail constructor. An empty `mean` means critical.
struct PowerTarget {
    std::optional<double> mean;
    static PowerTarget critical() { return {}; }
    static PowerTarget subcritical(double m) { return {m}; }
};

/// An offspring law mu on the nonnegative integers. Immutable; copies share
/// their tables.
class OffspringDistribution {
public:
    static OffspringDistribution finite(std::vector<double> atoms);
    static OffspringDistribution finite(const std::map<std::int64_t, double>& atoms);
    /// mu(i) = p (1-p)^i.
    static OffspringDistribution geometric(double p);
    static OffspringDistribution poisson(double mean);
    /// mu(i) = c i^{-(alpha+1)} for i >= 1, mu(0) = 1 - sum_{i>=1} mu(i),
    /// with c fixed by the target mean.
    static OffspringDistribution power_tail(double alpha, PowerTarget target);

    Family family() const noexcept { return impl_->family; }

    double pmf(std::int64_t i) const;
    /// mu([i, infinity)).
    double tail(std::int64_t i) const;
    double p0() const { return pmf(0); }
    double p1() const { return pmf(1); }

    double mean() const noexcept { return impl_->mean; }
    /// Variance; +infinity for the power family.
    double variance() const noexcept { return impl_->variance; }
    /// sum_i i(i-1) mu(i).
    double factorial_moment2() const noexcept { return impl_->fact2; }
    double pgf(double s) const;

    /// Largest atom index for finite support, nullopt otherwise.
    std::optional<std::int64_t> support_max() const {
        if (impl_->family == Family::finite) return static_cast<std::int64_t>(impl_->atoms.size()) - 1;
        return std::nullopt;
    }
    /// Finite-support atoms (empty for parametric families).
    const std::vector<double>& atoms() const noexcept { return impl_->atoms; }

    double param() const noexcept { return impl_->param; }  // p, lambda or alpha
    double power_constant() const noexcept { return impl_->c; }
    /// sup_{1 <= i <= 10^6} i^alpha tail(i) for the power family, NaN otherwise.
    double tail_constant() const;

    /// Inversion sampling: smallest i with tail(i+1) < w, for w in (0, 1].
    std::int64_t sample(double w) const {
        const auto& T = impl_->tails;
        // T[0] = 1 >= w always; look for the first index j >= 1 with T[j] < w.
        const std::size_t n = T.size();
        if (n <= 9) {
            // T is nonincreasing, so the count of T[j] >= w is the answer.
            std::size_t j = 0;
            for (std::size_t k = 1; k < n; ++k) j += T[k] >= w;
            if (j + 1 < n) return static_cast<std::int64_t>(j);
        } else {
            auto it = std::partition_point(T.begin() + 1, T.end(), [w](double t) { return t >= w; });
            if (it != T.end()) return static_cast<std::int64_t>(it - T.begin()) - 1;
        }
        return sample_far(w);
    }

    nlohmann::json to_json() const;
    static OffspringDistribution from_json(const nlohmann::json& spec);
    std::string describe() const { return to_json().dump(); }

private:
    struct Impl {
        Family family = Family::finite;
        std::vector<double> atoms;  // finite only
        double param = 0.0;
        double c = 0.0;             // power constant
        double mean = 0.0;
        double variance = 0.0;
        double fact2 = 0.0;
        std::vector<double> tails;  // tails[i] = mu([i, inf)), tails[0] = 1
        std::optional<PowerTarget> target;
        mutable std::once_flag tail_const_once;
        mutable double tail_const = std::nan("");
    };

    explicit OffspringDistribution(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    std::int64_t sample_far(double w) const;

    std::shared_ptr<const Impl> impl_;
};

// ---------------------------------------------------------------------------

namespace detail {

inline double poisson_pmf(double lambda, std::int64_t i) {
    if (i < 0) return 0.0;
    if (lambda == 0.0) return i == 0 ? 1.0 : 0.0;
    return std::exp(-lambda + static_cast<double>(i) * std::log(lambda) - std::lgamma(static_cast<double>(i) + 1.0));
}

// Power family tail mass c * zeta(alpha + 1, i) for i >= 1.
inline double power_tail_mass(double c, double alpha, std::int64_t i) {
    return c * hurwitz_zeta(alpha + 1.0, static_cast<double>(i));
}

inline constexpr std::int64_t kPowerTableSize = 1 << 16;
inline constexpr double kNegligibleTail = 0x1.0p-60;

}  // namespace detail

inline OffspringDistribution OffspringDistribution::finite(std::vector<double> atoms) {
    while (!atoms.empty() && atoms.back() == 0.0) atoms.pop_back();
    if (atoms.empty()) throw std::invalid_argument("finite law: no atoms");
    detail::KahanSum total, m1, m2, f2;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const double p = atoms[i];
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("finite law: negative or non-finite atom");
        const double x = static_cast<double>(i);
        total.add(p);
        m1.add(x * p);
        m2.add(x * x * p);
        f2.add(x * (x - 1.0) * p);
    }
    if (std::fabs(total.value() - 1.0) > kMassTol) throw std::invalid_argument("finite law: atoms do not sum to 1");
    auto impl = std::make_shared<Impl>();
    impl->family = Family::finite;
    impl->mean = m1.value();
    impl->variance = m2.value() - impl->mean * impl->mean;
    impl->fact2 = f2.value();
    impl->tails.assign(atoms.size() + 1, 0.0);
    detail::KahanSum suffix;
    for (std::size_t i = atoms.size(); i-- > 0;) {
        suffix.add(atoms[i]);
        impl->tails[i] = suffix.value();
    }
    impl->tails[0] = 1.0;
    impl->atoms = std::move(atoms);
    return OffspringDistribution(std::move(impl));
}

inline OffspringDistribution OffspringDistribution::finite(const std::map<std::int64_t, double>& atoms) {
    if (atoms.empty()) throw std::invalid_argument("finite law: no atoms");
    if (atoms.begin()->first < 0) throw std::invalid_argument("finite law: negative index");
    const auto top = atoms.rbegin()->first;
    if (top > (1 << 24)) throw std::invalid_argument("finite law: support too large");
    std::vector<double> dense(static_cast<std::size_t>(top) + 1, 0.0);
    for (const auto& [i, p] : atoms) dense[static_cast<std::size_t>(i)] = p;
    return finite(std::move(dense));
}

inline OffspringDistribution OffspringDistribution::geometric(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("geometric law: need p in (0, 1]");
    auto impl = std::make_shared<Impl>();
    impl->family = Family::geometric;
    impl->param = p;
    const double r = 1.0 - p;
    impl->mean = r / p;
    impl->variance = r / (p * p);
    impl->fact2 = 2.0 * r * r / (p * p);
    impl->tails.push_back(1.0);
    for (std::int64_t i = 1;; ++i) {
        const double t = std::pow(r, static_cast<double>(i));
        impl->tails.push_back(t);
        if (t < detail::kNegligibleTail) break;
    }
    return OffspringDistribution(std::move(impl));
}

inline OffspringDistribution OffspringDistribution::poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("poisson law: need mean >= 0");
    auto impl = std::make_shared<Impl>();
    impl->family = Family::poisson;
    impl->param = lambda;
    impl->mean = lambda;
    impl->variance = lambda;
    impl->fact2 = lambda * lambda;
    std::vector<double> pm;
    for (std::int64_t i = 0;; ++i) {
        const double p = detail::poisson_pmf(lambda, i);
        pm.push_back(p);
        if (static_cast<double>(i) > lambda + 1.0 && p < detail::kNegligibleTail * 1e-3) break;
    }
    impl->tails.assign(pm.size() + 1, 0.0);
    detail::KahanSum suffix;
    for (std::int64_t k = static_cast<std::int64_t>(pm.size());; ++k) {
        const double p = detail::poisson_pmf(lambda, k);
        suffix.add(p);
        if (p < 1e-300 || p < suffix.value() * 1e-18) break;
    }
    impl->tails[pm.size()] = suffix.value();
    for (std::size_t i = pm.size(); i-- > 0;) {
        suffix.add(pm[i]);
        impl->tails[i] = suffix.value();
    }
    impl->tails[0] = 1.0;
    return OffspringDistribution(std::move(impl));
}

inline OffspringDistribution OffspringDistribution::power_tail(double alpha, PowerTarget target) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw std::invalid_argument("power law: need alpha in (1, 2]");
    const double m = target.mean.value_or(1.0);
    if (!(m > 0.0 && m <= 1.0)) throw std::invalid_argument("power law: target mean must lie in (0, 1]");
    // mean = c zeta(alpha), mass above zero = c zeta(alpha + 1).
    const double c = m / detail::riemann_zeta(alpha);
    const double above = c * detail::riemann_zeta(alpha + 1.0);
    if (above > 1.0) throw InfeasibleLaw("power law: target mean forces mu(0) < 0");
    auto impl = std::make_shared<Impl>();
    impl->family = Family::power;
    impl->param = alpha;
    impl->c = c;
    impl->target = target;
    impl->mean = c * detail::riemann_zeta(alpha);
    impl->variance = detail::kInf;
    impl->fact2 = detail::kInf;
    impl->tails.resize(detail::kPowerTableSize + 1);
    impl->tails[0] = 1.0;
    // Downward accumulation from an exact zeta anchor keeps relative accuracy.
    double t = detail::power_tail_mass(c, alpha, detail::kPowerTableSize);
    impl->tails[detail::kPowerTableSize] = t;
    for (std::int64_t i = detail::kPowerTableSize - 1; i >= 1; --i) {
        t += c * std::pow(static_cast<double>(i), -(alpha + 1.0));
        impl->tails[static_cast<std::size_t>(i)] = t;
    }
    return OffspringDistribution(std::move(impl));
}

inline double OffspringDistribution::pmf(std::int64_t i) const {
    if (i < 0) return 0.0;
    switch (impl_->family) {
        case Family::finite:
            return i < static_cast<std::int64_t>(impl_->atoms.size()) ? impl_->atoms[static_cast<std::size_t>(i)] : 0.0;
        case Family::geometric:
            return impl_->param * std::pow(1.0 - impl_->param, static_cast<double>(i));
        case Family::poisson:
            return detail::poisson_pmf(impl_->param, i);
        case Family::power:
            if (i == 0) return 1.0 - impl_->c * detail::riemann_zeta(impl_->param + 1.0);
            return impl_->c * std::pow(static_cast<double>(i), -(impl_->param + 1.0));
    }
    return 0.0;
}

inline double OffspringDistribution::tail(std::int64_t i) const {
    if (i <= 0) return 1.0;
    const auto& T = impl_->tails;
    if (i < static_cast<std::int64_t>(T.size())) return T[static_cast<std::size_t>(i)];
    switch (impl_->family) {
        case Family::finite: return 0.0;
        case Family::geometric: return std::pow(1.0 - impl_->param, static_cast<double>(i));
        case Family::poisson: {
            detail::KahanSum acc;
            for (std::int64_t k = i;; ++k) {
                const double p = detail::poisson_pmf(impl_->param, k);
                acc.add(p);
                if (p < 1e-300 || p < acc.value() * 1e-18) break;
            }
            return acc.value();
        }
        case Family::power: return detail::power_tail_mass(impl_->c, impl_->param, i);
    }
    return 0.0;
}

inline std::int64_t OffspringDistribution::sample_far(double w) const {
    // w is below every tabulated tail.
    std::int64_t lo = static_cast<std::int64_t>(impl_->tails.size()) - 1;  // tail(lo) >= w
    std::int64_t hi = lo * 2;
    while (tail(hi) >= w) {
        lo = hi;
        hi *= 2;
    }
    // tail(lo) >= w > tail(hi): the answer i satisfies i + 1 = first index with tail < w.
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (tail(mid) >= w) lo = mid;
        else hi = mid;
    }
    return hi - 1;
}

inline double OffspringDistribution::pgf(double s) const {
    if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("pgf: argument outside [0, 1]");
    switch (impl_->family) {
        case Family::finite: {
            double acc = 0.0;
            for (std::size_t i = impl_->atoms.size(); i-- > 0;) acc = acc * s + impl_->atoms[i];
            return acc;
        }
        case Family::geometric: {
            const double p = impl_->param;
            return p / (1.0 - (1.0 - p) * s);
        }
        case Family::poisson: return std::exp(impl_->param * (s - 1.0));
        case Family::power: {
            if (s == 1.0) return 1.0;
            const double alpha = impl_->param;
            const double c = impl_->c;
            if (s == 0.0) return pmf(0);
            // Direct series until s^N is negligible, then bound the remainder
            // by s^{N+1} zeta(alpha+1, N+1).
            const std::int64_t n_max = std::min<std::int64_t>(
                1000000, static_cast<std::int64_t>(std::ceil(45.0 / -std::log(s))) + 1);
            detail::KahanSum acc;
            acc.add(pmf(0));
            double sp = 1.0;
            for (std::int64_t i = 1; i <= n_max; ++i) {
                sp *= s;
                acc.add(c * std::pow(static_cast<double>(i), -(alpha + 1.0)) * sp);
            }
            acc.add(c * sp * s * detail::hurwitz_zeta(alpha + 1.0, static_cast<double>(n_max + 1)));
            return acc.value();
        }
    }
    return 0.0;
}

inline double OffspringDistribution::tail_constant() const {
    if (impl_->family != Family::power) return std::nan("");
    std::call_once(impl_->tail_const_once, [this] {
        const double alpha = impl_->param;
        const double c = impl_->c;
        constexpr std::int64_t kScan = 1000000;
        double t = detail::power_tail_mass(c, alpha, kScan);
        double best = std::pow(static_cast<double>(kScan), alpha) * t;
        for (std::int64_t i = kScan - 1; i >= 1; --i) {
            t += c * std::pow(static_cast<double>(i), -(alpha + 1.0));
            best = std::max(best, std::pow(static_cast<double>(i), alpha) * t);
        }
        impl_->tail_const = best;
    });
    return impl_->tail_const;
}

inline nlohmann::json OffspringDistribution::to_json() const {
    nlohmann::json j;
    switch (impl_->family) {
        case Family::finite: {
            j["family"] = "finite";
            nlohmann::json pm = nlohmann::json::object();
            for (std::size_t i = 0; i < impl_->atoms.size(); ++i)
                if (impl_->atoms[i] > 0.0) pm[std::to_string(i)] = impl_->atoms[i];
            j["pmf"] = pm;
            break;
        }
        case Family::geometric:
            j["family"] = "geometric";
            j["p"] = impl_->param;
            break;
        case Family::poisson:
            j["family"] = "poisson";
            j["mean"] = impl_->param;
            break;
        case Family::power:
            j["family"] = "power";
            j["alpha"] = impl_->param;
            if (impl_->target && impl_->target->mean) {
                j["target"] = "subcritical";
                j["mean"] = *impl_->target->mean;
            } else {
                j["target"] = "critical";
            }
            break;
    }
    return j;
}

inline OffspringDistribution OffspringDistribution::from_json(const nlohmann::json& spec) {
    if (!spec.is_object() || !spec.contains("family")) throw std::invalid_argument("distribution spec: missing \"family\"");
    const auto family = spec.at("family").get<std::string>();
    if (family == "finite") {
        std::map<std::int64_t, double> atoms;
        for (const auto& [k, v] : spec.at("pmf").items()) {
            std::size_t pos = 0;
            const long long idx = std::stoll(k, &pos);
            if (pos != k.size()) throw std::invalid_argument("distribution spec: bad pmf key \"" + k + "\"");
            atoms[idx] = v.get<double>();
        }
        return finite(atoms);
    }
    if (family == "geometric") return geometric(spec.at("p").get<double>());
    if (family == "poisson") return poisson(spec.at("mean").get<double>());
    if (family == "power") {
        const double alpha = spec.at("alpha").get<double>();
        const auto target = spec.value("target", std::string("critical"));
        if (target == "critical") return power_tail(alpha, PowerTarget::critical());
        if (target == "subcritical") return power_tail(alpha, PowerTarget::subcritical(spec.at("mean").get<double>()));
        throw std::invalid_argument("distribution spec: unknown power target \"" + target + "\"");
    }
    throw std::invalid_argument("distribution spec: unknown family \"" + family + "\"");
}

// ---------------------------------------------------------------------------

inline Criticality classify(const OffspringDistribution& d) {
    const double m = d.mean();
    if (std::fabs(m - 1.0) <= kCriticalityTol) return Criticality::critical;
    return m < 1.0 ? Criticality::subcritical : Criticality::supercritical;
}

/// Smallest fixed point of the pgf on [0, 1].
inline double extinction_probability(const OffspringDistribution& d) {
    if (classify(d) != Criticality::supercritical) return 1.0;
    double s = 0.0;
    for (int it = 0; it < 10000000; ++it) {
        const double next = d.pgf(s);
        const bool done = std::fabs(next - s) < 1e-14;
        s = next;
        if (done) break;
    }
    if (s == 0.0) return 0.0;
    // Polish: f(x) - x changes sign from + to - across q.
    auto g = [&](double x) { return d.pgf(x) - x; };
    double lo = s;
    while (lo > 0.0 && g(lo) < 0.0) lo = std::max(0.0, lo - 1e-12);
    double step = 1e-12;
    double hi = std::min(1.0, s + step);
    while (g(hi) >= 0.0 && hi < 1.0) {
        step *= 2.0;
        hi = std::min(1.0, s + step);
    }
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) >= 0.0) lo = mid;
        else hi = mid;
    }
    return lo;
}

/// The law conditioned on extinction: mu_hat(i) = mu(i) q^{i-1}.
inline OffspringDistribution dual(const OffspringDistribution& d) {
    if (classify(d) != Criticality::supercritical) return d;
    if (d.p0() <= 0.0) throw std::domain_error("dual: supercritical law with mu(0) = 0 has no finite trees");
    const double q = extinction_probability(d);
    switch (d.family()) {
        case Family::finite: {
            std::vector<double> atoms(d.atoms().size());
            for (std::size_t i = 0; i < atoms.size(); ++i)
                atoms[i] = d.atoms()[i] * std::pow(q, static_cast<double>(i) - 1.0);
            return OffspringDistribution::finite(std::move(atoms));
        }
        case Family::geometric: {
            // p (1-p)^i q^{i-1} = (p/q) ((1-p) q)^i, a geometric law with ratio (1-p) q.
            return OffspringDistribution::geometric(1.0 - (1.0 - d.param()) * q);
        }
        case Family::poisson:
            return OffspringDistribution::poisson(d.param() * q);
        case Family::power:
            break;
    }
    throw std::logic_error("dual: power family is never supercritical");
}

/// Step law nu(i) = mu(i + 1) on {-1, 0, 1, ...}.
class StepDistribution {
public:
    explicit StepDistribution(OffspringDistribution mu) : mu_(std::move(mu)) {}

    const OffspringDistribution& offspring() const noexcept { return mu_; }
    double pmf(std::int64_t j) const { return j < -1 ? 0.0 : mu_.pmf(j + 1); }
    /// nu([j, infinity)).
    double tail(std::int64_t j) const { return j <= -1 ? 1.0 : mu_.tail(j + 1); }
    double mean() const noexcept { return mu_.mean() - 1.0; }
    double variance() const noexcept { return mu_.variance(); }
    double p_minus1() const { return mu_.p0(); }
    double p_zero() const { return mu_.p1(); }
    std::optional<std::int64_t> support_max() const {
        auto m = mu_.support_max();
        if (m) return *m - 1;
        return std::nullopt;
    }
    std::int64_t sample(double w) const { return mu_.sample(w) - 1; }

private:
    OffspringDistribution mu_;
};

inline StepDistribution step_distribution(const OffspringDistribution& d) { return StepDistribution(d); }

/// Named laws used by the CLI and the test suites.
inline std::vector<std::string> catalog_names() {
    return {"binary", "geometric", "poisson", "power1.5", "var4", "binary-super"};
}

inline OffspringDistribution catalog_law(const std::string& name) {
    if (name == "binary") return OffspringDistribution::finite(std::map<std::int64_t, double>{{0, 0.5}, {2, 0.5}});
    if (name == "geometric") return OffspringDistribution::geometric(0.5);
    if (name == "poisson") return OffspringDistribution::poisson(1.0);
    if (name == "power1.5") return OffspringDistribution::power_tail(1.5, PowerTarget::critical());
    if (name == "var4") return OffspringDistribution::finite(std::map<std::int64_t, double>{{0, 0.8}, {5, 0.2}});
    if (name == "binary-super") return OffspringDistribution::finite(std::map<std::int64_t, double>{{0, 0.25}, {2, 0.75}});
    throw std::invalid_argument("unknown catalog law \"" + name + "\"");
}

}  // namespace gwtails
