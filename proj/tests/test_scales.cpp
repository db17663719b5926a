#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "gwtails/scales.hpp"
#include "gwtails/stats.hpp"
#include "gwtails/walk.hpp"

using namespace gwtails;

namespace {

StepDistribution steps(std::map<std::int64_t, double> mu) { return step_distribution(OffspringDistribution::finite(mu)); }

}  // namespace

TEST(ScaleWindow, Boundaries) {
    EXPECT_EQ(scale_window(0).lo, 1);
    EXPECT_EQ(scale_window(0).hi, 4);
    EXPECT_EQ(scale_window(3).lo, 4);
    EXPECT_EQ(scale_window(3).hi, 32);
    EXPECT_EQ(scale_of(1), 0);
    EXPECT_EQ(scale_of(7), 2);
    EXPECT_EQ(scale_of(8), 3);
    EXPECT_EQ(scale_of(0), kNoScale);
    EXPECT_THROW(scale_window(-1), std::out_of_range);
}

TEST(Decompose, ImmediateAbsorption) {
    const auto p = WalkPath::from_steps({1, 0});
    const auto d = decompose(p);
    EXPECT_EQ(d.tau, (std::vector<std::int64_t>{0, 1}));
    EXPECT_EQ(d.L, (std::vector<int>{0, kNoScale}));
    EXPECT_EQ(d.N(0), 1);
    EXPECT_EQ(check_decomposition(d, p), "");
    EXPECT_EQ(d.lambda(0), 0);
    EXPECT_EQ(d.lambda(1), kNoScale);
}

TEST(Decompose, HandTrace) {
    const auto p = WalkPath::from_steps({1, 2, 5, 4, 3, 2, 1, 0});
    const auto d = decompose(p);
    ASSERT_GE(d.tau.size(), 2u);
    EXPECT_EQ(d.L[0], 0);
    EXPECT_EQ(d.tau[1], 2);
    EXPECT_EQ(d.L[1], 2);
    // [2, 16) holds 5, 4, 3, 2; then 1 leaves it for scale 0.
    EXPECT_EQ(d.tau[2], 6);
    EXPECT_EQ(d.L[2], 0);
    EXPECT_EQ(d.M(0), 2);
    EXPECT_EQ(d.N(0), 3);
    EXPECT_EQ(d.N(2), 4);
    EXPECT_EQ(check_decomposition(d, p), "");
}

TEST(Decompose, RejectsCensoredOrSummary) {
    EXPECT_THROW(decompose(WalkPath::from_steps({1, 2})), std::invalid_argument);
    const auto s = simulate(steps({{0, 0.5}, {2, 0.5}}), 1, 0);
    EXPECT_THROW(decompose(s), std::invalid_argument);
}

TEST(Decompose, InvariantsOnSampledPaths) {
    for (const auto& name : {"binary", "power1.5"}) {
        const auto nu = step_distribution(catalog_law(name));
        for (std::uint64_t i = 0; i < 20000; ++i) {
            const auto p = simulate(nu, 3, i, 200000, Retain::full);
            if (p.censored) continue;
            const auto d = decompose(p);
            ASSERT_EQ(check_decomposition(d, p), "") << name << " trial " << i;
            for (const auto& r : check_up_bd(d, p)) ASSERT_TRUE(r.holds) << name << " trial " << i << " scale " << r.ell;
        }
    }
}

TEST(ScaleTracker, MatchesDecomposition) {
    const auto nu = step_distribution(catalog_law("geometric"));
    for (std::uint64_t i = 0; i < 3000; ++i) {
        const auto p = simulate(nu, 5, i, 200000, Retain::full);
        if (p.censored) continue;
        const auto d = decompose(p);
        ScaleTracker tr(p.steps[0]);
        for (std::int64_t t = 0; t < p.length; ++t) tr.push(p.steps[static_cast<std::size_t>(t)]);
        for (const auto& [ell, tally] : d.per_scale) {
            ASSERT_EQ(tr.N(ell), tally.n);
            ASSERT_EQ(tr.M(ell), tally.visits);
            ASSERT_NEAR(tr.H(ell), tally.h, 1e-12);
        }
    }
}

TEST(Upcrossings, Examples) {
    const auto p = WalkPath::from_steps({5, 4, 3, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0});
    const auto u = upcrossings(p, 4, 8, 12);
    EXPECT_EQ(u.count, 1);
    EXPECT_EQ(u.down_times, (std::vector<std::int64_t>{2, 9}));
    EXPECT_EQ(u.up_times, (std::vector<std::int64_t>{3}));
    EXPECT_EQ(upcrossings(p, 4, 8, 2).count, 0);
    EXPECT_EQ(upcrossings(WalkPath::from_steps({9, 8, 7, 6, 5, 4, 3, 2, 1, 0}), 4, 8, 9).count, 0);
    EXPECT_THROW(upcrossings(p, 8, 4, 4), std::invalid_argument);
    EXPECT_THROW(upcrossings(p, 0, 4, 4), std::invalid_argument);
}

TEST(Upcrossings, MonotoneInTimeAndDyadicAgree) {
    const auto nu = step_distribution(catalog_law("binary"));
    for (std::uint64_t i = 0; i < 500; ++i) {
        const auto p = simulate(nu, 2, i, 100000, Retain::full);
        if (p.censored) continue;
        std::int64_t prev = 0;
        for (std::int64_t t = 0; t <= p.length; t += std::max<std::int64_t>(1, p.length / 16)) {
            const auto c = upcrossings(p, 2, 4, t).count;
            ASSERT_GE(c, prev);
            prev = c;
        }
        DyadicUpcrossings up;
        for (auto s : p.steps) up.push(s);
        for (int j = 0; j < 12; ++j)
            ASSERT_EQ(up.count(j), upcrossings(p, std::int64_t{1} << j, std::int64_t{2} << j, p.length).count);
    }
}

TEST(UpBound, UnvisitedScaleTrivial) {
    const auto p = WalkPath::from_steps({1, 0});
    const auto r = check_up_bd(decompose(p), p);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].ell, 0);
    EXPECT_EQ(r[0].visits, 1);
    EXPECT_EQ(r[0].u_low + r[0].u_high, 0);
    EXPECT_FALSE(r[0].literal);
    EXPECT_TRUE(r[0].holds);
}

TEST(ExitInterval, Examples) {
    const auto dn = steps({{0, 1.0}});
    for (std::uint64_t i = 0; i < 10; ++i) EXPECT_FALSE(exit_interval_trial(dn, 1, 3, 8, 1, i));
    const auto nu = step_distribution(catalog_law("binary"));
    const std::uint64_t n = 200000;
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < n; ++i) hits += exit_interval_trial(nu, 1, 3, 8, 1, i);
    const auto e = estimate_tail(hits, n);
    EXPECT_LE(e.p_hat, 3.0 / 8.0 + 3 * e.half_width());
    EXPECT_THROW(exit_interval_trial(nu, 2, 1, 8, 1, 0), std::invalid_argument);
    EXPECT_THROW(exit_interval_trial(nu, 1, 8, 8, 1, 0), std::invalid_argument);
}

TEST(UpcrossingTrial, RenewalMatchesPathCount) {
    // The renewal shortcut and the literal count on full paths agree in law.
    const auto nu = step_distribution(catalog_law("binary"));
    const std::uint64_t n = 200000;
    std::array<std::uint64_t, 4> fast{}, slow{};
    std::uint64_t slow_n = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto u = upcrossing_trial(nu, 4, 8, 4, 4, 11, i);
        for (int k = 1; k <= 4; ++k) fast[k - 1] += u >= k;
        if (i >= 50000) continue;
        const auto p = simulate(nu, 12, i, 100000, Retain::full, 4);
        if (p.censored) continue;
        ++slow_n;
        const auto c = upcrossings(p, 4, 8, p.length).count;
        for (int k = 1; k <= 4; ++k) slow[k - 1] += c >= k;
    }
    for (int k = 0; k < 4; ++k) {
        const auto a = estimate_tail(fast[k], n), b = estimate_tail(slow[k], slow_n);
        EXPECT_LE(std::fabs(a.p_hat - b.p_hat), 3 * (a.half_width() + b.half_width())) << "k=" << k + 1;
        EXPECT_LE(a.p_hat, std::pow(3.0 / 8.0, k + 1) + 3 * a.half_width());
    }
}

TEST(UpcrossingTrial, RejectsPositiveDrift) {
    EXPECT_THROW(upcrossing_trial(step_distribution(catalog_law("binary-super")), 4, 8, 4, 4, 1, 0),
                 std::invalid_argument);
}

TEST(OccupationTrial, MatchesDecomposition) {
    const auto nu = step_distribution(catalog_law("binary"));
    for (std::uint64_t i = 0; i < 3000; ++i) {
        const auto o = occupation_trial(nu, 2, 1, std::numeric_limits<std::int64_t>::max(), 1'000'000, 9, i);
        const auto p = simulate(nu, 9, i, 1'000'000, Retain::full);
        ASSERT_EQ(o.censored, p.censored);
        if (p.censored) continue;
        const auto d = decompose(p);
        ASSERT_EQ(o.n_ell, d.N(2));
        ASSERT_NEAR(o.h_ell, d.H(2), 1e-12);
    }
}

TEST(HarmonicUntil, MatchesPrefix) {
    const auto nu = step_distribution(catalog_law("poisson"));
    for (std::uint64_t i = 0; i < 500; ++i) {
        const auto p = simulate(nu, 1, i, 1'000'000, Retain::full);
        const std::int64_t s = 50;
        ASSERT_NEAR(harmonic_until(nu, s, 1, i), harmonic(p, std::min(s, p.length)), 1e-12);
    }
}
