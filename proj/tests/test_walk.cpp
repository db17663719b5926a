#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "gwtails/oracle.hpp"
#include "gwtails/stats.hpp"
#include "gwtails/treegen.hpp"
#include "gwtails/walk.hpp"

using namespace gwtails;

namespace {

StepDistribution steps(std::map<std::int64_t, double> mu) { return step_distribution(OffspringDistribution::finite(mu)); }

}  // namespace

TEST(Simulate, ImmediateDeath) {
    const auto p = simulate(steps({{0, 1.0}}), 1, 0);
    EXPECT_FALSE(p.censored);
    EXPECT_EQ(p.sigma(), 1);
    EXPECT_EQ(p.h_sigma, 1.0);
    EXPECT_EQ(p.max_s, 1);
}

TEST(Simulate, SigmaFrequencies) {
    const auto nu = steps({{0, 0.5}, {2, 0.5}});
    const std::uint64_t n = 1'000'000;
    std::uint64_t one = 0, three = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto p = simulate(nu, 9, i, 4);
        one += !p.censored && p.length == 1;
        three += !p.censored && p.length == 3;
    }
    const auto a = estimate_tail(one, n), b = estimate_tail(three, n);
    const auto exact3 = size_pmf(nu, 3);
    EXPECT_DOUBLE_EQ(exact3, 0.125);
    EXPECT_LE(std::fabs(a.p_hat - 0.5), 3 * a.half_width());
    EXPECT_LE(std::fabs(b.p_hat - exact3), 3 * b.half_width());
}

TEST(Simulate, CensoringAndValidation) {
    EXPECT_THROW(simulate(steps({{1, 1.0}}), 1, 0), std::invalid_argument);
    EXPECT_THROW(simulate(steps({{0, 1.0}}), 1, 0, 0), std::invalid_argument);
    const auto c = simulate(steps({{0, 0.1}, {3, 0.9}}), 1, 0, 10);
    EXPECT_TRUE(c.censored);
    EXPECT_EQ(c.length, 10);
    EXPECT_THROW(c.sigma(), std::logic_error);
}

TEST(Harmonic, Examples) {
    const auto p = WalkPath::from_steps({1, 2, 1, 0});
    EXPECT_EQ(harmonic(p, 0), 0.0);
    EXPECT_DOUBLE_EQ(harmonic(p, 3), 2.5);
    EXPECT_FALSE(p.censored);
    EXPECT_EQ(p.sigma(), 3);
    const auto s = simulate(steps({{0, 0.5}, {2, 0.5}}), 1, 0);
    EXPECT_THROW(harmonic(s, 0), std::invalid_argument);
}

TEST(Harmonic, MatchesStreamingSum) {
    const auto nu = step_distribution(catalog_law("geometric"));
    for (std::uint64_t i = 0; i < 2000; ++i) {
        const auto f = simulate(nu, 4, i, 100000, Retain::full);
        const auto s = simulate(nu, 4, i, 100000);
        ASSERT_EQ(f.length, s.length);
        ASSERT_EQ(f.max_s, s.max_s);
        ASSERT_NEAR(harmonic(f, f.length), s.h_sigma, 1e-9);
        ASSERT_EQ(harmonic(f, f.length), f.h_sigma);
    }
}

TEST(FromSteps, Validation) {
    EXPECT_THROW(WalkPath::from_steps({}), std::invalid_argument);
    EXPECT_THROW(WalkPath::from_steps({3, 1, 0}), std::invalid_argument);
    EXPECT_THROW(WalkPath::from_steps({1, 0, 1}), std::invalid_argument);
    EXPECT_TRUE(WalkPath::from_steps({1, 2}).censored);
}

TEST(RatioStatistics, Examples) {
    auto r = ratio_statistics(WalkPath::from_steps({1, 0}));
    EXPECT_EQ(r.h_over_sqrt, 1.0);
    WalkPath p;
    p.length = 4;
    p.h_sigma = 3.0;
    r = ratio_statistics(p, 1.5);
    EXPECT_DOUBLE_EQ(r.h_over_sqrt, 1.5);
    const auto two = ratio_statistics(p, 2.0);
    EXPECT_DOUBLE_EQ(two.h_over_stable, two.h_over_sqrt);
    p.censored = true;
    EXPECT_THROW(ratio_statistics(p), std::invalid_argument);
}

TEST(Walk, HarmonicBrackets) {
    for (const auto& name : catalog_names()) {
        const auto nu = step_distribution(dual(catalog_law(name)));
        for (std::uint64_t i = 0; i < 20000; ++i) {
            const auto p = simulate(nu, 6, i, 100000);
            if (p.censored) continue;
            const double sigma = static_cast<double>(p.length);
            ASSERT_LE(p.h_sigma, sigma + 1e-9) << name;
            ASSERT_GE(p.h_sigma, sigma / static_cast<double>(p.max_s) - 1e-9) << name;
        }
    }
}

TEST(Walk, SameDrawsAsTreeSampler) {
    for (const auto& name : catalog_names()) {
        const auto d = dual(catalog_law(name));
        const auto nu = step_distribution(d);
        for (std::uint64_t i = 0; i < 5000; ++i) {
            const auto t = sample_tree_summary(d, 8, i, 100000);
            const auto p = simulate(nu, 8, i, 100000);
            ASSERT_EQ(t.size, p.length);
            ASSERT_EQ(t.truncated, p.censored);
            ASSERT_EQ(t.max_queue, p.max_s);
            ASSERT_EQ(t.harmonic, p.h_sigma);
        }
    }
}
