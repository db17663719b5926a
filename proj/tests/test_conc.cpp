#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "gwtails/conc.hpp"

using namespace gwtails;

namespace {

StepDistribution steps(std::map<std::int64_t, double> mu) { return step_distribution(OffspringDistribution::finite(mu)); }

ScaleExitTable table_of(std::vector<std::int64_t> n) {
    ScaleExitTable t;
    for (std::size_t l = 0; l < n.size(); ++l) {
        ScaleExitEntry e;
        e.ell = static_cast<int>(l);
        e.n = n[l];
        t.entries.emplace(e.ell, e);
    }
    return t;
}

}  // namespace

TEST(ConcentrationQ, Examples) {
    EXPECT_EQ(concentration_Q(LatticeLaw::point(5), 1.0), 1.0);
    EXPECT_EQ(concentration_Q(LatticeLaw::point(5), 0.25), 1.0);
    const auto pm = convolve_steps(steps({{0, 0.5}, {2, 0.5}}), 1, -1, 1);
    EXPECT_DOUBLE_EQ(concentration_Q(pm, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(concentration_Q(pm, 3.0), 1.0);
    EXPECT_THROW(concentration_Q(pm, 0.0), std::invalid_argument);

    const std::vector<double> s{0.0, 0.5, 0.9, 3.0};
    EXPECT_DOUBLE_EQ(concentration_Q(s, 1.0), 0.75);
    EXPECT_DOUBLE_EQ(concentration_Q(s, 0.5), 0.5);
}

TEST(ConvolveSteps, Examples) {
    const auto nu = steps({{0, 0.5}, {2, 0.5}});
    const auto one = convolve_steps(nu, 1, -1, 1);
    EXPECT_DOUBLE_EQ(one.pmf(-1), 0.5);
    EXPECT_DOUBLE_EQ(one.pmf(0), 0.0);
    EXPECT_DOUBLE_EQ(one.pmf(1), 0.5);

    const auto two = convolve_steps(nu, 2, -2, 2);
    EXPECT_DOUBLE_EQ(two.pmf(-2), 0.25);
    EXPECT_DOUBLE_EQ(two.pmf(0), 0.5);
    EXPECT_DOUBLE_EQ(two.pmf(2), 0.25);
    EXPECT_NEAR(two.total(), 1.0, 1e-15);

    const auto zero = convolve_steps(nu, 0, -3, 3);
    EXPECT_EQ(zero.pmf(0), 1.0);

    const auto pn = step_distribution(OffspringDistribution::poisson(1.0));
    const auto law = convolve_steps(pn, 100, -100, 100);
    EXPECT_NEAR(law.total(), 1.0, 1e-12);
    EXPECT_GT(law.window_mass(), 1.0 - 1e-12);
}

TEST(ConvolveSteps, DirectAndFftAgree) {
    const auto nu = step_distribution(catalog_law("geometric"));
    const auto a = convolve_steps(nu, 200, -200, 200, ConvMethod::direct);
    const auto b = convolve_steps(nu, 200, -200, 200, ConvMethod::fft);
    for (std::int64_t v = -200; v <= 200; ++v) ASSERT_NEAR(a.pmf(v), b.pmf(v), 1e-12) << v;
    EXPECT_NEAR(a.escaped_above, b.escaped_above, 1e-12);
    EXPECT_NEAR(a.escaped_below, b.escaped_below, 1e-15);
}

TEST(Kesten, MomentAndAtom) {
    const auto nu = steps({{0, 0.5}, {2, 0.5}});
    const auto m = truncated_difference_moment(nu, 2.0);
    EXPECT_DOUBLE_EQ(m.value, 2.0);
    EXPECT_DOUBLE_EQ(largest_atom(nu), 0.5);
    EXPECT_DOUBLE_EQ(1.0 - largest_atom(nu), 0.5);
    EXPECT_DOUBLE_EQ(dispersal_moment(nu, 1), 0.5);
}

TEST(Kesten, RatiosBoundedOnFiniteVariance) {
    for (const auto& name : {"binary", "geometric", "poisson"}) {
        const auto r = kesten_check(step_distribution(catalog_law(name)), {16, 64, 256, 1024}, 2.0);
        EXPECT_LT(r.C_moment, 2.0) << name;
        EXPECT_LT(r.spread_moment, 1.5) << name;
        for (const auto& row : r.rows) {
            EXPECT_LE(row.Q, 1.0);
            EXPECT_LE(row.Q, row.Q_dyadic + 1e-15);
            EXPECT_LT(row.escaped, 0.01);
        }
    }
    EXPECT_THROW(kesten_check(step_distribution(catalog_law("binary")), {}, 2.0), std::invalid_argument);
}

TEST(ExitDp, DeterministicDescent) {
    // From x the walk needs x steps to leave [1, 8), so n_1 = 8.
    const auto nu = steps({{0, 1.0}});
    const auto e = estimate_n_ell_dp(nu, 1);
    EXPECT_EQ(e.n, 8);
    EXPECT_TRUE(e.pointwise_monotone);
}

TEST(ExitDp, BinaryValues) {
    const auto nu = step_distribution(catalog_law("binary"));
    const std::vector<std::int64_t> expect{3, 13, 43, 160, 616};
    for (int l = 0; l < 5; ++l) EXPECT_EQ(estimate_n_ell_dp(nu, l).n, expect[static_cast<std::size_t>(l)]) << l;
}

TEST(ExitDp, MonotoneAndHalvingAtMultiples) {
    for (const auto& name : {"binary", "geometric", "var4"}) {
        const auto nu = step_distribution(catalog_law(name));
        for (int l = 0; l <= 5; ++l) {
            const auto e = estimate_n_ell_dp(nu, l, 4);
            SCOPED_TRACE(std::string(name) + " l=" + std::to_string(l));
            EXPECT_TRUE(e.pointwise_monotone);
            for (std::size_t i = 1; i < e.survival.size(); ++i) EXPECT_LE(e.survival[i].second, e.survival[i - 1].second);
            ASSERT_EQ(e.sup_at_multiples.size(), 4u);
            for (std::size_t k = 0; k < 4; ++k) EXPECT_LE(e.sup_at_multiples[k], std::ldexp(1.0, -static_cast<int>(k) - 1) + 1e-12);
        }
    }
}

TEST(ExitDp, Validation) {
    const auto nu = step_distribution(catalog_law("binary"));
    EXPECT_THROW(estimate_n_ell_dp(nu, -1), std::out_of_range);
    EXPECT_THROW(estimate_n_ell_dp(nu, 31), std::out_of_range);
    EXPECT_THROW(estimate_n_ell_dp(nu, 2, 0), std::invalid_argument);
}

TEST(ExitMc, AgreesWithDp) {
    for (const auto& name : {"binary", "poisson"}) {
        const auto nu = step_distribution(catalog_law(name));
        const auto dp = estimate_n_ell_dp(nu, 3);
        const auto mc = estimate_n_ell_mc(nu, 3, 20000, 5, 16);
        EXPECT_LE(static_cast<double>(mc.n_lower), 1.1 * static_cast<double>(dp.n)) << name;
        EXPECT_LE(static_cast<double>(dp.n), 1.1 * static_cast<double>(mc.n)) << name;
    }
}

TEST(ExitDp, GrowsLikeFourToTheScale) {
    // Finite variance: n_l / 4^l stays within a constant band.
    for (const auto& name : {"binary", "geometric", "poisson"}) {
        const auto t = exit_table_dp(step_distribution(catalog_law(name)), 6);
        ASSERT_TRUE(t.covers(6));
        for (int l = 0; l <= 6; ++l) {
            const double r = static_cast<double>(t.n(l)) / std::ldexp(1.0, 2 * l);
            EXPECT_GT(r, 0.5) << name << " " << l;
            EXPECT_LT(r, 8.0) << name << " " << l;
            if (l > 0) {
                EXPECT_GT(t.n(l), t.n(l - 1));
            }
        }
    }
}

TEST(Budget, Examples) {
    const auto t = table_of({3, 13, 43, 160});
    auto b = budget({1.0}, t);
    EXPECT_EQ(b.m, 0);
    EXPECT_DOUBLE_EQ(b.V, 36.0 * 3);
    EXPECT_DOUBLE_EQ(b.Delta, 2.0);

    for (int m = 0; m <= 3; ++m) {
        std::vector<double> bl;
        for (int l = 0; l <= m; ++l) bl.push_back(m - l + 1);
        EXPECT_NEAR(budget(bl, t).Delta, 4.0 * (m + 1) * std::ldexp(1.0, -m - 1), 1e-15);
    }

    const std::vector<double> one{1, 2, 3, 4}, two{2, 4, 6, 8};
    EXPECT_NEAR(budget(two, t).V, 2.0 * budget(one, t).V, 1e-9);
    EXPECT_THROW(budget({}, t), std::invalid_argument);
    EXPECT_THROW(budget({1.0, 0.0}, t), std::invalid_argument);
    EXPECT_THROW(budget({1, 1, 1, 1, 1}, t), std::out_of_range);
}

TEST(StableScaleConstant, Examples) {
    const auto t = table_of({3, 13, 43});
    EXPECT_DOUBLE_EQ(stable_scale_constant(t, 2.0), 3.25);
    EXPECT_THROW(stable_scale_constant(ScaleExitTable{}, 1.5), std::invalid_argument);
}
