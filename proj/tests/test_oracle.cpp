#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <string>

#include "gwtails/oracle.hpp"

using namespace gwtails;

namespace {

OffspringDistribution fin(std::map<std::int64_t, double> m) { return OffspringDistribution::finite(m); }

OffspringDistribution spread() { return fin({{0, 0.4}, {1, 0.3}, {2, 0.1}, {3, 0.2}}); }

OffspringDistribution full_support(std::int64_t n) {
    std::map<std::int64_t, double> m;
    for (std::int64_t i = 0; i < n; ++i) m[i] = 1.0 / static_cast<double>(n);
    return fin(m);
}

std::int64_t catalan(std::int64_t n) {
    std::int64_t c = 1;
    for (std::int64_t k = 0; k < n; ++k) c = c * 2 * (2 * k + 1) / (k + 2);
    return c;
}

}  // namespace

TEST(Enumerate, BinaryThree) {
    const auto e = enumerate(catalog_law("binary"), 3);
    EXPECT_EQ(e.trees.size(), 2u);
    EXPECT_DOUBLE_EQ(e.mass, 0.625);
    EXPECT_DOUBLE_EQ(e.mass_of_size(1), 0.5);
    EXPECT_DOUBLE_EQ(e.mass_of_size(3), 0.125);
    EXPECT_THROW(enumerate(catalog_law("binary"), 17), std::invalid_argument);
}

TEST(Enumerate, CatalanCounts) {
    const auto e = enumerate(full_support(9), 9);
    std::map<std::int64_t, std::int64_t> count;
    for (const auto& t : e.trees) ++count[t.size];
    for (std::int64_t n = 1; n <= 9; ++n) EXPECT_EQ(count[n], catalan(n - 1)) << n;

    const auto b = enumerate(catalog_law("binary"), 15);
    std::map<std::int64_t, std::int64_t> bc;
    for (const auto& t : b.trees) ++bc[t.size];
    for (std::int64_t k = 0; k <= 7; ++k) EXPECT_EQ(bc[2 * k + 1], catalan(k)) << k;
}

TEST(SizePmf, Examples) {
    const auto nu = step_distribution(catalog_law("binary"));
    EXPECT_DOUBLE_EQ(size_pmf(nu, 1), 0.5);
    EXPECT_EQ(size_pmf(nu, 2), 0.0);
    EXPECT_DOUBLE_EQ(size_pmf(nu, 3), 0.125);
    EXPECT_THROW(size_pmf(nu, 0), std::length_error);
}

TEST(SizePmf, ThreeWaysAgree) {
    for (const auto& [name, d] : std::map<std::string, OffspringDistribution>{
             {"binary", catalog_law("binary")}, {"var4", catalog_law("var4")},
             {"binary-super", dual(catalog_law("binary-super"))}, {"spread", spread()}}) {
        const auto nu = step_distribution(d);
        const std::int64_t N = 12;
        const auto cyc = size_pmf_table(nu, N);
        const auto fp = first_passage_table(nu, N);
        const auto en = enumerate(d, N);
        for (std::int64_t n = 1; n <= N; ++n) {
            SCOPED_TRACE(name + " n=" + std::to_string(n));
            EXPECT_NEAR(cyc[static_cast<std::size_t>(n)], fp[static_cast<std::size_t>(n)], 1e-12);
            EXPECT_NEAR(cyc[static_cast<std::size_t>(n)], en.mass_of_size(n), 1e-12);
            EXPECT_NEAR(cyc[static_cast<std::size_t>(n)], size_pmf(nu, n), 1e-12);
        }
    }
}

TEST(HeightCdf, Examples) {
    const auto b = catalog_law("binary");
    EXPECT_EQ(height_cdf(b, 0), 0.0);
    EXPECT_EQ(height_cdf(b, 1), 0.5);
    EXPECT_DOUBLE_EQ(height_cdf(b, 2), 0.625);
    EXPECT_NEAR(height_cdf(fin({{0, 0.25}, {2, 0.75}}), 2000), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(height_cdf(fin({{0, 0.6}, {2, 0.4}}), 2000), 1.0, 1e-12);
    const auto tab = height_cdf_table(b, 50);
    for (std::int64_t n = 0; n <= 50; ++n) EXPECT_EQ(tab[static_cast<std::size_t>(n)], height_cdf(b, n));
    EXPECT_THROW(height_cdf(b, -1), std::invalid_argument);
}

TEST(HeightCdf, BracketsEnumeration) {
    for (const auto& [name, d] : std::map<std::string, OffspringDistribution>{
             {"binary", catalog_law("binary")}, {"var4", catalog_law("var4")}, {"spread", spread()}}) {
        const auto e = enumerate(d, 14);
        for (std::int64_t h = 1; h <= 6; ++h) {
            const double exact = height_cdf(d, h), seen = e.mass_below_height(h);
            EXPECT_GE(exact, seen - 1e-12) << name << " h=" << h;
            EXPECT_LE(exact - seen, 1.0 - e.mass + 1e-12) << name << " h=" << h;
        }
        // Height below 1 means a single node, which the enumeration sees in full.
        EXPECT_NEAR(height_cdf(d, 1), e.mass_below_height(1), 1e-14);
    }
}

TEST(ExampleEh, ThreeWaysAgree) {
    const auto b = catalog_law("binary");
    EXPECT_DOUBLE_EQ(example_Eh_closed_form(b, 2, 2), 2.0 * 0.25 * 0.125);
    const auto e = enumerate(spread(), 13);
    for (const auto& [name, d] : std::map<std::string, OffspringDistribution>{
             {"binary", catalog_law("binary")}, {"geometric", catalog_law("geometric")}, {"spread", spread()}}) {
        for (std::int64_t h = 1; h <= 4; ++h)
            for (std::int64_t k = 1; k <= 3; ++k) {
                if (d.pmf(k) == 0.0) continue;
                const double c = example_Eh_closed_form(d, h, k);
                EXPECT_NEAR(example_Eh_exact(d, h, k), c, 1e-15 + 1e-12 * c) << name << " " << h << " " << k;
                EXPECT_GE(c, example_Eh_bound(d, h, k) * (1 - 1e-12));
            }
    }
    const auto g = spread();
    for (std::int64_t h = 1; h <= 4; ++h)
        for (std::int64_t k = 1; k <= 3; ++k) {
            if (h * k + 1 > 13) continue;
            EXPECT_NEAR(example_Eh_from_ensemble(e, h, k), example_Eh_closed_form(g, h, k), 1e-15);
        }
}

TEST(SizeTail, SquareRootDecay) {
    // sqrt(n) P(|T| >= n) settles for finite variance.
    for (const auto& name : {"binary", "geometric", "poisson"}) {
        const auto nu = step_distribution(catalog_law(name));
        const auto p = size_pmf_table(nu, 4000);
        std::vector<double> below(p.size(), 0.0);
        for (std::size_t n = 1; n < p.size(); ++n) below[n] = below[n - 1] + p[n - 1];
        double lo = detail::kInf, hi = 0.0;
        for (std::size_t n : {16u, 64u, 256u, 1024u, 4000u}) {
            const double v = std::sqrt(static_cast<double>(n)) * (1.0 - below[n]);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        EXPECT_GT(lo, 0.0) << name;
        EXPECT_LT(hi / lo, 2.0) << name;
    }
}

TEST(EnumerateHeight, MatchesHeightCdf) {
    const auto b = enumerate_height(catalog_law("binary"), 5);
    EXPECT_EQ(b.trees, 677);  // 1, 2, 5, 26, 677
    EXPECT_EQ(enumerate_height(catalog_law("binary"), 3).trees, 5);
    for (const auto& d : {catalog_law("binary"), fin({{0, 0.3}, {1, 0.4}, {2, 0.3}}), spread()})
        for (std::int64_t h = 0; h <= 4; ++h) EXPECT_NEAR(enumerate_height(d, h).mass, height_cdf(d, h), 1e-12) << h;
    EXPECT_NEAR(enumerate_height(fin({{0, 0.3}, {1, 0.4}, {2, 0.3}}), 5).mass,
                height_cdf(fin({{0, 0.3}, {1, 0.4}, {2, 0.3}}), 5), 1e-12);
    EXPECT_THROW(enumerate_height(catalog_law("geometric"), 3), std::invalid_argument);
}
