#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "conc.hpp"
#include "detail/numeric.hpp"
#include "offspring.hpp"
#include "treegen.hpp"

namespace gwtails {

inline constexpr std::int64_t kEnumerateMaxNodes = 16;

struct EnumeratedTree {
    std::vector<std::int64_t> counts;  // breadth-first child counts
    std::vector<std::int64_t> queue;   // S(v_1), ..., S(v_n)
    double probability;
    std::int64_t size, height, width;
};

struct EnumeratedEnsemble {
    std::int64_t max_nodes;
    std::vector<EnumeratedTree> trees;
    double mass;  // P(|T| <= max_nodes)

    double mass_of_size(std::int64_t n) const {
        detail::KahanSum acc;
        for (const auto& t : trees)
            if (t.size == n) acc.add(t.probability);
        return acc.value();
    }
    /// P(ht < h and |T| <= max_nodes).
    double mass_below_height(std::int64_t h) const {
        detail::KahanSum acc;
        for (const auto& t : trees)
            if (t.height < h) acc.add(t.probability);
        return acc.value();
    }
};

namespace detail {

// Calls visit(counts) for every valid breadth-first child-count sequence with
// at most max_nodes entries drawn from `allowed`.
inline void for_each_bfs_sequence(const std::vector<std::int64_t>& allowed, std::int64_t max_nodes,
                                  const std::function<void(const std::vector<std::int64_t>&)>& visit) {
    std::vector<std::int64_t> counts;
    counts.reserve(static_cast<std::size_t>(max_nodes));
    std::function<void(std::int64_t)> rec = [&](std::int64_t s) {
        if (s == 0) {
            visit(counts);
            return;
        }
        const auto used = static_cast<std::int64_t>(counts.size());
        // Every queued node still needs a slot of its own.
        if (used + s > max_nodes) return;
        for (auto c : allowed) {
            if (used + 1 + (s - 1 + c) > max_nodes) continue;
            counts.push_back(c);
            rec(s - 1 + c);
            counts.pop_back();
        }
    };
    rec(1);
}

inline double sequence_probability(const OffspringDistribution& d, const std::vector<std::int64_t>& counts,
                                   bool log_space) {
    if (!log_space) {
        double p = 1.0;
        for (auto c : counts) p *= d.pmf(c);
        return p;
    }
    KahanSum lp;
    for (auto c : counts) lp.add(std::log(d.pmf(c)));
    return std::exp(lp.value());
}

inline std::vector<std::int64_t> positive_atoms(const OffspringDistribution& d, bool& tiny) {
    const auto top = d.support_max();
    if (!top) throw std::invalid_argument("enumerate: needs a finite-support law");
    if (*top > kEnumerateMaxNodes) throw std::invalid_argument("enumerate: support too large");
    std::vector<std::int64_t> allowed;
    tiny = false;
    for (std::int64_t i = 0; i <= *top; ++i) {
        const double p = d.pmf(i);
        if (p > 0.0) {
            allowed.push_back(i);
            if (p < 1e-6) tiny = true;
        }
    }
    return allowed;
}

}  // namespace detail

/// All trees with at most N nodes, each with its exact probability.
inline EnumeratedEnsemble enumerate(const OffspringDistribution& d, std::int64_t N) {
    if (N < 1 || N > kEnumerateMaxNodes) throw std::invalid_argument("enumerate: N must lie in [1, 16]");
    bool tiny = false;
    const auto allowed = detail::positive_atoms(d, tiny);
    EnumeratedEnsemble e{N, {}, 0.0};
    detail::KahanSum mass;
    detail::for_each_bfs_sequence(allowed, N, [&](const std::vector<std::int64_t>& counts) {
        auto t = BfsTree::from_child_counts(counts);
        EnumeratedTree et{counts, t.queue, detail::sequence_probability(d, counts, tiny), t.size(), t.height(),
                          t.width()};
        mass.add(et.probability);
        e.trees.push_back(std::move(et));
    });
    e.mass = mass.value();
    return e;
}

/// P(ht(T) < H) by listing every plane tree of height below H with its
/// probability: a tree of height < h + 1 is a root with c children, each a
/// tree of height < h.
struct HeightEnumeration {
    std::int64_t trees;
    double mass;
};

inline constexpr std::size_t kHeightEnumerateMax = 20'000'000;

inline HeightEnumeration enumerate_height(const OffspringDistribution& d, std::int64_t H) {
    if (H < 0) throw std::invalid_argument("enumerate_height: H must be >= 0");
    if (H == 0) return {0, 0.0};
    bool tiny = false;
    const auto allowed = detail::positive_atoms(d, tiny);
    std::vector<double> level{d.pmf(0)};  // every tree of height < h
    if (level[0] == 0.0) level.clear();
    for (std::int64_t h = 1; h < H; ++h) {
        std::vector<double> next;
        for (auto c : allowed) {
            const double pc = d.pmf(c);
            if (c == 0) {
                next.push_back(pc);
                continue;
            }
            if (std::pow(static_cast<double>(level.size()), static_cast<double>(c)) + static_cast<double>(next.size()) >
                static_cast<double>(kHeightEnumerateMax))
                throw std::length_error("enumerate_height: too many trees");
            std::vector<std::size_t> idx(static_cast<std::size_t>(c), 0);
            if (level.empty()) continue;
            for (;;) {
                double p = pc;
                for (auto i : idx) p *= level[i];
                next.push_back(p);
                std::size_t k = 0;
                while (k < idx.size() && ++idx[k] == level.size()) idx[k++] = 0;
                if (k == idx.size()) break;
            }
        }
        level = std::move(next);
    }
    return {static_cast<std::int64_t>(level.size()), detail::compensated_sum(level)};
}

/// P(sigma = n) for n = 0..N (entry 0 is 0) by the cycle lemma
///   P_1(sigma = n) = P(X_1 + ... + X_n = -1) / n,
/// with all partial sums tracked in one pass. After k steps only sums at most
/// N - k - 1 can still reach -1 by step N, and no step above N - 2 is ever
/// useful, so both cuts are exact.
inline std::vector<double> size_pmf_table(const StepDistribution& nu, std::int64_t N) {
    if (N < 1 || N > 10'000) throw std::length_error("size_pmf: n must lie in [1, 10^4]");
    std::vector<double> out(static_cast<std::size_t>(N + 1), 0.0);
    const auto kernel = detail::step_kernel(nu, std::max<std::int64_t>(N - 2, -1));
    const std::int64_t J = kernel.jmax();
    // cur[v + N] = P(S_k = v) for v in [-k, N - k - 1].
    std::vector<double> cur(static_cast<std::size_t>(2 * N + 1), 0.0), next(cur.size(), 0.0);
    cur[static_cast<std::size_t>(N)] = 1.0;
    for (std::int64_t k = 1; k <= N; ++k) {
        const std::int64_t lo = -(k - 1), hi = N - k;  // range of S_{k-1}
        const std::int64_t top = N - k - 1;            // useful range of S_k
        std::fill(next.begin(), next.end(), 0.0);
        for (std::int64_t j = -1; j <= J; ++j) {
            const double pj = kernel.p[static_cast<std::size_t>(j + 1)];
            if (pj == 0.0) continue;
            const std::int64_t v_end = std::min(hi, top - j);
            for (std::int64_t v = lo; v <= v_end; ++v)
                next[static_cast<std::size_t>(v + j + N)] += pj * cur[static_cast<std::size_t>(v + N)];
        }
        std::swap(cur, next);
        out[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(N - 1)] / static_cast<double>(k);
    }
    return out;
}

inline double size_pmf(const StepDistribution& nu, std::int64_t n) {
    if (n < 1 || n > 10'000) throw std::length_error("size_pmf: n must lie in [1, 10^4]");
    const auto law = convolve_steps(nu, n, -1, -1);
    return law.pmf(-1) / static_cast<double>(n);
}

/// P_1(sigma = n) for n = 0..N by first-passage dynamic programming on the
/// positive states, independent of the cycle lemma.
inline std::vector<double> first_passage_table(const StepDistribution& nu, std::int64_t N) {
    if (N < 1 || N > 10'000) throw std::length_error("first_passage_table: n must lie in [1, 10^4]");
    std::vector<double> out(static_cast<std::size_t>(N + 1), 0.0);
    const auto kernel = detail::step_kernel(nu, N);
    const std::int64_t J = kernel.jmax();
    const double down = nu.p_minus1();
    // cur[v] = P(S_k = v, S_i > 0 for i <= k); only v <= N - k can reach 0 by N.
    std::vector<double> cur(static_cast<std::size_t>(N + 2), 0.0), next(cur.size(), 0.0);
    cur[1] = 1.0;
    for (std::int64_t k = 1; k <= N; ++k) {
        out[static_cast<std::size_t>(k)] = cur[1] * down;
        std::fill(next.begin(), next.end(), 0.0);
        const std::int64_t top = N - k;
        for (std::int64_t v = 1; v <= N - k + 1; ++v) {
            const double m = cur[static_cast<std::size_t>(v)];
            if (m == 0.0) continue;
            for (std::int64_t j = -1; j <= J && v + j <= top; ++j) {
                if (v + j <= 0) continue;
                next[static_cast<std::size_t>(v + j)] += m * kernel.p[static_cast<std::size_t>(j + 1)];
            }
        }
        std::swap(cur, next);
    }
    return out;
}

/// P(ht(T) < n) = f^{(n)}(0), the n-fold iterate of the pgf.
inline double height_cdf(const OffspringDistribution& d, std::int64_t n) {
    if (n < 0 || n > 1'000'000) throw std::invalid_argument("height_cdf: n must lie in [0, 10^6]");
    double q = 0.0;
    for (std::int64_t i = 0; i < n; ++i) q = d.pgf(q);
    return q;
}

inline std::vector<double> height_cdf_table(const OffspringDistribution& d, std::int64_t n) {
    if (n < 0 || n > 1'000'000) throw std::invalid_argument("height_cdf: n must lie in [0, 10^6]");
    std::vector<double> out(static_cast<std::size_t>(n + 1), 0.0);
    for (std::int64_t i = 1; i <= n; ++i) out[static_cast<std::size_t>(i)] = d.pgf(out[static_cast<std::size_t>(i - 1)]);
    return out;
}

/// Closed form of P(E_h(k)): one internal node per level 0..h-1, any of the
/// k nodes of levels 1..h-1 may carry the next one, so
///   P(E_h(k)) = k^{h-1} mu(k)^h mu(0)^{h(k-1)+1}.
inline double example_Eh_closed_form(const OffspringDistribution& d, std::int64_t h, std::int64_t k) {
    if (h < 1 || k < 1) throw std::invalid_argument("example_Eh: need h >= 1, k >= 1");
    const double p = d.p0(), q = d.pmf(k);
    if (p == 0.0 || q == 0.0) return 0.0;
    const double hd = static_cast<double>(h), kd = static_cast<double>(k);
    return std::exp((hd - 1.0) * std::log(kd) + hd * std::log(q) + (hd * (kd - 1.0) + 1.0) * std::log(p));
}

/// Exact P(E_h(k)) (height h, exactly h nodes with k children, all other
/// nodes leaves) by enumerating breadth-first sequences over {0, k} of
/// length hk + 1 with h entries equal to k.
inline double example_Eh_exact(const OffspringDistribution& d, std::int64_t h, std::int64_t k) {
    if (h < 1 || k < 1) throw std::invalid_argument("example_Eh: need h >= 1, k >= 1");
    const std::int64_t n = h * k + 1;
    if (n > 64 || std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(h) + 1) -
                          std::lgamma(static_cast<double>(n - h) + 1) > std::log(1e7))
        throw std::invalid_argument("example_Eh: out of enumeration range");
    const double p = d.p0(), q = d.pmf(k);
    if (p == 0.0 || q == 0.0) return 0.0;
    detail::KahanSum acc;
    const double lp = std::log(p), lq = std::log(q);
    std::vector<std::int64_t> counts;
    std::function<void(std::int64_t, std::int64_t)> rec = [&](std::int64_t s, std::int64_t internal) {
        if (s == 0) {
            if (internal != h || static_cast<std::int64_t>(counts.size()) != n) return;
            if (BfsTree::from_child_counts(counts).height() != h) return;
            acc.add(std::exp(static_cast<double>(h) * lq + static_cast<double>(n - h) * lp));
            return;
        }
        if (static_cast<std::int64_t>(counts.size()) + s > n) return;
        if (internal < h) {
            counts.push_back(k);
            rec(s - 1 + k, internal + 1);
            counts.pop_back();
        }
        counts.push_back(0);
        rec(s - 1, internal);
        counts.pop_back();
    };
    rec(1, 0);
    return acc.value();
}

/// Exact P(E_h(k)) by filtering the full enumeration (h <= 4, k <= 3).
inline double example_Eh_from_ensemble(const EnumeratedEnsemble& e, std::int64_t h, std::int64_t k) {
    if (h * k + 1 > e.max_nodes) throw std::invalid_argument("example_Eh: ensemble too small");
    detail::KahanSum acc;
    for (const auto& t : e.trees) {
        if (t.height != h) continue;
        const auto internal = std::count(t.counts.begin(), t.counts.end(), k);
        const bool others_leaves =
            std::all_of(t.counts.begin(), t.counts.end(), [k](std::int64_t c) { return c == 0 || c == k; });
        if (internal == h && others_leaves) acc.add(t.probability);
    }
    return acc.value();
}

}  // namespace gwtails
