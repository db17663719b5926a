#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "detail/numeric.hpp"
#include "offspring.hpp"
#include "rng.hpp"

namespace gwtails {

inline constexpr std::int64_t kDefaultNodeCap = 10'000'000;

/// A finite plane tree in breadth-first order, possibly cut off at a node cap.
struct BfsTree {
    std::vector<std::int64_t> child_counts;  // c(v_1), ..., c(v_n)
    std::vector<std::int64_t> level_sizes;   // |T_0|, ..., |T_ht|
    std::vector<std::int64_t> queue;         // S(v_1), ..., S(v_n)
    bool truncated = false;

    std::int64_t size() const noexcept { return static_cast<std::int64_t>(child_counts.size()); }
    std::int64_t height() const noexcept { return static_cast<std::int64_t>(level_sizes.size()) - 1; }
    std::int64_t width() const noexcept {
        return level_sizes.empty() ? 0 : *std::max_element(level_sizes.begin(), level_sizes.end());
    }
    std::int64_t max_queue() const noexcept {
        return queue.empty() ? 0 : *std::max_element(queue.begin(), queue.end());
    }

    /// Builds the tree from a breadth-first child-count sequence. A sequence
    /// whose queue never empties is accepted only with `truncated` set.
    static BfsTree from_child_counts(std::vector<std::int64_t> counts, bool truncated = false) {
        BfsTree t;
        t.truncated = truncated;
        t.queue.reserve(counts.size());
        std::int64_t s = 1;
        std::int64_t level_left = 1, next_level = 0;
        t.level_sizes.push_back(1);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (s <= 0) throw std::invalid_argument("child-count sequence: queue empties before the last node");
            if (counts[i] < 0) throw std::invalid_argument("child-count sequence: negative count");
            t.queue.push_back(s);
            s += counts[i] - 1;
            next_level += counts[i];
            if (--level_left == 0 && next_level > 0) {
                t.level_sizes.push_back(next_level);
                level_left = next_level;
                next_level = 0;
            }
        }
        if (!truncated && s != 0) throw std::invalid_argument("child-count sequence: queue does not end at zero");
        t.child_counts = std::move(counts);
        return t;
    }
};

/// Summary statistics of a sampled tree, accumulated without storing nodes.
struct TreeSummary {
    std::int64_t size = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t max_queue = 0;
    double harmonic = 0.0;  // sum_v 1 / S(v)
    bool truncated = false;
};

namespace detail {

// Accumulates 1/S in short plain blocks folded into a compensated total.
class ReciprocalSum {
public:
    void add(std::int64_t s) noexcept {
        block_ += 1.0 / static_cast<double>(s);
        if (++count_ == 64) flush();
    }
    double value() noexcept {
        flush();
        return total_.value();
    }

private:
    void flush() noexcept {
        total_.add(block_);
        block_ = 0.0;
        count_ = 0;
    }
    KahanSum total_;
    double block_ = 0.0;
    int count_ = 0;
};

}  // namespace detail

/// Breadth-first generation with iid child counts drawn from stream (seed, trial).
inline TreeSummary sample_tree_summary(const OffspringDistribution& d, std::uint64_t seed, std::uint64_t trial,
                                       std::int64_t node_cap = kDefaultNodeCap) {
    if (node_cap < 1) throw std::invalid_argument("sample_tree: node_cap must be >= 1");
    KeyedStream rng(seed, trial);
    TreeSummary out;
    detail::ReciprocalSum harmonic;
    std::int64_t s = 1, n = 0, max_s = 1;
    std::int64_t level_left = 1, next_level = 0, height = 0, width = 1;
    while (s > 0 && n < node_cap) {
        harmonic.add(s);
        if (s > max_s) max_s = s;
        const std::int64_t c = d.sample(rng.open_closed());
        ++n;
        s += c - 1;
        next_level += c;
        if (--level_left == 0 && next_level > 0) {
            ++height;
            if (next_level > width) width = next_level;
            level_left = next_level;
            next_level = 0;
        }
    }
    out.size = n;
    out.truncated = s > 0;
    // For a truncated tree, a level whose nodes are all still queued counts
    // towards height and width, as in BfsTree::from_child_counts.
    out.height = height;
    out.width = width;
    out.max_queue = max_s;
    out.harmonic = harmonic.value();
    return out;
}

/// Same stream and stopping rule as sample_tree_summary, keeping every node.
inline BfsTree sample_tree(const OffspringDistribution& d, std::uint64_t seed, std::uint64_t trial,
                           std::int64_t node_cap = kDefaultNodeCap) {
    if (node_cap < 1) throw std::invalid_argument("sample_tree: node_cap must be >= 1");
    KeyedStream rng(seed, trial);
    std::vector<std::int64_t> counts;
    std::int64_t s = 1;
    while (s > 0 && static_cast<std::int64_t>(counts.size()) < node_cap) {
        const std::int64_t c = d.sample(rng.open_closed());
        counts.push_back(c);
        s += c - 1;
    }
    return BfsTree::from_child_counts(std::move(counts), s > 0);
}

inline TreeSummary summarize(const BfsTree& t) {
    TreeSummary s;
    s.size = t.size();
    s.height = t.height();
    s.width = t.width();
    s.max_queue = t.max_queue();
    detail::ReciprocalSum h;
    for (auto q : t.queue) h.add(q);
    s.harmonic = h.value();
    s.truncated = t.truncated;
    return s;
}

/// 3 * sum_v 1/S(v), an upper bound on the height of any finite tree.
inline double harmonic_bound(const BfsTree& t) {
    if (t.truncated) throw std::invalid_argument("harmonic_bound: truncated tree");
    detail::ReciprocalSum h;
    for (auto q : t.queue) h.add(q);
    return 3.0 * h.value();
}

struct WidthSandwich {
    double lower;
    std::int64_t upper;
};

/// (max S / 2, max S), which bracket the width.
inline WidthSandwich width_sandwich(const BfsTree& t) {
    if (t.truncated) throw std::invalid_argument("width_sandwich: truncated tree");
    const auto m = t.max_queue();
    return {0.5 * static_cast<double>(m), m};
}

/// Left side of the level-size inequality
///   sum_{n_k <= n_{k+1}} n_k/(n_k+n_{k+1}) + sum_{n_k > n_{k+1}} log((n_k+n_{k+1})/n_{k+1}) >= h/3
/// for a sequence n_0 .. n_{h+1} of positive integers with n_0 = n_{h+1} = 1.
inline double two_sums_lhs(std::span<const std::int64_t> n) {
    if (n.size() < 2) throw std::invalid_argument("two_sums_lhs: need at least two entries");
    if (n.front() != 1 || n.back() != 1) throw std::invalid_argument("two_sums_lhs: first and last entries must be 1");
    detail::KahanSum acc;
    for (std::size_t k = 0; k + 1 < n.size(); ++k) {
        const auto a = n[k], b = n[k + 1];
        if (a < 1 || b < 1) throw std::invalid_argument("two_sums_lhs: entries must be positive");
        const double x = static_cast<double>(a), y = static_cast<double>(b);
        if (a <= b) acc.add(x / (x + y));
        else acc.add(std::log1p(x / y));
    }
    return acc.value();
}

/// Lower bound mu(k)^h mu(0)^{hk} on the probability of the "h internal
/// nodes with k children, all others leaves, height h" event.
inline double example_Eh_bound(const OffspringDistribution& d, std::int64_t h, std::int64_t k) {
    if (h < 1 || k < 1) throw std::invalid_argument("example_Eh_bound: need h >= 1, k >= 1");
    const double p = d.p0(), q = d.pmf(k);
    if (!(p > 0.0) || !(q > 0.0)) throw std::invalid_argument("example_Eh_bound: mu(0) and mu(k) must be positive");
    const double hd = static_cast<double>(h);
    return std::exp(hd * std::log(q) + hd * static_cast<double>(k) * std::log(p));
}

/// Deterministic checks that hold for every finite tree. Zero tolerance except
/// the 1e-9 guard band on the floating harmonic bound.
struct TreeInequalityReport {
    bool height_width_volume = true;  // ht * wid >= |T| - 1
    bool harmonic = true;             // ht <= 3 sum 1/S
    bool sandwich = true;             // max S / 2 <= wid <= max S
    bool all() const noexcept { return height_width_volume && harmonic && sandwich; }
};

inline TreeInequalityReport check_tree_inequalities(const TreeSummary& s) {
    TreeInequalityReport r;
    if (s.truncated) throw std::invalid_argument("check_tree_inequalities: truncated tree");
    // Every level below the root holds at most wid nodes. (ht * wid >= |T|
    // itself fails for paths and stars.)
    r.height_width_volume = s.height * s.width >= s.size - 1;
    r.harmonic = static_cast<double>(s.height) <= 3.0 * s.harmonic + 1e-9;
    r.sandwich = s.max_queue <= 2 * s.width && s.width <= s.max_queue;
    return r;
}

}  // namespace gwtails
