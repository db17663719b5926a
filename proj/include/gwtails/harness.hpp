#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "conc.hpp"
#include "offspring.hpp"
#include "parallel.hpp"
#include "scales.hpp"
#include "stats.hpp"
#include "treegen.hpp"
#include "walk.hpp"

namespace gwtails {

enum class Target {
    general_width,
    general_volume,
    fixed_var,
    stable,
    inf_var,
    hvol_finvar,
    var_precise,
    stable_attempt,
    nl_bd,
    upcrossing,
    interval,
    generic_budget,
    exit_time,
};

inline constexpr std::array<std::pair<Target, const char*>, 13> kTargetNames{{
    {Target::general_width, "general-width"},
    {Target::general_volume, "general-volume"},
    {Target::fixed_var, "fixed-var"},
    {Target::stable, "stable"},
    {Target::inf_var, "inf-var"},
    {Target::hvol_finvar, "hvol-finvar"},
    {Target::var_precise, "var-precise"},
    {Target::stable_attempt, "stable-attempt"},
    {Target::nl_bd, "nl-bd"},
    {Target::upcrossing, "upcrossing"},
    {Target::interval, "interval"},
    {Target::generic_budget, "generic-budget"},
    {Target::exit_time, "exit-time"},
}};

inline const char* to_string(Target t) {
    for (const auto& [k, name] : kTargetNames)
        if (k == t) return name;
    return "?";
}

inline Target parse_target(const std::string& s) {
    for (const auto& [k, name] : kTargetNames)
        if (s == name) return k;
    throw std::invalid_argument("config: unknown target \"" + s + "\"");
}

/// Targets whose bound carries an unspecified absolute constant C, fitted on
/// a 2^{1/8} grid. The rest have explicit bounds.
inline bool is_fitted(Target t) {
    switch (t) {
        case Target::general_width:
        case Target::general_volume:
        case Target::fixed_var:
        case Target::stable:
        case Target::hvol_finvar:
        case Target::var_precise:
        case Target::stable_attempt: return true;
        default: return false;
    }
}

inline bool uses_trees(Target t) { return is_fitted(t) || t == Target::inf_var; }

inline constexpr const char* kSchema = "gwtails/1";

struct IntervalCase {
    std::int64_t a, z, b;
};

struct ExperimentConfig {
    nlohmann::json distribution;
    Target target = Target::general_width;
    std::string form;  // target variant; empty means the default
    std::uint64_t trials = 100'000;
    std::uint64_t seed = 1;
    std::int64_t node_cap = kDefaultNodeCap;
    std::int64_t step_cap = kDefaultStepCap;
    std::vector<double> x_grid{1.0, 1.5, 2.0, 2.5, 3.0};
    std::optional<double> alpha;
    std::optional<double> constant;   // evaluate at this C instead of fitting
    std::int64_t size_threshold = 1;  // n (or s) in the joint and conditional events
    double epsilon = 1.0;
    int ell = 3;
    std::int64_t start = 1;
    std::int64_t up_x = 4, up_y = 8;
    std::vector<IntervalCase> cases;
    int m = 6;
    std::int64_t horizon = 0;         // s for generic-budget; 0 means 4^{m+1}
    int starts = 8;
    int ell_max = 10;

    void validate() const {
        if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
        if (x_grid.empty()) throw std::invalid_argument("config: empty x_grid");
        for (std::size_t i = 0; i < x_grid.size(); ++i) {
            if (!(x_grid[i] > 0.0)) throw std::invalid_argument("config: x_grid must be positive");
            if (i > 0 && !(x_grid[i] > x_grid[i - 1])) throw std::invalid_argument("config: x_grid must be increasing");
        }
        if (node_cap < 1 || step_cap < 1) throw std::invalid_argument("config: caps must be >= 1");
        if ((target == Target::stable || target == Target::stable_attempt) && !alpha)
            throw std::invalid_argument("config: target " + std::string(to_string(target)) + " needs alpha");
        if (alpha && !(*alpha > 1.0 && *alpha <= 2.0)) throw std::invalid_argument("config: alpha must lie in (1, 2]");
        if (target == Target::interval && cases.empty()) throw std::invalid_argument("config: interval target needs cases");
        for (const auto& c : cases)
            if (!(c.a <= c.z && c.z < c.b)) throw std::invalid_argument("config: interval case needs a <= z < b");
        if (target == Target::upcrossing && !(0 < up_x && up_x < up_y))
            throw std::invalid_argument("config: upcrossing needs 0 < x < y");
        if (ell < 0 || ell > 30 || m < 0 || m > 30 || ell_max < 0 || ell_max > 30)
            throw std::invalid_argument("config: scales must lie in [0, 30]");
        if (!(epsilon > 0.0)) throw std::invalid_argument("config: epsilon must be positive");
        if (starts < 2) throw std::invalid_argument("config: starts must be >= 2");
        if (start < 1) throw std::invalid_argument("config: start must be positive");
        if (constant && !(*constant > 0.0)) throw std::invalid_argument("config: constant must be positive");
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        if (j.value("schema", std::string()) != kSchema)
            throw std::invalid_argument(std::string("config: schema must be \"") + kSchema + "\"");
        ExperimentConfig c;
        c.distribution = j.at("distribution");
        c.target = parse_target(j.at("target").get<std::string>());
        c.form = j.value("form", std::string());
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
        c.node_cap = j.value("node_cap", c.node_cap);
        c.step_cap = j.value("step_cap", c.step_cap);
        if (j.contains("x_grid")) c.x_grid = j.at("x_grid").get<std::vector<double>>();
        if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
        if (j.contains("constant")) c.constant = j.at("constant").get<double>();
        c.size_threshold = j.value("size_threshold", c.size_threshold);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.ell = j.value("ell", c.ell);
        c.start = j.value("start", c.start);
        if (j.contains("upcrossing")) {
            c.up_x = j["upcrossing"].at("x").get<std::int64_t>();
            c.up_y = j["upcrossing"].at("y").get<std::int64_t>();
            if (!j.contains("start")) c.start = c.up_x;
        }
        if (j.contains("cases"))
            for (const auto& k : j.at("cases"))
                c.cases.push_back({k.at("a").get<std::int64_t>(), k.at("z").get<std::int64_t>(), k.at("b").get<std::int64_t>()});
        c.m = j.value("m", c.m);
        c.horizon = j.value("horizon", c.horizon);
        c.starts = j.value("starts", c.starts);
        c.ell_max = j.value("ell_max", c.ell_max);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = kSchema;
        j["distribution"] = distribution;
        j["target"] = to_string(target);
        if (!form.empty()) j["form"] = form;
        j["trials"] = trials;
        j["seed"] = seed;
        j["node_cap"] = node_cap;
        j["step_cap"] = step_cap;
        j["x_grid"] = x_grid;
        if (alpha) j["alpha"] = *alpha;
        if (constant) j["constant"] = *constant;
        j["size_threshold"] = size_threshold;
        j["epsilon"] = epsilon;
        j["ell"] = ell;
        j["start"] = start;
        j["upcrossing"] = {{"x", up_x}, {"y", up_y}};
        if (!cases.empty()) {
            j["cases"] = nlohmann::json::array();
            for (const auto& k : cases) j["cases"].push_back({{"a", k.a}, {"z", k.z}, {"b", k.b}});
        }
        j["m"] = m;
        j["horizon"] = horizon;
        j["starts"] = starts;
        j["ell_max"] = ell_max;
        return j;
    }
};

struct TailRow {
    double x;
    std::uint64_t trials;
    std::uint64_t hits;
    double p_hat, ci_lo, ci_hi;
    double bound;
    bool pass;

    bool operator==(const TailRow&) const = default;
};

struct TailReport {
    std::string target;
    std::string form;
    nlohmann::json distribution;   // as configured
    nlohmann::json simulated;      // law actually simulated (the dual for supercritical input)
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    bool fitted = false;
    double C_hat = std::numeric_limits<double>::quiet_NaN();  // +inf when no grid C passes
    std::uint64_t censored = 0;
    double censoring_rate = 0.0;
    std::vector<TailRow> rows;
    bool verdict = false;
    std::vector<std::string> notes;
    nlohmann::json extra = nlohmann::json::object();
};

// ---------------------------------------------------------------------------
// Constant fitting

inline constexpr int kCGridLo = -80, kCGridHi = 80;  // C = 2^{k/8}

inline double c_grid(int k) { return std::exp2(static_cast<double>(k) / 8.0); }

/// One realisation of a fitted-constant target: a per-trial statistic r and
/// the event {r > thr(C, x)} (or >= when not strict), over `trials`
/// denominators of which only the entries of r can hit.
struct FittedSpec {
    std::vector<double> r;  // sorted
    std::uint64_t trials = 0;
    bool strict = true;
    std::function<double(double C, double x)> threshold;
    std::function<double(double C, double x)> bound;

    std::uint64_t hits(double thr) const {
        const auto it = strict ? std::upper_bound(r.begin(), r.end(), thr) : std::lower_bound(r.begin(), r.end(), thr);
        return static_cast<std::uint64_t>(r.end() - it);
    }
};

/// A grid point passes at C when nothing hit, or when the upper Wilson
/// limit is within the bound.
inline std::vector<TailRow> rows_at(const FittedSpec& spec, double C, const std::vector<double>& xs) {
    std::vector<TailRow> out;
    for (double x : xs) {
        const auto h = spec.hits(spec.threshold(C, x));
        const auto est = estimate_tail(h, spec.trials);
        const double b = spec.bound(C, x);
        out.push_back({x, spec.trials, h, est.p_hat, est.lo, est.hi, b, h == 0 || est.hi <= b});
    }
    return out;
}

struct FitResult {
    double C;  // +inf when none passes
    std::vector<TailRow> rows;  // at C, or at the largest grid C when none passes
};

/// Least C = 2^{k/8}, k in [-80, 80], at which every grid point passes.
inline FitResult fit_constant(const FittedSpec& spec, const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("fit_constant: empty grid");
    for (int k = kCGridLo; k <= kCGridHi; ++k) {
        const double C = c_grid(k);
        auto rows = rows_at(spec, C, xs);
        if (std::all_of(rows.begin(), rows.end(), [](const TailRow& r) { return r.pass; })) return {C, std::move(rows)};
    }
    return {detail::kInf, rows_at(spec, c_grid(kCGridHi), xs)};
}

/// Explicit-bound rows pass when p_hat <= bound + 3 Wilson half-widths.
inline TailRow explicit_row(double x, std::uint64_t hits, std::uint64_t trials, double bound) {
    const auto est = estimate_tail(hits, trials);
    return {x, trials, hits, est.p_hat, est.lo, est.hi, bound, est.p_hat <= bound + 3.0 * est.half_width()};
}

// ---------------------------------------------------------------------------
// Simulation

/// Tree summaries for trials 0..trials-1 on stream `seed`. Through the
/// breadth-first queue each summary is also the Lukasiewicz walk of the same
/// draws: size = sigma, max_queue = max S, harmonic = H(sigma).
inline std::vector<TreeSummary> simulate_trees(const OffspringDistribution& d, std::uint64_t trials,
                                               std::uint64_t seed, std::int64_t node_cap) {
    if (!(d.p0() > 0.0)) throw std::invalid_argument("simulate: need mu(0) > 0");
    return parallel_map(trials, [&](std::uint64_t i) { return sample_tree_summary(d, seed, i, node_cap); });
}

/// The law to simulate: supercritical input is replaced by its dual, which
/// is the law of the tree conditioned to be finite.
inline OffspringDistribution simulation_law(const OffspringDistribution& d, std::vector<std::string>* notes) {
    if (classify(d) != Criticality::supercritical) return d;
    if (notes) notes->push_back("supercritical input: simulated the dual law mu(i) q^{i-1}, i.e. conditioned on |T| < infinity");
    return dual(d);
}

/// sup_{1 <= i <= 10^6} i^alpha mu([i, infinity)).
inline double tail_constant_for(const OffspringDistribution& d, double alpha) {
    if (d.family() == Family::power && d.param() == alpha) return d.tail_constant();
    std::int64_t top = 1'000'000;
    if (auto s = d.support_max()) top = std::min(top, *s);
    double best = 0.0;
    for (std::int64_t i = 1; i <= top; ++i) {
        const double t = d.tail(i);
        if (t == 0.0) break;
        best = std::max(best, std::pow(static_cast<double>(i), alpha) * t);
    }
    return best;
}

namespace detail {

inline FittedSpec build_fitted(const ExperimentConfig& cfg, const OffspringDistribution& d,
                               const std::vector<TreeSummary>& recs, TailReport& rep) {
    FittedSpec spec;
    std::uint64_t usable = 0;
    for (const auto& t : recs) usable += t.truncated ? 0 : 1;
    spec.trials = usable;
    const double mu1 = d.p1();
    auto collect = [&](auto&& stat, auto&& keep) {
        for (const auto& t : recs)
            if (!t.truncated && keep(t)) spec.r.push_back(stat(t));
    };
    auto all = [](const TreeSummary&) { return true; };
    auto dbl = [](std::int64_t v) { return static_cast<double>(v); };

    switch (cfg.target) {
        case Target::general_width: {
            if (!(mu1 < 1.0)) throw std::invalid_argument("general-width: needs mu(1) < 1");
            collect([&](const TreeSummary& t) { return dbl(t.height) * (1.0 - mu1) / dbl(t.width); }, all);
            spec.strict = true;
            spec.threshold = [](double C, double x) { return C * x; };
            spec.bound = [](double, double x) { return std::exp(-x); };
            rep.notes.push_back("event ht > C x wid / (1 - mu(1)); bound exp(-x)");
            break;
        }
        case Target::general_volume: {
            if (!(mu1 < 1.0)) throw std::invalid_argument("general-volume: needs mu(1) < 1");
            collect([&](const TreeSummary& t) { return dbl(t.height) * std::sqrt((1.0 - mu1) / dbl(t.size)); }, all);
            spec.strict = true;
            spec.threshold = [](double C, double x) { return C * x; };
            spec.bound = [](double, double x) { return std::exp(-x * x); };
            rep.notes.push_back("event ht > C x (|T| / (1 - mu(1)))^{1/2}; bound exp(-x^2)");
            break;
        }
        case Target::fixed_var: {
            const double v = d.factorial_moment2();
            if (!(v > 0.0 && std::isfinite(v))) throw std::invalid_argument("fixed-var: needs sum i(i-1) mu(i) in (0, inf)");
            rep.extra["v"] = v;
            spec.strict = false;
            spec.threshold = [](double C, double x) { return C * x; };
            if (cfg.form == "width") {
                collect([&](const TreeSummary& t) { return dbl(t.height) / dbl(t.width); }, all);
                spec.bound = [v](double, double x) { return std::exp(-v * x); };
                rep.notes.push_back("event ht >= C x wid; bound exp(-v x)");
            } else if (cfg.form.empty() || cfg.form == "volume" || cfg.form == "conditional") {
                const bool cond = cfg.form == "conditional";
                const auto n = cfg.size_threshold;
                collect([&](const TreeSummary& t) { return dbl(t.height) / std::sqrt(dbl(t.size)); },
                        [&](const TreeSummary& t) { return !cond || t.size >= n; });
                if (cond) {
                    std::uint64_t den = 0;
                    for (const auto& t : recs) den += (!t.truncated && t.size >= n) ? 1 : 0;
                    spec.trials = den;
                    rep.notes.push_back("conditional on |T| >= " + std::to_string(n));
                }
                spec.bound = [v](double, double x) { return std::exp(-v * x * x); };
                rep.notes.push_back("event ht >= C x |T|^{1/2}; bound exp(-v x^2)");
            } else {
                throw std::invalid_argument("fixed-var: unknown form \"" + cfg.form + "\"");
            }
            break;
        }
        case Target::stable: {
            const double a = *cfg.alpha;
            const double M = tail_constant_for(d, a);
            rep.extra["tail_constant_M"] = M;
            spec.strict = false;
            if (cfg.form == "width") {
                collect([&](const TreeSummary& t) { return dbl(t.height) / std::pow(dbl(t.width), a - 1.0); }, all);
                spec.threshold = [a, M](double C, double x) { return x * std::pow(C * M / (a - 1.0), a); };
                spec.bound = [](double, double x) { return std::exp(-x); };
                rep.notes.push_back("event ht >= x (C M / (alpha - 1))^alpha wid^{alpha-1}; bound exp(-x)");
            } else {
                collect([&](const TreeSummary& t) { return dbl(t.height) / std::pow(dbl(t.size), (a - 1.0) / a); }, all);
                spec.threshold = [a, M](double C, double x) { return C * M * x / (a - 1.0); };
                spec.bound = [a](double, double x) { return std::exp(-std::pow(x, a)); };
                rep.notes.push_back("event ht >= C M x |T|^{(alpha-1)/alpha} / (alpha - 1); bound exp(-x^alpha)");
            }
            rep.notes.push_back("M is the tail constant sup_i i^alpha mu([i, inf)) over i <= 10^6");
            break;
        }
        case Target::hvol_finvar: {
            const double p0 = d.p1();  // P(X = 0)
            if (!(p0 < 1.0)) throw std::invalid_argument("hvol-finvar: needs P(X = 0) < 1");
            collect([&](const TreeSummary& t) { return t.harmonic * std::sqrt((1.0 - p0) / dbl(t.size)); }, all);
            spec.strict = false;
            spec.threshold = [](double C, double x) { return C * x; };
            spec.bound = [](double, double x) { return std::exp(-x * x); };
            rep.notes.push_back("event H(sigma) >= C x sigma^{1/2} / (1 - p0)^{1/2}; bound exp(-x^2)");
            break;
        }
        case Target::var_precise: {
            const double v = d.variance();
            if (!(v > 0.0 && std::isfinite(v))) throw std::invalid_argument("var-precise: needs finite positive variance");
            rep.extra["variance"] = v;
            const auto s = cfg.size_threshold;
            collect([&](const TreeSummary& t) { return t.harmonic / std::sqrt(dbl(t.size)); },
                    [&](const TreeSummary& t) { return t.size >= s; });
            spec.strict = false;
            spec.threshold = [](double, double x) { return x; };
            const double sd = static_cast<double>(s);
            spec.bound = [v, sd](double C, double x) { return std::min(1.0, C * x / std::sqrt(sd) * std::exp(-v * x * x / C)); };
            rep.notes.push_back("event H(sigma) >= x sigma^{1/2}, sigma >= " + std::to_string(s) +
                                "; bound (C x / s^{1/2}) exp(-v x^2 / C)");
            break;
        }
        case Target::stable_attempt: {
            const double a = *cfg.alpha;
            const auto table = exit_table_dp(step_distribution(d), cfg.ell_max);
            const double M = stable_scale_constant(table, a);
            rep.extra["scale_constant_M"] = M;
            nlohmann::json nl = nlohmann::json::object();
            for (const auto& [ell, e] : table.entries) nl[std::to_string(ell)] = e.n;
            rep.extra["n_ell"] = nl;
            collect([&](const TreeSummary& t) { return t.harmonic / std::pow(dbl(t.size), (a - 1.0) / a); }, all);
            spec.strict = true;
            spec.threshold = [a, M](double C, double x) { return C * M * x / (a - 1.0); };
            spec.bound = [a](double, double x) { return std::exp(-std::pow(x, a)); };
            rep.notes.push_back("event H(sigma) > (C M / (alpha - 1)) x sigma^{(alpha-1)/alpha}; bound exp(-x^alpha)");
            rep.notes.push_back("M = max n_l / 2^{alpha l} over l <= " + std::to_string(cfg.ell_max) + " (exact DP)");
            rep.notes.push_back("the statement's v is the grid variable x");
            break;
        }
        default: throw std::logic_error("build_fitted: not a fitted target");
    }
    std::sort(spec.r.begin(), spec.r.end());
    return spec;
}

inline void run_inf_var(const ExperimentConfig& cfg, const OffspringDistribution& d,
                        const std::vector<TreeSummary>& recs, TailReport& rep) {
    if (std::isfinite(d.variance()))
        throw std::invalid_argument("inf-var: needs sum i^2 mu(i) = infinity");
    const auto n = cfg.size_threshold;
    const double nd = static_cast<double>(n), eps = cfg.epsilon;
    const bool width = cfg.form == "width";
    std::uint64_t usable = 0;
    std::vector<double> r;
    for (const auto& t : recs) {
        if (t.truncated) continue;
        ++usable;
        if (t.size < n) continue;
        r.push_back(width ? static_cast<double>(t.height) / static_cast<double>(t.width)
                          : static_cast<double>(t.height) / std::sqrt(static_cast<double>(t.size)));
    }
    std::sort(r.begin(), r.end());
    for (double x : cfg.x_grid) {
        const auto hits = static_cast<std::uint64_t>(r.end() - std::lower_bound(r.begin(), r.end(), x));
        const double b = std::min(1.0, x / std::sqrt(nd) * std::exp(-(width ? x : x * x) / eps));
        rep.rows.push_back(explicit_row(x, hits, usable, b));
    }
    rep.notes.push_back(width ? "event ht >= x wid, sigma >= n; bound (x / n^{1/2}) exp(-x / eps)"
                              : "event ht >= x |T|^{1/2}, sigma >= n; bound (x / n^{1/2}) exp(-x^2 / eps)");
    rep.notes.push_back("one size threshold n = " + std::to_string(n) + " serves both sigma >= n and sigma >= s");
    rep.extra["epsilon"] = eps;
}

}  // namespace detail

/// Runs one experiment. Tree-based targets may reuse `shared` summaries
/// simulated with the same law, seed and trial count.
inline TailReport run_experiment(const ExperimentConfig& cfg, const std::vector<TreeSummary>* shared = nullptr) {
    cfg.validate();
    TailReport rep;
    rep.target = to_string(cfg.target);
    rep.form = cfg.form;
    rep.distribution = cfg.distribution;
    rep.trials = cfg.trials;
    rep.seed = cfg.seed;
    const auto input = OffspringDistribution::from_json(cfg.distribution);
    const auto d = simulation_law(input, &rep.notes);
    rep.simulated = d.to_json();
    const auto nu = step_distribution(d);

    if (uses_trees(cfg.target)) {
        std::vector<TreeSummary> own;
        if (!shared) own = simulate_trees(d, cfg.trials, cfg.seed, cfg.node_cap);
        const auto& recs = shared ? *shared : own;
        if (recs.size() != cfg.trials) throw std::invalid_argument("run_experiment: shared records do not match trials");
        for (const auto& t : recs) rep.censored += t.truncated ? 1 : 0;
        rep.censoring_rate = static_cast<double>(rep.censored) / static_cast<double>(cfg.trials);
        if (rep.censored > 0)
            rep.notes.push_back("trees cut at the node cap are excluded (conditioning on |T| <= cap)");
        if (cfg.target == Target::inf_var) {
            detail::run_inf_var(cfg, d, recs, rep);
        } else {
            const auto spec = detail::build_fitted(cfg, d, recs, rep);
            if (spec.trials == 0) throw std::runtime_error("run_experiment: no usable trials");
            if (cfg.constant) {
                rep.C_hat = *cfg.constant;
                rep.rows = rows_at(spec, *cfg.constant, cfg.x_grid);
            } else {
                rep.fitted = true;
                auto fit = fit_constant(spec, cfg.x_grid);
                rep.C_hat = fit.C;
                rep.rows = std::move(fit.rows);
            }
        }
    } else {
        switch (cfg.target) {
            case Target::nl_bd: {
                const int ell = cfg.ell;
                const auto n_ell = estimate_n_ell_dp(nu, ell).n;
                rep.extra["n_ell"] = n_ell;
                const bool harmonic = cfg.form == "harmonic";
                const double bmax = *std::max_element(cfg.x_grid.begin(), cfg.x_grid.end());
                const auto stop_at = harmonic ? std::numeric_limits<std::int64_t>::max()
                                              : static_cast<std::int64_t>(std::ceil(bmax * static_cast<double>(n_ell)));
                const auto res = parallel_map(cfg.trials, [&](std::uint64_t i) {
                    return occupation_trial(nu, ell, cfg.start, stop_at, cfg.step_cap, cfg.seed, i);
                });
                const double scale = std::ldexp(1.0, ell - 1);
                const double lead = std::min(1.0, static_cast<double>(cfg.start) / scale);
                for (const auto& o : res) rep.censored += o.censored ? 1 : 0;
                for (double b : cfg.x_grid) {
                    const double thr = b * static_cast<double>(n_ell);
                    std::uint64_t hits = 0;
                    for (const auto& o : res) {
                        const bool hit = harmonic ? o.h_ell >= thr / scale : static_cast<double>(o.n_ell) >= thr;
                        hits += (hit || o.censored) ? 1 : 0;
                    }
                    rep.rows.push_back(explicit_row(b, hits, cfg.trials, std::min(1.0, lead * std::exp2(1.0 - b / 18.0))));
                }
                rep.notes.push_back(harmonic ? "event H_l >= b n_l / 2^{l-1}" : "event N_l >= b n_l");
                rep.notes.push_back("bound min(1, z / 2^{l-1}) 2^{1 - b/18}; x is b; n_l from exact DP");
                rep.notes.push_back("walks still running at the step cap count as hits");
                break;
            }
            case Target::upcrossing: {
                const double kmax = *std::max_element(cfg.x_grid.begin(), cfg.x_grid.end());
                const auto U = parallel_map(cfg.trials, [&](std::uint64_t i) {
                    return upcrossing_trial(nu, cfg.up_x, cfg.up_y, cfg.start, static_cast<std::int64_t>(std::ceil(kmax)),
                                            cfg.seed, i);
                });
                const double ratio = static_cast<double>(cfg.up_x - 1) / static_cast<double>(cfg.up_y);
                for (double k : cfg.x_grid) {
                    std::uint64_t hits = 0;
                    for (auto u : U) hits += static_cast<double>(u) >= k ? 1 : 0;
                    rep.rows.push_back(explicit_row(k, hits, cfg.trials, std::pow(ratio, k)));
                }
                rep.notes.push_back("event U(sigma; [x, y)) >= k from start " + std::to_string(cfg.start) +
                                    "; bound ((x - 1) / y)^k; x column is k");
                rep.notes.push_back("tau_0^- = inf{t >= 0 : S_t < x}, so a start below x is already armed");
                break;
            }
            case Target::interval: {
                for (std::size_t c = 0; c < cfg.cases.size(); ++c) {
                    const auto k = cfg.cases[c];
                    const auto base = static_cast<std::uint64_t>(c) * cfg.trials;
                    const auto hits = parallel_count(cfg.trials, [&](std::uint64_t i) {
                        return exit_interval_trial(nu, k.a, k.z, k.b, cfg.seed, base + i);
                    });
                    const double b = static_cast<double>(k.z + 1 - k.a) / static_cast<double>(k.b + 1 - k.a);
                    rep.rows.push_back(explicit_row(static_cast<double>(c + 1), hits, cfg.trials, b));
                }
                rep.notes.push_back("event S_tau >= b on leaving [a, b) from z; bound (z + 1 - a) / (b + 1 - a); x is the case number");
                break;
            }
            case Target::generic_budget: {
                const int m = cfg.m;
                const std::int64_t s = cfg.horizon > 0 ? cfg.horizon : (std::int64_t{1} << (2 * (m + 1)));
                const auto table = exit_table_dp(nu, m);
                nlohmann::json nl = nlohmann::json::object();
                for (const auto& [ell, e] : table.entries) nl[std::to_string(ell)] = e.n;
                rep.extra["n_ell"] = nl;
                rep.extra["s"] = s;
                const auto H = parallel_map(cfg.trials, [&](std::uint64_t i) { return harmonic_until(nu, s, cfg.seed, i); });
                nlohmann::json budgets = nlohmann::json::array();
                for (double B : cfg.x_grid) {
                    std::vector<double> b(static_cast<std::size_t>(m + 1));
                    for (int ell = 0; ell <= m; ++ell) b[static_cast<std::size_t>(ell)] = B * std::exp2((m - ell) / 2.0);
                    const auto bb = budget(b, table);
                    const double thr = bb.V + static_cast<double>(s) / std::ldexp(1.0, m - 1);
                    std::uint64_t hits = 0;
                    for (double h : H) hits += h > thr ? 1 : 0;
                    rep.rows.push_back(explicit_row(B, hits, cfg.trials, std::min(1.0, bb.Delta)));
                    budgets.push_back({{"B", B}, {"V", bb.V}, {"Delta", bb.Delta}});
                }
                rep.extra["budgets"] = budgets;
                rep.notes.push_back("event H(s) > V(b) + s / 2^{m-1} with b_l = B 2^{(m-l)/2}; bound Delta(b); x is B");
                break;
            }
            case Target::exit_time: {
                const int ell = cfg.ell;
                const auto n_ell = estimate_n_ell_dp(nu, ell).n;
                rep.extra["n_ell"] = n_ell;
                const auto w = scale_window(ell);
                std::vector<std::int64_t> xs;
                const std::int64_t W = w.hi - w.lo;
                const int k = std::min<std::int64_t>(cfg.starts, W);
                for (int i = 0; i < k; ++i) xs.push_back(w.lo + (W - 1) * i / std::max(1, k - 1));
                rep.extra["starts"] = xs;
                const double kmax = *std::max_element(cfg.x_grid.begin(), cfg.x_grid.end());
                const auto cap = static_cast<std::int64_t>(std::ceil(kmax)) * n_ell;
                std::vector<std::vector<std::int64_t>> taus(xs.size());
                for (std::size_t j = 0; j < xs.size(); ++j) {
                    const auto base = static_cast<std::uint64_t>(j) * cfg.trials;
                    taus[j] = parallel_map(cfg.trials, [&](std::uint64_t i) {
                        return exit_time_trial(nu, ell, xs[j], cap, cfg.seed, base + i);
                    });
                }
                for (double kk : cfg.x_grid) {
                    const double thr = kk * static_cast<double>(n_ell);
                    std::optional<TailRow> worst;
                    bool all_pass = true;
                    for (const auto& tj : taus) {
                        std::uint64_t hits = 0;
                        for (auto t : tj) hits += static_cast<double>(t) >= thr ? 1 : 0;
                        const auto row = explicit_row(kk, hits, cfg.trials, std::exp2(-kk));
                        all_pass = all_pass && row.pass;
                        if (!worst || row.p_hat > worst->p_hat) worst = row;
                    }
                    worst->pass = all_pass;
                    rep.rows.push_back(*worst);
                }
                rep.notes.push_back("event tau_l >= k n_l from each start; row shows the worst start; bound 2^{-k}; x is k");
                break;
            }
            default: throw std::logic_error("run_experiment: unhandled target");
        }
        rep.censoring_rate = static_cast<double>(rep.censored) / static_cast<double>(cfg.trials);
    }
    rep.verdict = !rep.rows.empty() && std::all_of(rep.rows.begin(), rep.rows.end(), [](const TailRow& r) { return r.pass; });
    if (rep.fitted && !std::isfinite(rep.C_hat)) rep.verdict = false;
    return rep;
}

}  // namespace gwtails
