#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwtails/conc.hpp"
#include "gwtails/emit.hpp"
#include "gwtails/harness.hpp"
#include "gwtails/oracle.hpp"
#include "gwtails/parallel.hpp"
#include "gwtails/scales.hpp"
#include "gwtails/treegen.hpp"
#include "gwtails/walk.hpp"

using namespace gwtails;
namespace fs = std::filesystem;

namespace {

// A catalog name, inline JSON, or @file holding JSON.
nlohmann::json dist_json(const std::string& arg) {
    if (!arg.empty() && arg.front() == '@') return nlohmann::json::parse(read_text(arg.substr(1)));
    if (!arg.empty() && arg.front() == '{') return nlohmann::json::parse(arg);
    return catalog_law(arg).to_json();
}

OffspringDistribution parse_dist(const std::string& arg) { return OffspringDistribution::from_json(dist_json(arg)); }

// Writes to `path`, or stdout for "-" or empty.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (path.empty() || path == "-") return;
        if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
        path_ = path;
    }
    std::ostream& out() { return file_ ? *file_ : std::cout; }
    void close() {
        if (file_ && !file_->flush()) throw std::runtime_error("write failed: " + path_);
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::string path_;
};

std::string num(double v) { return format_double(v); }

struct Common {
    std::string dist = "binary";
    std::uint64_t trials = 1000;
    std::uint64_t seed = 1;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, const char* out_flag) {
    sub->add_option("--dist", c.dist, "catalog name, inline JSON or @file")->required();
    sub->add_option("--trials", c.trials, "number of trials")->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "stream seed");
    sub->add_option(out_flag, c.out, "output CSV (default stdout)");
}

int cmd_sample(const Common& c, std::int64_t node_cap) {
    const auto d = parse_dist(c.dist);
    const auto rows = parallel_map(c.trials, [&](std::uint64_t i) { return sample_tree_summary(d, c.seed, i, node_cap); });
    Sink sink(c.out);
    auto& o = sink.out();
    o << "trial,size,height,width,max_queue,harmonic_bound,truncated\n";
    for (std::uint64_t i = 0; i < rows.size(); ++i) {
        const auto& t = rows[i];
        o << i << ',' << t.size << ',' << t.height << ',' << t.width << ',' << t.max_queue << ','
          << num(3.0 * t.harmonic) << ',' << (t.truncated ? 1 : 0) << '\n';
    }
    sink.close();
    return 0;
}

int cmd_walk(const Common& c, std::int64_t step_cap) {
    const auto nu = step_distribution(parse_dist(c.dist));
    const auto paths = parallel_map(c.trials, [&](std::uint64_t i) { return simulate(nu, c.seed, i, step_cap); });
    Sink sink(c.out);
    auto& o = sink.out();
    o << "trial,sigma,max_s,h_sigma,censored\n";
    for (std::uint64_t i = 0; i < paths.size(); ++i) {
        const auto& p = paths[i];
        o << i << ',' << p.length << ',' << p.max_s << ',' << num(p.h_sigma) << ',' << (p.censored ? 1 : 0) << '\n';
    }
    sink.close();
    return 0;
}

int cmd_scales(const Common& c, std::int64_t step_cap) {
    const auto nu = step_distribution(parse_dist(c.dist));
    struct Row {
        int ell;
        std::int64_t n;
        double h;
        std::int64_t m, u_low, u_high;
    };
    std::uint64_t censored = 0;
    const auto per_trial = parallel_map(c.trials, [&](std::uint64_t i) {
        std::vector<Row> rows;
        const auto p = simulate(nu, c.seed, i, step_cap, Retain::full);
        if (p.censored) return rows;
        const auto d = decompose(p);
        for (const auto& r : check_up_bd(d, p))
            rows.push_back({r.ell, d.N(r.ell), d.H(r.ell), r.visits, r.u_low, r.u_high});
        return rows;
    });
    Sink sink(c.out);
    auto& o = sink.out();
    o << "trial,ell,N_ell,H_ell,M_ell,U_low,U_high\n";
    for (std::uint64_t i = 0; i < per_trial.size(); ++i) {
        if (per_trial[i].empty()) ++censored;
        for (const auto& r : per_trial[i])
            o << i << ',' << r.ell << ',' << r.n << ',' << num(r.h) << ',' << r.m << ',' << r.u_low << ',' << r.u_high << '\n';
    }
    sink.close();
    if (censored > 0) std::cerr << censored << " path(s) reached the step cap and were skipped\n";
    return 0;
}

int cmd_nl(const Common& c, int ell_max, const std::string& method, std::uint64_t per_start) {
    const auto nu = step_distribution(parse_dist(c.dist));
    std::vector<ScaleExitEntry> rows;
    if (method == "dp") {
        for (auto& [ell, e] : exit_table_dp(nu, ell_max).entries) rows.push_back(e);
    } else {
        for (int ell = 0; ell <= ell_max; ++ell) rows.push_back(estimate_n_ell_mc(nu, ell, per_start, c.seed));
    }
    Sink sink(c.out);
    auto& o = sink.out();
    o << "ell,n_ell,n_lower,method,n_over_4pow\n";
    for (const auto& e : rows)
        o << e.ell << ',' << e.n << ',' << e.n_lower << ',' << to_string(e.method) << ','
          << num(static_cast<double>(e.n) / std::ldexp(1.0, 2 * e.ell)) << '\n';
    sink.close();
    return 0;
}

int cmd_qcheck(const std::string& dist, const std::vector<std::int64_t>& n_grid, double L, const std::string& out) {
    const auto nu = step_distribution(parse_dist(dist));
    const auto r = kesten_check(nu, n_grid, L);
    Sink sink(out);
    auto& o = sink.out();
    o << "n,Q,Q_dyadic,ratio_moment,ratio_atom,ratio_disperse,escaped\n";
    for (const auto& row : r.rows)
        o << row.n << ',' << num(row.Q) << ',' << num(row.Q_dyadic) << ',' << num(row.ratio_moment) << ','
          << num(row.ratio_atom) << ',' << num(row.ratio_disperse) << ',' << num(row.escaped) << '\n';
    sink.close();
    std::cerr << "L=" << num(r.L) << " C_moment=" << num(r.C_moment) << " C_atom=" << num(r.C_atom)
              << " C_disperse=" << num(r.C_disperse) << " spread_moment=" << num(r.spread_moment)
              << " spread_atom=" << num(r.spread_atom) << '\n';
    return 0;
}

int cmd_oracle(const std::string& what, const std::string& dist, std::int64_t n, const std::string& out) {
    const auto d = parse_dist(dist);
    Sink sink(out);
    auto& o = sink.out();
    if (what == "size-pmf") {
        const auto p = size_pmf_table(step_distribution(d), n);
        o << "n,p\n";
        for (std::int64_t k = 1; k <= n; ++k) o << k << ',' << num(p[static_cast<std::size_t>(k)]) << '\n';
    } else if (what == "height-cdf") {
        const auto p = height_cdf_table(d, n);
        o << "n,p_height_below\n";
        for (std::int64_t k = 0; k <= n; ++k) o << k << ',' << num(p[static_cast<std::size_t>(k)]) << '\n';
    } else {
        const auto e = enumerate(d, n);
        o << "counts,probability,size,height,width\n";
        for (const auto& t : e.trees) {
            std::string cs;
            for (auto v : t.counts) cs += (cs.empty() ? "" : " ") + std::to_string(v);
            o << cs << ',' << num(t.probability) << ',' << t.size << ',' << t.height << ',' << t.width << '\n';
        }
    }
    sink.close();
    return 0;
}

int cmd_verify(const std::string& config, const std::string& out_dir) {
    const auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(read_text(config)));
    const auto rep = run_experiment(cfg);
    emit_report(rep, out_dir);
    std::cout << rep.target << ": " << (rep.verdict ? "pass" : "fail");
    if (rep.fitted) std::cout << " (C = " << num(rep.C_hat) << ")";
    std::cout << ", censoring " << num(rep.censoring_rate) << '\n';
    return rep.verdict ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Galton-Watson height, width and volume tails"};
    app.require_subcommand(1);

    Common sample_c, walk_c, scales_c, nl_c;
    std::int64_t node_cap = kDefaultNodeCap, step_cap = kDefaultStepCap, scales_cap = 1'000'000;
    auto* sample = app.add_subcommand("sample", "simulate trees and print per-tree statistics");
    add_common(sample, sample_c, "--out");
    sample->add_option("--node-cap", node_cap, "node cap per tree")->check(CLI::PositiveNumber);

    auto* walk = app.add_subcommand("walk", "simulate the queue walk until absorption");
    add_common(walk, walk_c, "--stats");
    walk->add_option("--step-cap", step_cap, "step cap per walk")->check(CLI::PositiveNumber);

    auto* scales = app.add_subcommand("scales", "per-scale occupation, harmonic mass, visits and upcrossings");
    add_common(scales, scales_c, "--per-scale");
    scales->add_option("--step-cap", scales_cap, "step cap per retained path")->check(CLI::PositiveNumber);

    int ell_max = 8;
    std::string method = "dp";
    std::uint64_t per_start = 2000;
    auto* nl = app.add_subcommand("nl", "scale exit times n_l");
    nl->add_option("--dist", nl_c.dist, "catalog name, inline JSON or @file")->required();
    nl->add_option("--ell-max", ell_max, "largest scale")->check(CLI::Range(0, 30));
    nl->add_option("--method", method, "dp or mc")->check(CLI::IsMember({"dp", "mc"}));
    nl->add_option("--trials", per_start, "Monte Carlo trials per start")->check(CLI::PositiveNumber);
    nl->add_option("--seed", nl_c.seed, "stream seed");
    nl->add_option("--out", nl_c.out, "output CSV (default stdout)");

    std::string q_dist, q_out;
    std::vector<std::int64_t> n_grid{100, 1000, 10000};
    double L = 1.0;
    auto* qcheck = app.add_subcommand("qcheck", "exact concentration function against both bounds");
    qcheck->add_option("--dist", q_dist, "catalog name, inline JSON or @file")->required();
    qcheck->add_option("--n-grid", n_grid, "walk lengths")->expected(1, -1);
    qcheck->add_option("--L", L, "window length")->check(CLI::PositiveNumber);
    qcheck->add_option("--out", q_out, "output CSV (default stdout)");

    std::string o_what, o_dist, o_out;
    std::int64_t o_n = 12;
    auto* oracle = app.add_subcommand("oracle", "exact size pmf, height cdf or tree enumeration");
    oracle->add_option("what", o_what, "size-pmf, height-cdf or enumerate")
        ->required()
        ->check(CLI::IsMember({"size-pmf", "height-cdf", "enumerate"}));
    oracle->add_option("--dist", o_dist, "catalog name, inline JSON or @file")->required();
    oracle->add_option("--n", o_n, "size or height limit");
    oracle->add_option("--out", o_out, "output CSV (default stdout)");

    std::string config, out_dir;
    auto* verify = app.add_subcommand("verify", "run an experiment config and write report, CSV and plot");
    verify->add_option("--config", config, "config JSON")->required()->check(CLI::ExistingFile);
    verify->add_option("--out-dir", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sample) return cmd_sample(sample_c, node_cap);
        if (*walk) return cmd_walk(walk_c, step_cap);
        if (*scales) return cmd_scales(scales_c, scales_cap);
        if (*nl) return cmd_nl(nl_c, ell_max, method, per_start);
        if (*qcheck) return cmd_qcheck(q_dist, n_grid, L, q_out);
        if (*oracle) return cmd_oracle(o_what, o_dist, o_n, o_out);
        if (*verify) return cmd_verify(config, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "gwtails: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
