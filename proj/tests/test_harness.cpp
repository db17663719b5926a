#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gwtails/emit.hpp"
#include "gwtails/harness.hpp"

using namespace gwtails;
namespace fs = std::filesystem;

namespace {

nlohmann::json base_config(const std::string& target) {
    return {{"schema", "gwtails/1"}, {"distribution", catalog_law("binary").to_json()}, {"target", target},
            {"trials", 20000}, {"seed", 3}};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("gwtails_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Wilson, Examples) {
    const auto z = estimate_tail(0, 100);
    EXPECT_EQ(z.p_hat, 0.0);
    EXPECT_EQ(z.lo, 0.0);
    EXPECT_NEAR(z.hi, 0.0370, 1e-4);
    const auto h = estimate_tail(50, 100);
    EXPECT_NEAR(0.5 - h.lo, h.hi - 0.5, 1e-15);
    const auto one = estimate_tail(1, 1);
    EXPECT_EQ(one.hi, 1.0);
    EXPECT_LT(one.lo, 1.0);
    EXPECT_THROW(estimate_tail(0, 0), std::invalid_argument);
    EXPECT_THROW(estimate_tail(3, 2), std::invalid_argument);
}

TEST(FitConstant, Examples) {
    FittedSpec none;
    none.trials = 1000;
    none.threshold = [](double C, double x) { return C * x; };
    none.bound = [](double, double x) { return std::exp(-x); };
    const auto f0 = fit_constant(none, {1, 2, 3});
    EXPECT_EQ(f0.C, c_grid(kCGridLo));

    auto spec = none;
    spec.r.assign(500, 1.0);  // half the trials at r = 1
    const auto f1 = fit_constant(spec, {1.0});
    EXPECT_GE(f1.C, 1.0);
    EXPECT_LT(f1.C, std::exp2(1.0 / 8.0));
    EXPECT_TRUE(f1.rows[0].pass);

    spec.bound = [](double, double) { return 0.0; };
    spec.strict = false;
    const auto f2 = fit_constant(spec, {1.0});
    EXPECT_GT(f2.C, 1.0);

    spec.r.assign(1000, 1e300);
    EXPECT_TRUE(std::isinf(fit_constant(spec, {1.0}).C));
    EXPECT_THROW(fit_constant(spec, {}), std::invalid_argument);
}

TEST(ExplicitRow, Rule) {
    EXPECT_TRUE(explicit_row(1, 0, 100, 0.0).pass);
    EXPECT_TRUE(explicit_row(1, 10, 100, 0.1).pass);
    EXPECT_FALSE(explicit_row(1, 500, 1000, 0.1).pass);
}

TEST(Config, Validation) {
    auto j = base_config("stable");
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
    j["alpha"] = 1.5;
    EXPECT_NO_THROW(ExperimentConfig::from_json(j));
    j["alpha"] = 2.5;
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);

    j = base_config("general-width");
    j["schema"] = "other/1";
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
    j = base_config("no-such-target");
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
    j = base_config("general-width");
    j["x_grid"] = {2.0, 1.0};
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
    j = base_config("interval");
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
    j["cases"] = {{{"a", 1}, {"z", 5}, {"b", 5}}};
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
    j = base_config("upcrossing");
    j["upcrossing"] = {{"x", 8}, {"y", 4}};
    EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
}

TEST(Config, RoundTrip) {
    auto j = base_config("upcrossing");
    j["upcrossing"] = {{"x", 4}, {"y", 16}};
    const auto c = ExperimentConfig::from_json(j);
    EXPECT_EQ(c.start, 4);
    const auto d = ExperimentConfig::from_json(c.to_json());
    EXPECT_EQ(d.to_json(), c.to_json());
}

TEST(Emit, EmptyGridAndRoundTrip) {
    TailReport empty;
    EXPECT_EQ(tails_csv(empty), std::string(kCsvHeader) + "\n");
    EXPECT_TRUE(parse_tails_csv(tails_csv(empty)).empty());
    EXPECT_NE(tails_svg(empty).find("<svg"), std::string::npos);

    const auto rep = run_experiment(ExperimentConfig::from_json(base_config("general-volume")));
    const auto back = parse_tails_csv(tails_csv(rep));
    EXPECT_EQ(back, rep.rows);
    const auto r2 = report_from_json(report_to_json(rep));
    EXPECT_EQ(r2.rows, rep.rows);
    EXPECT_EQ(r2.C_hat, rep.C_hat);
    EXPECT_EQ(r2.verdict, rep.verdict);
    EXPECT_EQ(report_to_json(r2), report_to_json(rep));
    EXPECT_EQ(format_double(detail::kInf), "inf");
    EXPECT_TRUE(std::isinf(parse_double("inf")));
}

TEST(Emit, WritesAllOutputs) {
    const auto dir = scratch("emit");
    const auto rep = run_experiment(ExperimentConfig::from_json(base_config("general-width")));
    emit_report(rep, dir);
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "tails.csv"));
    EXPECT_TRUE(fs::exists(dir / "plots" / "general-width.svg"));
    EXPECT_EQ(read_text(dir / "tails.csv"), tails_csv(rep));
    fs::remove_all(dir);
}

TEST(RunExperiment, ThreadCountInvariant) {
    for (const auto& t : {"general-width", "nl-bd", "upcrossing"}) {
        auto j = base_config(t);
        ::setenv("GWTAILS_THREADS", "1", 1);
        const auto a = tails_csv(run_experiment(ExperimentConfig::from_json(j)));
        ::setenv("GWTAILS_THREADS", "8", 1);
        const auto b = tails_csv(run_experiment(ExperimentConfig::from_json(j)));
        ::unsetenv("GWTAILS_THREADS");
        EXPECT_EQ(a, b) << t;
    }
}

TEST(RunExperiment, SupercriticalUsesDual) {
    auto j = base_config("general-width");
    j["distribution"] = catalog_law("binary-super").to_json();
    const auto rep = run_experiment(ExperimentConfig::from_json(j));
    EXPECT_NEAR(rep.simulated.at("pmf").at("0").get<double>(), 0.75, 1e-12);
    EXPECT_FALSE(rep.notes.empty());
}

TEST(RunExperiment, TargetGuards) {
    auto j = base_config("inf-var");
    EXPECT_THROW(run_experiment(ExperimentConfig::from_json(j)), std::invalid_argument);
    j = base_config("general-width");
    j["distribution"] = OffspringDistribution::finite({{0, 0.5}, {2, 0.5}}).to_json();
    j["trials"] = 10;
    j["constant"] = 1.0;
    const auto rep = run_experiment(ExperimentConfig::from_json(j));
    EXPECT_FALSE(rep.fitted);
    EXPECT_EQ(rep.C_hat, 1.0);
}

TEST(RunExperiment, ExplicitTargetsPass) {
    auto j = base_config("interval");
    j["cases"] = {{{"a", 1}, {"z", 3}, {"b", 8}}, {{"a", 2}, {"z", 2}, {"b", 20}}};
    auto rep = run_experiment(ExperimentConfig::from_json(j));
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(rep.rows[0].bound, 3.0 / 8.0);
    EXPECT_TRUE(rep.verdict);

    j = base_config("upcrossing");
    j["x_grid"] = {1, 2, 3};
    rep = run_experiment(ExperimentConfig::from_json(j));
    EXPECT_TRUE(rep.verdict);

    j = base_config("exit-time");
    j["x_grid"] = {1, 2, 3};
    j["ell"] = 2;
    j["trials"] = 5000;
    rep = run_experiment(ExperimentConfig::from_json(j));
    EXPECT_TRUE(rep.verdict);
}

#ifdef GWTAILS_CLI
TEST(Cli, VerifyWritesOutputs) {
    const auto dir = scratch("cli");
    auto j = base_config("interval");
    j["cases"] = {{{"a", 1}, {"z", 3}, {"b", 8}}};
    j["trials"] = 2000;
    write_text(dir / "cfg.json", j.dump());
    const std::string cmd = std::string(GWTAILS_CLI) + " verify --config " + (dir / "cfg.json").string() +
                            " --out-dir " + (dir / "out").string() + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    EXPECT_EQ(WEXITSTATUS(rc), 0);
    const auto csv = read_text(dir / "out" / "tails.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
    EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "out" / "plots" / "interval.svg"));

    write_text(dir / "bad.json", R"({"schema":"gwtails/1"})");
    const int bad = std::system((std::string(GWTAILS_CLI) + " verify --config " + (dir / "bad.json").string() +
                                 " --out-dir " + (dir / "o2").string() + " > /dev/null 2>&1").c_str());
    EXPECT_EQ(WEXITSTATUS(bad), 2);
    fs::remove_all(dir);
}
#endif
