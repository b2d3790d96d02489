#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "relaylab/config.hpp"
#include "relaylab/harness.hpp"

using namespace relaylab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir()
{
    const auto dir = fs::temp_directory_path() / ("relaylab_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(RELAYLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small_config()
{
    return parse_config("profile.n_relays = 1, 2\n"
                        "budget.rho_db = 0:5:20\n"
                        "budget.max_rounds = 4\n"
                        "analysis.methods = exact, upper_bound, direct\n"
                        "analysis.chi_tail = collapsed\n"
                        "analysis.l = 2, 4\n"
                        "sim.enabled = true\n"
                        "sim.trials = 20000\n"
                        "sim.seed = 5\n");
}

} // namespace

TEST(Config, ParsesKeysListsAndRanges)
{
    const auto c = parse_config("# comment line\n"
                                "profile.n_relays = 1, 2,4   # trailing comment\n"
                                "profile.sigma2_f = 2\n"
                                "profile.sigma2_g = 0.5\n"
                                "profile.sigma2_f0 = 1.5\n"
                                "budget.rho_db = 0:2:40\n"
                                "budget.rate = 2\n"
                                "budget.max_rounds = 3\n"
                                "analysis.methods = exact, upper_bound\n"
                                "analysis.chi_tail = verbatim, collapsed\n"
                                "analysis.l = 1,3\n"
                                "sim.enabled = yes\n"
                                "sim.combining = beamforming\n"
                                "sim.trials = 5000\n"
                                "sim.seed = 99\n"
                                "qos.rho_max = 1e-3\n"
                                "output.path = out.csv\n");
    EXPECT_EQ(c.n_relays, (std::vector<std::size_t>{1, 2, 4}));
    ASSERT_EQ(c.grid.size(), 21u);
    EXPECT_EQ(c.grid.back().rho_db, 40.0);
    EXPECT_DOUBLE_EQ(c.grid[5].rho, std::pow(10.0, 1.0));
    EXPECT_EQ(c.rate, 2.0);
    EXPECT_EQ(c.max_rounds, 3);
    EXPECT_EQ(c.outage_methods().size(), 4u);
    EXPECT_EQ(c.rounds(), (std::vector<int>{1, 3}));
    EXPECT_TRUE(c.sim_enabled);
    EXPECT_EQ(c.combining, Combining::Beamforming);
    EXPECT_EQ(c.trials, 5000u);
    EXPECT_EQ(c.seed, 99u);
    EXPECT_EQ(c.rho_max, std::optional<double>(1e-3));
    EXPECT_EQ(c.output_path, "out.csv");
    EXPECT_EQ(c.profile(2).sigma2_f, (std::vector<double>{2.0, 2.0}));
}

TEST(Config, RangeEndpointAndMixedLists)
{
    const auto c = parse_config("budget.rho_db = 0:0.1:0.3, 10, 20:5:30\n");
    std::vector<double> got;
    for (const auto& g : c.grid) got.push_back(g.rho_db);
    ASSERT_EQ(got.size(), 8u);
    EXPECT_NEAR(got[3], 0.3, 1e-15);
    EXPECT_EQ(got[4], 10.0);
    EXPECT_EQ(got[5], 20.0);
    EXPECT_EQ(got[7], 30.0);
}

TEST(Config, FieldLevelErrors)
{
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message("budget.rho_db = 0\nfoo.bar = 1\n").find("line 2: unknown key 'foo.bar'"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nbudget.rho_db = 1\n").find("already set on line 1"), std::string::npos);
    EXPECT_NE(message("profile.n_relays = 2\n").find("budget.rho_db"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = abc\n").find("not a finite number"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0:0:4\n").find("step > 0"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nsim.enabled = true\nsim.trials = 10\n").find("sim.trials"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nanalysis.l = 9\n").find("analysis.l"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nprofile.n_relays = 3\nprofile.sigma2_f = 1, 2\n").find("profile.sigma2_f"),
              std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nprofile.n_relays = 0\n").find("analysis.methods"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nanalysis.methods = approx\nprofile.sigma2_f = 2\n").find("approx"),
              std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nanalysis.methods = asymptotic\nanalysis.l = 1\n").find("l >= 2"),
              std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nqos.rho_max = 0\n").find("qos.rho_max"), std::string::npos);
    EXPECT_NE(message("budget.rho_db = 0\nanalysis.chi_tail = both\n").find("chi_tail"), std::string::npos);
    EXPECT_NE(message("just words\n").find("key = value"), std::string::npos);
    EXPECT_EQ(message("budget.rho_db = 0\nprofile.n_relays = 0\nanalysis.methods = direct\n"), "no error");
}

TEST(Config, SerializationRoundTrips)
{
    const auto c = parse_config("profile.n_relays = 3\nprofile.sigma2_f = 1, 2, 0.3\nprofile.sigma2_g = 0.1, 0.2, 5\n"
                                "budget.rho_db = -3.3:1.1:7\nqos.rho_max = 0.01\nsim.enabled = true\n"
                                "analysis.throughput = true\noutput.timing = true\n");
    const auto text = serialize_config(c);
    const auto again = parse_config(text);
    EXPECT_EQ(again, c);
    EXPECT_EQ(serialize_config(again), text);
}

TEST(Config, RandomConfigsRoundTrip)
{
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        ExperimentConfig c;
        c.n_relays = {1 + static_cast<std::size_t>(u(gen) * 5)};
        c.sigma2_f = {0.1 + 3 * u(gen)};
        c.sigma2_g = {0.1 + 3 * u(gen)};
        c.sigma2_f0 = 0.1 + 3 * u(gen);
        for (int i = 0; i < 1 + rep % 7; ++i) c.grid.push_back(GridPoint::from_db(-10 + 60 * u(gen)));
        c.rate = 0.1 + 4 * u(gen);
        c.max_rounds = 1 + rep % 6;
        c.methods = {OutageKind::Exact, OutageKind::UpperBound};
        c.chi_tails = {rep % 2 ? ChiTail::Collapsed : ChiTail::Verbatim};
        c.seed = gen();
        c.trials = 1000 + gen() % 100000;
        c.sim_enabled = rep % 3 == 0;
        if (rep % 4 == 0) c.rho_max = u(gen) * 0.5 + 1e-6;
        ASSERT_EQ(parse_config(serialize_config(c)), c) << serialize_config(c);
    }
}

TEST(Sweep, SingleDirectPoint)
{
    const auto c = parse_config("budget.rho_db = 0\nbudget.max_rounds = 1\nanalysis.methods = direct\n");
    const auto rows = run_sweep(c);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].method, "direct");
    EXPECT_EQ(rows[0].chi_tail, "none");
    EXPECT_FALSE(rows[0].ci3.has_value());
    EXPECT_DOUBLE_EQ(rows[0].value, 1.0 - std::exp(-1.0));
}

TEST(Sweep, RowsPerGridPointAndMethod)
{
    const auto c = small_config();
    const auto rows = run_sweep(c);
    // 2 relay counts x 5 SNRs x 2 rounds x (3 methods + simulation)
    EXPECT_EQ(rows.size(), 2u * 5 * 2 * 4);
    for (const auto& r : rows) {
        EXPECT_TRUE(std::isfinite(r.value));
        EXPECT_EQ(r.ci3.has_value(), r.is_simulation());
        EXPECT_EQ(r.wall_time_ms, 0.0);
    }
}

TEST(Sweep, FigureFiveShape)
{
    const auto c = parse_config("profile.n_relays = 1, 2, 3, 4\nbudget.rho_db = 0:2:40\nbudget.max_rounds = 5\n"
                                "analysis.methods = exact\nanalysis.chi_tail = collapsed\n");
    const auto rows = run_sweep(c);
    double prev_slope = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<std::pair<double, double>> pts;
        double prev = 2.0;
        for (const auto& r : rows) {
            if (r.n_relays != n) continue;
            EXPECT_LT(r.value, prev);
            prev = r.value;
            if (r.rho_db >= 30.0) pts.emplace_back(db_to_linear(r.rho_db), r.value);
        }
        const double slope = diversity_fit(pts);
        EXPECT_GT(slope, prev_slope);
        prev_slope = slope;
    }
}

TEST(Sweep, DeterministicAcrossRunsAndWorkers)
{
    const auto c = small_config();
    const auto a = format_csv(run_sweep(c, {1}));
    const auto b = format_csv(run_sweep(c, {1}));
    const auto d = format_csv(run_sweep(c, {3}));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, d);
    auto other = c;
    other.seed = 6;
    EXPECT_NE(format_csv(run_sweep(other, {1})), a);
}

TEST(Sweep, WallTimeScalesWithTrials)
{
    auto c = parse_config("profile.n_relays = 2\nbudget.rho_db = 5\nbudget.max_rounds = 5\nanalysis.methods =\n"
                          "sim.enabled = true\nsim.trials = 400000\n");
    auto time_it = [&](std::uint64_t trials) {
        c.trials = trials;
        const auto t0 = std::chrono::steady_clock::now();
        run_sweep(c, {1});
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    time_it(100000); // warm-up
    const double t1 = time_it(400000);
    const double t2 = time_it(800000);
    EXPECT_LE(t2, 2.5 * t1);
}

TEST(Sweep, ConvergenceFailuresAreFlaggedNotDropped)
{
    ResultRow r;
    detail::evaluate_into(r, []() -> double { throw NumericalError("no luck", 0.25, 1e-3); });
    EXPECT_TRUE(r.flagged);
    EXPECT_EQ(r.value, 0.25);
    EXPECT_EQ(r.note, "no luck");
}

TEST(Csv, GoldenFormat)
{
    std::vector<ResultRow> rows(2);
    rows[0].rho_db = 15;
    rows[0].n_relays = 2;
    rows[0].l = 2;
    rows[0].method = "exact";
    rows[0].chi_tail = "collapsed";
    rows[0].value = 1.0 / 3.0;
    rows[1].rho_db = -2.5;
    rows[1].n_relays = 4;
    rows[1].l = 5;
    rows[1].method = "sim-alamouti";
    rows[1].value = 3.4e-05;
    rows[1].ci3 = 1.74928556845e-05;
    rows[1].wall_time_ms = 12.5;
    EXPECT_EQ(format_csv(rows), "rho_db,n_relays,l,method,chi_tail,value,ci3,wall_time_ms\n"
                                "15,2,2,exact,collapsed,0.333333333333,,0\n"
                                "-2.5,4,5,sim-alamouti,none,3.4e-05,1.74928556845e-05,12.5\n");
}

TEST(Csv, EmptyRowsGiveHeaderOnlyFile)
{
    const auto path = temp_dir() / "empty.csv";
    emit_csv({}, path.string());
    EXPECT_EQ(read_file(path), std::string(kCsvHeader) + "\n");
    EXPECT_TRUE(load_csv(path.string()).empty());
}

TEST(Csv, RowRoundTrip)
{
    ResultRow r;
    r.rho_db = 12.25;
    r.n_relays = 3;
    r.l = 4;
    r.method = "upper_bound";
    r.chi_tail = "verbatim";
    r.value = 0.000123456789012;
    r.ci3 = 1e-7;
    r.wall_time_ms = 3.0;
    const auto back = parse_csv(format_csv({r}));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].rho_db, r.rho_db);
    EXPECT_EQ(back[0].n_relays, r.n_relays);
    EXPECT_EQ(back[0].l, r.l);
    EXPECT_EQ(back[0].method, r.method);
    EXPECT_EQ(back[0].chi_tail, r.chi_tail);
    EXPECT_EQ(back[0].value, r.value);
    EXPECT_EQ(back[0].ci3, r.ci3);
    EXPECT_EQ(back[0].wall_time_ms, r.wall_time_ms);
    EXPECT_EQ(format_csv(back), format_csv({r}));
}

TEST(Csv, TenThousandRowsParseAndSortStably)
{
    std::mt19937_64 gen(8);
    const char* methods[] = {"exact", "direct", "upper_bound", "sim-alamouti"};
    std::vector<ResultRow> rows(10000);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].rho_db = static_cast<double>(gen() % 21) * 2.0;
        rows[i].n_relays = gen() % 4 + 1;
        rows[i].l = static_cast<int>(i % 5) + 1;
        rows[i].method = methods[gen() % 4];
        rows[i].value = std::ldexp(static_cast<double>(gen() % 1000000), -20);
        if (rows[i].method == std::string("sim-alamouti")) rows[i].ci3 = 1e-4;
    }
    const auto text = format_csv(rows);
    auto back = parse_csv(text);
    ASSERT_EQ(back.size(), rows.size());
    EXPECT_EQ(format_csv(back), text);
    auto by = [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.method, a.rho_db) < std::tie(b.method, b.rho_db);
    };
    std::stable_sort(back.begin(), back.end(), by);
    std::stable_sort(rows.begin(), rows.end(), by);
    EXPECT_EQ(format_csv(back), format_csv(rows));
}

TEST(Csv, Errors)
{
    EXPECT_THROW(parse_csv("rho,n\n"), IoError);
    EXPECT_THROW(parse_csv(std::string(kCsvHeader) + "\n1,2,3\n"), IoError);
    EXPECT_THROW(parse_csv(std::string(kCsvHeader) + "\nx,2,3,exact,none,1,,0\n"), IoError);
    try {
        emit_csv({}, "/nonexistent-dir/out.csv");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/out.csv"), std::string::npos);
    }
}

TEST(CompareReport, IdenticalSeriesScoreZero)
{
    std::vector<ResultRow> rows;
    for (double db : {0.0, 5.0}) {
        ResultRow a;
        a.rho_db = db;
        a.n_relays = 2;
        a.l = 2;
        a.method = "exact";
        a.chi_tail = "collapsed";
        a.value = 0.1;
        ResultRow s = a;
        s.method = "sim-alamouti";
        s.chi_tail = "none";
        s.ci3 = 0.01;
        rows.push_back(a);
        rows.push_back(s);
    }
    const auto rep = compare_report(rows);
    ASSERT_EQ(rep.series.size(), 1u);
    EXPECT_EQ(rep.series[0].max_abs_z, 0.0);
    for (const auto& p : rep.points) EXPECT_EQ(p.z, 0.0);
    rows.pop_back();
    EXPECT_THROW(compare_report(rows), ConfigError);
}

TEST(CompareReport, CountsBoundViolations)
{
    ResultRow ub;
    ub.rho_db = 10;
    ub.n_relays = 2;
    ub.l = 2;
    ub.method = "upper_bound";
    ub.chi_tail = "collapsed";
    ub.value = 0.010;
    ResultRow sim = ub;
    sim.method = "sim-alamouti";
    sim.chi_tail = "none";
    sim.value = 0.013;
    sim.ci3 = 0.002;
    EXPECT_EQ(compare_report({ub, sim}).bound_violations, 1u);
    sim.value = 0.0115;
    EXPECT_EQ(compare_report({ub, sim}).bound_violations, 0u);
    EXPECT_THROW(compare_report({ub}), ConfigError);
}

TEST(CompareReport, UpperBoundHoldsOnSimulatedSweep)
{
    const auto rep = compare_report(run_sweep(small_config()));
    EXPECT_EQ(rep.bound_violations, 0u);
    EXPECT_FALSE(rep.series.empty());
    EXPECT_NE(rep.format().find("bound violations: 0"), std::string::npos);
}

TEST(FigData, ThroughputRowsDelayLimitedAboveLongTerm)
{
    FigOverrides o;
    o.trials = 20000;
    const auto rows = fig_data(FigureName::G3Throughput, o);
    std::map<std::tuple<std::size_t, double, std::string>, double> lt, dl;
    for (const auto& r : rows) {
        const auto src = r.method.substr(r.method.find(':') + 1);
        if (r.quantity() == "lt") lt[{r.n_relays, r.rho_db, src}] = r.value;
        if (r.quantity() == "dl") dl[{r.n_relays, r.rho_db, src}] = r.value;
    }
    ASSERT_FALSE(lt.empty());
    for (const auto& [k, v] : lt) {
        if (std::get<1>(k) >= 20.0 && std::get<2>(k) == "exact") { EXPECT_GE(dl.at(k), v); }
    }
    EXPECT_TRUE(std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.n_relays == 0; }));
}

TEST(FigData, SingleRelayPdfMatchesSimulation)
{
    FigOverrides o;
    o.trials = 1000000;
    o.n_relays = std::vector<std::size_t>{1};
    const auto rows = fig_data(FigureName::F1Pdf, o);
    const auto rep = compare_report(rows);
    // 40 bins per series: family-wise 1% level, two-sided.
    for (const auto& s : rep.series) EXPECT_LE(s.max_abs_z, 3.66) << s.method;
    for (const auto& r : rows) EXPECT_EQ(r.l, 0);
}

TEST(FigData, PresetsHaveExpectedParameters)
{
    const auto g2 = figure_config(FigureName::G2OutageSweep);
    EXPECT_EQ(g2.max_rounds, 5);
    EXPECT_EQ(g2.rounds(), std::vector<int>{5});
    EXPECT_EQ(g2.n_relays, (std::vector<std::size_t>{1, 2, 3, 4}));
    EXPECT_EQ(g2.trials, 3000000u);
    const auto g3 = figure_config(FigureName::G3Throughput);
    EXPECT_EQ(g3.max_rounds, 3);
    EXPECT_EQ(g3.rho_max, std::optional<double>(1e-3));
    const auto f3 = figure_config(FigureName::F3OutageL2);
    EXPECT_EQ(f3.rounds(), std::vector<int>{2});
    EXPECT_EQ(f3.n_relays, (std::vector<std::size_t>{2, 4}));
    EXPECT_EQ(parse_figure("g2-outage-sweep"), FigureName::G2OutageSweep);
    EXPECT_FALSE(parse_figure("g9").has_value());
}

TEST(Cli, ExitCodes)
{
    const auto dir = temp_dir();
    const auto good = dir / "good.cfg";
    std::ofstream(good) << "profile.n_relays = 2\nbudget.rho_db = 0:10:20\nanalysis.methods = exact, upper_bound\n"
                           "analysis.l = 2\nsim.trials = 20000\n";
    const auto bad = dir / "bad.cfg";
    std::ofstream(bad) << "budget.rho_db = 0\nbudget.max_rounds = -1\n";
    const auto out = dir / "out.csv";
    EXPECT_EQ(run_cli("analyze --config " + good.string() + " --out " + out.string()), 0);
    EXPECT_EQ(parse_csv(read_file(out)).size(), 6u);
    EXPECT_EQ(run_cli("sweep --check --config " + good.string() + " --out " + out.string()), 0);
    EXPECT_EQ(run_cli("simulate --config " + good.string() + " --trials 5000 --out " + out.string()), 0);
    EXPECT_EQ(parse_csv(read_file(out)).size(), 3u);
    EXPECT_EQ(run_cli("analyze --config " + bad.string()), 2);
    EXPECT_EQ(run_cli("analyze --config " + good.string() + " --chi-tail sideways"), 2);
    EXPECT_EQ(run_cli("analyze"), 2);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("fig g9"), 2);
    EXPECT_EQ(run_cli("fig f3-outage-l2 --trials 0 --out " + out.string()), 0);
    EXPECT_EQ(run_cli("selfcheck"), 0);
}
