// relaylab: outage and throughput analysis of relay-assisted HARQ.
//
//   relaylab analyze   --config sweep.cfg
//   relaylab simulate  --config sweep.cfg --trials 1000000
//   relaylab sweep     --config sweep.cfg --check
//   relaylab fig g2-outage-sweep --out g2.csv
//   relaylab selfcheck

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relaylab/config.hpp"
#include "relaylab/errors.hpp"
#include "relaylab/harness.hpp"
#include "relaylab/selfcheck.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitBoundViolation = 4;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    std::string chi_tail;
    std::string combining;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config)
{
    auto* c = cmd->add_option("--config", f.config, "experiment config file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "simulation seed");
    cmd->add_option("--trials", f.trials, "simulation trials per grid point");
    cmd->add_option("--chi-tail", f.chi_tail, "chi tail mode")->check(CLI::IsMember({"verbatim", "collapsed"}));
    cmd->add_option("--combining", f.combining, "relay combining")->check(CLI::IsMember({"alamouti", "beamforming"}));
    cmd->add_option("--out", f.out, "output CSV path (default: config output.path, else stdout)");
}

relaylab::ExperimentConfig load_with_overrides(const CommonFlags& f)
{
    auto cfg = relaylab::load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.trials) cfg.trials = *f.trials;
    if (!f.chi_tail.empty()) cfg.chi_tails = {*relaylab::parse_chi_tail(f.chi_tail)};
    if (!f.combining.empty()) cfg.combining = *relaylab::parse_combining(f.combining);
    if (!f.out.empty()) cfg.output_path = f.out;
    return cfg;
}

int write_rows(const std::vector<relaylab::ResultRow>& rows, const std::string& path)
{
    if (path.empty()) {
        relaylab::write_csv(rows, std::cout);
    } else {
        relaylab::emit_csv(rows, path);
    }
    int flagged = 0;
    for (const auto& r : rows) {
        if (r.flagged) {
            ++flagged;
            std::cerr << "warning: rho_db=" << r.rho_db << " n_relays=" << r.n_relays << " l=" << r.l
                      << " method=" << r.method << " did not converge (" << r.note << "); best estimate written\n";
        }
    }
    return flagged > 0 ? kExitNumerical : kExitOk;
}

int run_selfcheck_cmd()
{
    int failed = 0;
    for (const auto& r : relaylab::run_selfcheck()) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
        if (!r.passed) {
            ++failed;
            std::cout << ": " << r.detail;
        }
        std::cout << '\n';
    }
    return failed == 0 ? kExitOk : kExitFailure;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Delay-limited HARQ with opportunistic relay selection: analysis and simulation"};
    app.require_subcommand(1);

    CommonFlags analyze_f, simulate_f, sweep_f, fig_f;
    auto* analyze = app.add_subcommand("analyze", "evaluate the analytical outage expressions");
    add_common(analyze, analyze_f, true);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo outage estimates");
    add_common(simulate, simulate_f, true);
    auto* sweep = app.add_subcommand("sweep", "analysis and simulation with a comparison report");
    add_common(sweep, sweep_f, true);
    bool check = false;
    sweep->add_flag("--check", check, "exit 4 when the simulation exceeds the upper bound beyond 3 sigma");
    auto* fig = app.add_subcommand("fig", "data for a figure preset");
    std::string fig_name;
    fig->add_option("name", fig_name, "figure")
        ->required()
        ->check(CLI::IsMember({"f1-pdf", "f3-outage-l2", "g2-outage-sweep", "g3-throughput"}));
    add_common(fig, fig_f, false);
    auto* selfcheck = app.add_subcommand("selfcheck", "run the invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*selfcheck) return run_selfcheck_cmd();

        if (*fig) {
            relaylab::FigOverrides o;
            o.trials = fig_f.trials;
            o.seed = fig_f.seed;
            if (!fig_f.chi_tail.empty()) o.chi_tail = relaylab::parse_chi_tail(fig_f.chi_tail);
            if (!fig_f.combining.empty()) o.combining = relaylab::parse_combining(fig_f.combining);
            if (!fig_f.config.empty()) throw relaylab::ConfigError("fig: --config is not used by figure presets");
            const auto rows = relaylab::fig_data(*relaylab::parse_figure(fig_name), o);
            return write_rows(rows, fig_f.out);
        }

        if (*analyze) {
            auto cfg = load_with_overrides(analyze_f);
            cfg.sim_enabled = false;
            return write_rows(relaylab::run_sweep(cfg), cfg.output_path);
        }

        if (*simulate) {
            auto cfg = load_with_overrides(simulate_f);
            cfg.methods.clear();
            cfg.sim_enabled = true;
            return write_rows(relaylab::run_sweep(cfg), cfg.output_path);
        }

        auto cfg = load_with_overrides(sweep_f);
        cfg.sim_enabled = true;
        const auto rows = relaylab::run_sweep(cfg);
        const int rc = write_rows(rows, cfg.output_path);
        const auto report = relaylab::compare_report(rows);
        std::cerr << report.format();
        if (check && report.bound_violations > 0) return kExitBoundViolation;
        return rc;
    } catch (const relaylab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const relaylab::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << " (best estimate " << e.best_estimate() << ")\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
