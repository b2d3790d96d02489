#pragma once

// Sweep orchestration, CSV persistence, figure presets and
// analysis-versus-simulation comparison.
//
// Method tags: outage rows use the OutageKind name ("exact", ...) and
// "sim-alamouti"/"sim-beamforming" for simulation. Other quantities are
// prefixed: "pdf:", "lt:", "dl:", "feasible:". A tag whose source part starts
// with "sim" is a simulation series.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "relaylab/config.hpp"
#include "relaylab/errors.hpp"
#include "relaylab/fading_stats.hpp"
#include "relaylab/harq_analysis.hpp"
#include "relaylab/parallel.hpp"
#include "relaylab/protocol_sim.hpp"

namespace relaylab {

inline constexpr const char* kCsvHeader = "rho_db,n_relays,l,method,chi_tail,value,ci3,wall_time_ms";
inline constexpr const char* kNoTail = "none";

struct ResultRow {
    double rho_db = 0.0;
    std::size_t n_relays = 0;
    int l = 0;
    std::string method;
    std::string chi_tail = kNoTail;
    double value = 0.0;
    std::optional<double> ci3;
    double wall_time_ms = 0.0;

    // Not persisted.
    std::uint64_t trials = 0;
    /// Value is a best estimate from a computation that missed its tolerance.
    bool flagged = false;
    std::string note;

    bool is_simulation() const
    {
        const auto colon = method.find(':');
        const std::string source = colon == std::string::npos ? method : method.substr(colon + 1);
        return source.rfind("sim", 0) == 0;
    }

    std::string quantity() const
    {
        const auto colon = method.find(':');
        return colon == std::string::npos ? "outage" : method.substr(0, colon);
    }

    auto key() const { return std::tie(n_relays, rho_db, l, method, chi_tail); }
};

/// Sort order used for emission: (n_relays, rho_db, l, method, chi_tail).
inline void sort_rows(std::vector<ResultRow>& rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.key() < b.key(); });
}

// ---------------------------------------------------------------- CSV

inline std::string format_g12(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_csv(const std::vector<ResultRow>& rows, std::ostream& out)
{
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << format_g12(r.rho_db) << ',' << r.n_relays << ',' << r.l << ',' << r.method << ',' << r.chi_tail << ','
            << format_g12(r.value) << ',' << (r.ci3 ? format_g12(*r.ci3) : "") << ',' << format_g12(r.wall_time_ms)
            << '\n';
    }
}

inline std::string format_csv(const std::vector<ResultRow>& rows)
{
    std::ostringstream o;
    write_csv(rows, o);
    return o.str();
}

inline void emit_csv(const std::vector<ResultRow>& rows, const std::string& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path + ": cannot open for writing");
    write_csv(rows, f);
    f.flush();
    if (!f) throw IoError(path + ": write failed");
}

inline std::vector<ResultRow> parse_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw IoError("csv: header must be exactly '" + std::string(kCsvHeader) + "'");
    }
    std::vector<ResultRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        const std::string where = "csv line " + std::to_string(line_no);
        if (f.size() != 8) throw IoError(where + ": expected 8 fields, got " + std::to_string(f.size()));
        try {
            ResultRow r;
            r.rho_db = detail::parse_double(where, f[0]);
            r.n_relays = detail::parse_u64(where, f[1]);
            r.l = detail::parse_int(where, f[2]);
            r.method = f[3];
            r.chi_tail = f[4];
            r.value = detail::parse_double(where, f[5]);
            if (!f[6].empty()) r.ci3 = detail::parse_double(where, f[6]);
            r.wall_time_ms = detail::parse_double(where, f[7]);
            rows.push_back(std::move(r));
        } catch (const ConfigError& e) {
            throw IoError(e.what());
        }
    }
    return rows;
}

inline std::vector<ResultRow> load_csv(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

// ---------------------------------------------------------------- throughput from simulation

struct SimThroughput {
    double lt = 0.0;
    double lt_ci3 = 0.0;
    double dl = 0.0;
    double dl_ci3 = 0.0;
};

/// LT and DL throughput from simulated counts. DL is the mean of the
/// per-packet reward R/l (0 on outage); LT is R over the mean number of
/// rounds spent, with a delta-method interval.
inline SimThroughput throughput_from_counts(const SimulationCounts& c, double rate)
{
    const double n = static_cast<double>(c.trials);
    const std::size_t L = c.undecoded.size() - 1;
    double y1 = 0.0, y2 = 0.0, x1 = 0.0, x2 = 0.0;
    for (std::size_t l = 1; l <= L; ++l) {
        const double q = static_cast<double>(c.undecoded[l - 1] - c.undecoded[l]) / n;
        const double y = rate / static_cast<double>(l);
        y1 += q * y;
        y2 += q * y * y;
        const double x = static_cast<double>(l);
        x1 += q * x;
        x2 += q * x * x;
    }
    const double tail = static_cast<double>(c.undecoded[L]) / n;
    x1 += tail * static_cast<double>(L);
    x2 += tail * static_cast<double>(L * L);
    SimThroughput t;
    t.dl = y1;
    t.dl_ci3 = 3.0 * std::sqrt(std::max(0.0, y2 - y1 * y1) / n);
    t.lt = rate / x1;
    t.lt_ci3 = 3.0 * rate / (x1 * x1) * std::sqrt(std::max(0.0, x2 - x1 * x1) / n);
    return t;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
    unsigned workers = 0;
};

namespace detail {

class Stopwatch {
public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    double ms() const
    {
        if (!enabled_) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

inline std::string method_tail_tag(const OutageMethod& m) { return m.uses_chi_tail() ? to_string(m.chi_tail) : kNoTail; }

/// Evaluates fn, turning a convergence failure into a flagged row carrying
/// the best estimate.
template <class Fn>
void evaluate_into(ResultRow& row, Fn&& fn)
{
    try {
        row.value = fn();
    } catch (const NumericalError& e) {
        row.value = e.best_estimate();
        row.flagged = true;
        row.note = e.what();
    }
}

inline std::vector<ResultRow> analysis_rows(const ExperimentConfig& cfg, std::size_t n, const GridPoint& g)
{
    std::vector<ResultRow> rows;
    const auto profile = cfg.profile(n);
    const auto b = cfg.budget(g);
    const OutageAnalyzer analyzer(profile);
    for (const auto& m : cfg.outage_methods()) {
        for (int l : cfg.rounds()) {
            Stopwatch sw(cfg.timing);
            ResultRow r;
            r.rho_db = g.rho_db;
            r.n_relays = n;
            r.l = l;
            r.method = to_string(m.kind);
            r.chi_tail = method_tail_tag(m);
            evaluate_into(r, [&] { return analyzer.outage(l, b, m).value; });
            r.wall_time_ms = sw.ms();
            rows.push_back(std::move(r));
        }
        if (cfg.throughput) {
            Stopwatch sw(cfg.timing);
            std::vector<double> curve{1.0};
            ResultRow probe;
            for (int l = 1; l <= cfg.max_rounds; ++l) {
                ResultRow step;
                evaluate_into(step, [&] { return analyzer.outage(l, b, m).value; });
                curve.push_back(step.value);
                if (step.flagged) probe = step;
            }
            auto push = [&](const std::string& q, double v) {
                ResultRow r;
                r.rho_db = g.rho_db;
                r.n_relays = n;
                r.l = cfg.max_rounds;
                r.method = q + ":" + to_string(m.kind);
                r.chi_tail = method_tail_tag(m);
                r.value = v;
                r.flagged = probe.flagged;
                r.note = probe.note;
                r.wall_time_ms = sw.ms();
                rows.push_back(std::move(r));
            };
            const auto dl = OutageAnalyzer::throughput_dl_from_curve(curve, cfg.rate);
            push("lt", OutageAnalyzer::throughput_lt_from_curve(curve, cfg.rate));
            push("dl", dl.value);
            if (!dl.monotone) rows.back().note = "outage not monotone in l";
            if (cfg.rho_max) push("feasible", curve.back() <= *cfg.rho_max ? 1.0 : 0.0);
        }
    }
    return rows;
}

inline std::vector<ResultRow> simulation_rows(const ExperimentConfig& cfg, std::size_t n, const GridPoint& g,
                                              unsigned workers)
{
    std::vector<ResultRow> rows;
    Stopwatch sw(cfg.timing);
    const auto counts = simulate_counts(cfg.budget(g), cfg.profile(n), cfg.combining, cfg.trials, cfg.seed, workers);
    const double elapsed = sw.ms();
    const std::string tag = std::string("sim-") + to_string(cfg.combining);
    auto base = [&](int l, std::string method) {
        ResultRow r;
        r.rho_db = g.rho_db;
        r.n_relays = n;
        r.l = l;
        r.method = std::move(method);
        r.trials = counts.trials;
        r.wall_time_ms = elapsed;
        return r;
    };
    for (int l : cfg.rounds()) {
        const auto e = estimate_outage(counts, l);
        auto r = base(l, tag);
        r.value = e.p_hat;
        r.ci3 = e.ci3;
        rows.push_back(std::move(r));
    }
    if (cfg.throughput) {
        const auto t = throughput_from_counts(counts, cfg.rate);
        auto lt = base(cfg.max_rounds, "lt:" + tag);
        lt.value = t.lt;
        lt.ci3 = t.lt_ci3;
        rows.push_back(std::move(lt));
        auto dl = base(cfg.max_rounds, "dl:" + tag);
        dl.value = t.dl;
        dl.ci3 = t.dl_ci3;
        rows.push_back(std::move(dl));
        if (cfg.rho_max) {
            const auto e = estimate_outage(counts, cfg.max_rounds);
            auto f = base(cfg.max_rounds, "feasible:" + tag);
            f.value = e.p_hat <= *cfg.rho_max ? 1.0 : 0.0;
            f.ci3 = 0.0;
            rows.push_back(std::move(f));
        }
    }
    return rows;
}

} // namespace detail

/// Every grid point crossed with every method, plus simulation rows when
/// enabled. Analysis points run in parallel across the grid; each simulation
/// runs its trials in parallel. Rows come back sorted, and the output is a
/// pure function of the config.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg, const SweepOptions& opt = {})
{
    cfg.validate();
    struct Task {
        std::size_t n;
        GridPoint g;
    };
    std::vector<Task> tasks;
    for (std::size_t n : cfg.n_relays) {
        for (const auto& g : cfg.grid) tasks.push_back({n, g});
    }
    const unsigned workers = worker_count(opt.workers);
    std::vector<std::vector<ResultRow>> partial(tasks.size());
    if (!cfg.methods.empty()) {
        parallel_for(tasks.size(), workers,
                     [&](std::size_t i) { partial[i] = detail::analysis_rows(cfg, tasks[i].n, tasks[i].g); });
    }
    if (cfg.sim_enabled) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            auto sim = detail::simulation_rows(cfg, tasks[i].n, tasks[i].g, workers);
            partial[i].insert(partial[i].end(), sim.begin(), sim.end());
        }
    }
    std::vector<ResultRow> rows;
    for (auto& p : partial) rows.insert(rows.end(), p.begin(), p.end());
    sort_rows(rows);
    return rows;
}

// ---------------------------------------------------------------- figure presets

enum class FigureName { F1Pdf, F3OutageL2, G2OutageSweep, G3Throughput };

inline const char* to_string(FigureName f)
{
    switch (f) {
    case FigureName::F1Pdf: return "f1-pdf";
    case FigureName::F3OutageL2: return "f3-outage-l2";
    case FigureName::G2OutageSweep: return "g2-outage-sweep";
    case FigureName::G3Throughput: return "g3-throughput";
    }
    return "?";
}

inline std::optional<FigureName> parse_figure(const std::string& s)
{
    for (auto f : {FigureName::F1Pdf, FigureName::F3OutageL2, FigureName::G2OutageSweep, FigureName::G3Throughput}) {
        if (s == to_string(f)) return f;
    }
    return std::nullopt;
}

struct FigOverrides {
    /// 0 disables the simulation overlay.
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<ChiTail> chi_tail;
    std::optional<Combining> combining;
    std::optional<std::vector<std::size_t>> n_relays;
    std::optional<std::vector<double>> rho_db;
    unsigned workers = 0;
};

inline constexpr std::uint64_t kFigureTrials = 3000000;

/// Preset parameterization of a figure, before overrides.
inline ExperimentConfig figure_config(FigureName name)
{
    ExperimentConfig c;
    c.rate = 1.0;
    c.sigma2_f = {1.0};
    c.sigma2_g = {1.0};
    c.sigma2_f0 = 1.0;
    c.sim_enabled = true;
    c.trials = kFigureTrials;
    c.seed = 1;
    auto grid = [](double a, double step, double b) {
        std::vector<GridPoint> g;
        for (double x = a; x <= b + 1e-9; x += step) g.push_back(GridPoint::from_db(x));
        return g;
    };
    switch (name) {
    case FigureName::F1Pdf:
        c.n_relays = {1, 2, 4};
        c.grid = {GridPoint::from_db(0.0)};
        c.max_rounds = 1;
        c.methods = {OutageKind::Exact};
        break;
    case FigureName::F3OutageL2:
        c.n_relays = {2, 4};
        c.grid = grid(0.0, 2.0, 30.0);
        c.max_rounds = 5;
        c.l_values = {2};
        c.methods = {OutageKind::Exact, OutageKind::Approx, OutageKind::UpperBound, OutageKind::ClosedApprox,
                     OutageKind::Asymptotic};
        break;
    case FigureName::G2OutageSweep:
        c.n_relays = {1, 2, 3, 4};
        c.grid = grid(0.0, 2.0, 40.0);
        c.max_rounds = 5;
        c.l_values = {5};
        c.methods = {OutageKind::Exact, OutageKind::Asymptotic, OutageKind::Direct};
        break;
    case FigureName::G3Throughput:
        c.n_relays = {2, 4};
        c.grid = grid(0.0, 2.0, 40.0);
        c.max_rounds = 3;
        c.l_values = {3};
        c.methods = {OutageKind::Exact, OutageKind::Direct};
        c.throughput = true;
        c.rho_max = 1e-3;
        break;
    }
    return c;
}

inline constexpr double kPdfGridUpper = 4.0;
inline constexpr std::size_t kPdfBins = 40;

namespace detail {

// Selected-relay SNR density. The rho_db column carries the gain value and
// l is 0; analytic rows sit at the histogram bin centres.
inline std::vector<ResultRow> pdf_rows(const ExperimentConfig& c, unsigned workers)
{
    std::vector<ResultRow> rows;
    const double width = kPdfGridUpper / static_cast<double>(kPdfBins);
    for (std::size_t n : c.n_relays) {
        const auto p = c.profile(n);
        p.require_relays();
        const GainDistribution exact(GainKind::SelectedSource, GainMethod::Exact, p);
        std::optional<GainDistribution> approx;
        if (p.symmetric_hops()) approx.emplace(GainKind::SelectedSource, GainMethod::Approx, p);
        for (std::size_t i = 0; i < kPdfBins; ++i) {
            const double x = (static_cast<double>(i) + 0.5) * width;
            ResultRow r;
            r.rho_db = x;
            r.n_relays = n;
            r.l = 0;
            r.method = "pdf:exact";
            r.value = exact.pdf(x);
            rows.push_back(r);
            if (approx) {
                r.method = "pdf:approx";
                r.value = approx->pdf(x);
                rows.push_back(r);
            }
        }
        if (c.sim_enabled) {
            const auto samples = sample_selected_gains(p, c.trials, c.seed, workers).source_hop;
            const auto h = make_histogram(samples, kPdfBins, kPdfGridUpper);
            for (std::size_t i = 0; i < kPdfBins; ++i) {
                ResultRow r;
                r.rho_db = h.bin_center(i);
                r.n_relays = n;
                r.l = 0;
                r.method = "pdf:sim";
                r.value = h.density(i);
                const double m = h.mass(i);
                r.ci3 = 3.0 * std::sqrt(m * (1.0 - m) / static_cast<double>(h.total)) / h.width;
                r.trials = h.total;
                rows.push_back(r);
            }
        }
    }
    return rows;
}

} // namespace detail

inline std::vector<ResultRow> fig_data(FigureName name, const FigOverrides& o = {})
{
    auto c = figure_config(name);
    if (o.trials) {
        c.sim_enabled = *o.trials > 0;
        if (*o.trials > 0) c.trials = *o.trials;
    }
    if (o.seed) c.seed = *o.seed;
    if (o.chi_tail) c.chi_tails = {*o.chi_tail};
    if (o.combining) c.combining = *o.combining;
    if (o.n_relays) c.n_relays = *o.n_relays;
    if (o.rho_db) {
        c.grid.clear();
        for (double db : *o.rho_db) c.grid.push_back(GridPoint::from_db(db));
    }
    if (name == FigureName::F1Pdf) {
        c.validate();
        auto rows = detail::pdf_rows(c, worker_count(o.workers));
        sort_rows(rows);
        return rows;
    }
    auto rows = run_sweep(c, SweepOptions{o.workers});
    if (name == FigureName::G2OutageSweep || name == FigureName::G3Throughput) {
        // The direct baseline does not depend on N; keep one copy under n_relays = 0.
        const std::size_t first_n = c.n_relays.front();
        std::vector<ResultRow> kept;
        for (auto& r : rows) {
            const bool direct = r.method == "direct" || r.method.find(":direct") != std::string::npos;
            if (!direct) {
                kept.push_back(std::move(r));
            } else if (r.n_relays == first_n) {
                r.n_relays = 0;
                kept.push_back(std::move(r));
            }
        }
        rows = std::move(kept);
        sort_rows(rows);
    }
    return rows;
}

// ---------------------------------------------------------------- comparison

struct ComparePoint {
    double rho_db = 0.0;
    std::size_t n_relays = 0;
    int l = 0;
    std::string method;
    std::string chi_tail;
    std::string sim_method;
    double analysis = 0.0;
    double p_hat = 0.0;
    double ci3 = 0.0;
    /// NaN when the simulation interval is degenerate (ci3 = 0) and the
    /// values differ.
    double z = 0.0;
};

struct SeriesSummary {
    std::size_t n_relays = 0;
    int l = 0;
    std::string method;
    std::string chi_tail;
    std::string sim_method;
    std::size_t points = 0;
    std::size_t undetermined = 0;
    double max_abs_z = 0.0;
    /// Every determined point has |z| <= 3.
    bool consistent = true;
};

struct CompareReport {
    std::vector<ComparePoint> points;
    std::vector<SeriesSummary> series;
    /// Simulation above the upper bound by more than its 3-sigma interval.
    std::size_t bound_violations = 0;

    std::string format() const
    {
        std::ostringstream o;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-8s %-3s %-18s %-10s %-16s %6s %10s %5s\n", "n_relays", "l", "method",
                      "chi_tail", "sim", "points", "max|z|", "ok");
        o << buf;
        for (const auto& s : series) {
            std::snprintf(buf, sizeof buf, "%-8zu %-3d %-18s %-10s %-16s %6zu %10.3f %5s\n", s.n_relays, s.l,
                          s.method.c_str(), s.chi_tail.c_str(), s.sim_method.c_str(), s.points, s.max_abs_z,
                          s.consistent ? "yes" : "no");
            o << buf;
        }
        o << "bound violations: " << bound_violations << '\n';
        return o.str();
    }
};

inline double z_score(double analysis, double p_hat, double ci3)
{
    if (ci3 > 0.0) return (analysis - p_hat) / (ci3 / 3.0);
    return analysis == p_hat ? 0.0 : std::numeric_limits<double>::quiet_NaN();
}

/// Pairs every analysis series with the simulation series of the same
/// quantity, relay count and round, and scores each grid point.
inline CompareReport compare_report(const std::vector<ResultRow>& rows)
{
    using SeriesKey = std::tuple<std::string, std::size_t, int>; // quantity, n, l
    using Series = std::map<std::string, std::map<double, const ResultRow*>>;
    std::map<SeriesKey, Series> sims;
    std::map<SeriesKey, std::map<std::pair<std::string, std::string>, std::map<double, const ResultRow*>>> analyses;
    for (const auto& r : rows) {
        const SeriesKey k{r.quantity(), r.n_relays, r.l};
        if (r.is_simulation()) {
            if (!r.ci3) throw ConfigError("compare_report: simulation row without ci3");
            sims[k][r.method][r.rho_db] = &r;
        } else {
            analyses[k][{r.method, r.chi_tail}][r.rho_db] = &r;
        }
    }
    if (sims.empty()) throw ConfigError("compare_report: no simulation series in rows");
    CompareReport rep;
    std::size_t paired = 0;
    for (const auto& [k, by_method] : analyses) {
        const auto sit = sims.find(k);
        if (sit == sims.end()) continue;
        for (const auto& [mt, points] : by_method) {
            for (const auto& [sim_method, sim_points] : sit->second) {
                std::vector<double> a_grid, s_grid;
                for (const auto& [x, _] : points) a_grid.push_back(x);
                for (const auto& [x, _] : sim_points) s_grid.push_back(x);
                if (a_grid != s_grid) {
                    throw ConfigError("compare_report: grid of '" + mt.first + "' differs from '" + sim_method +
                                      "' at n_relays=" + std::to_string(std::get<1>(k)) +
                                      ", l=" + std::to_string(std::get<2>(k)));
                }
                ++paired;
                SeriesSummary s{std::get<1>(k), std::get<2>(k), mt.first, mt.second, sim_method, 0, 0, 0.0, true};
                for (const auto& [x, ar] : points) {
                    const auto* sr = sim_points.at(x);
                    ComparePoint p{x, s.n_relays, s.l, mt.first, mt.second, sim_method, ar->value, sr->value,
                                   *sr->ci3, z_score(ar->value, sr->value, *sr->ci3)};
                    ++s.points;
                    if (std::isnan(p.z)) {
                        ++s.undetermined;
                    } else {
                        s.max_abs_z = std::max(s.max_abs_z, std::abs(p.z));
                        if (std::abs(p.z) > 3.0) s.consistent = false;
                    }
                    if (mt.first == to_string(OutageKind::UpperBound) && sr->value - ar->value > *sr->ci3) {
                        ++rep.bound_violations;
                    }
                    rep.points.push_back(std::move(p));
                }
                rep.series.push_back(std::move(s));
            }
        }
    }
    if (paired == 0) throw ConfigError("compare_report: no analysis series shares a simulation series' grid");
    return rep;
}

} // namespace relaylab
