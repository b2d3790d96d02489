#pragma once

// Experiment configuration: a flat `key = value` text format with dotted
// keys, `#` comments, comma-separated lists and `start:step:stop` ranges.
//
//   profile.n_relays = 1, 2, 4
//   budget.rho_db    = 0:2:40
//   analysis.methods = exact, upper_bound

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "relaylab/errors.hpp"
#include "relaylab/fading_stats.hpp"
#include "relaylab/harq_analysis.hpp"
#include "relaylab/protocol_sim.hpp"

namespace relaylab {

/// One SNR grid point. The dB label is kept for reporting; rho is the linear
/// value used by every computation, converted once at ingestion.
struct GridPoint {
    double rho_db = 0.0;
    double rho = 1.0;

    static GridPoint from_db(double db) { return GridPoint{db, db_to_linear(db)}; }
    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct ExperimentConfig {
    std::vector<std::size_t> n_relays{2};
    /// One value shared by every relay, or one value per relay.
    std::vector<double> sigma2_f{1.0};
    std::vector<double> sigma2_g{1.0};
    double sigma2_f0 = 1.0;

    std::vector<GridPoint> grid;
    double rate = 1.0;
    int max_rounds = 5;

    std::vector<OutageKind> methods{OutageKind::Exact};
    std::vector<ChiTail> chi_tails{ChiTail::Verbatim};
    /// Rounds to report; empty means {L}.
    std::vector<int> l_values;
    bool throughput = false;

    bool sim_enabled = false;
    Combining combining = Combining::Alamouti;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;

    std::optional<double> rho_max;
    std::string output_path;
    bool timing = false;

    NetworkProfile profile(std::size_t n) const
    {
        auto expand = [n](const std::vector<double>& v) {
            return v.size() == 1 ? std::vector<double>(n, v.front()) : v;
        };
        return NetworkProfile{expand(sigma2_f), expand(sigma2_g), sigma2_f0};
    }

    std::vector<int> rounds() const { return l_values.empty() ? std::vector<int>{max_rounds} : l_values; }

    LinkBudget budget(const GridPoint& g) const { return LinkBudget{g.rho, rate, max_rounds}; }

    /// Methods crossed with chi-tail modes; tail-free kinds appear once.
    std::vector<OutageMethod> outage_methods() const
    {
        std::vector<OutageMethod> out;
        for (auto k : methods) {
            OutageMethod m{k, ChiTail::Verbatim};
            if (!m.uses_chi_tail()) {
                out.push_back(m);
                continue;
            }
            for (auto t : chi_tails) out.push_back(OutageMethod{k, t});
        }
        return out;
    }

    void validate() const
    {
        auto fail = [](const std::string& key, const std::string& msg) { throw ConfigError(key + ": " + msg); };
        if (n_relays.empty()) fail("profile.n_relays", "at least one value is required");
        if (sigma2_f.empty() || sigma2_g.empty()) fail("profile.sigma2_f/sigma2_g", "must not be empty");
        for (std::size_t n : n_relays) {
            if (sigma2_f.size() != 1 && sigma2_f.size() != n) {
                fail("profile.sigma2_f", "needs 1 or " + std::to_string(n) + " values");
            }
            if (sigma2_g.size() != 1 && sigma2_g.size() != n) {
                fail("profile.sigma2_g", "needs 1 or " + std::to_string(n) + " values");
            }
            try {
                profile(n).validate();
            } catch (const ConfigError& e) {
                fail("profile", e.what());
            }
        }
        if (grid.empty()) fail("budget.rho_db", "grid must not be empty");
        for (const auto& g : grid) {
            if (!std::isfinite(g.rho_db)) fail("budget.rho_db", "values must be finite");
        }
        try {
            LinkBudget{1.0, rate, max_rounds}.validate();
        } catch (const ConfigError& e) {
            fail("budget", e.what());
        }
        for (int l : rounds()) {
            if (l < 1 || l > max_rounds) fail("analysis.l", "rounds must lie in [1, budget.max_rounds]");
        }
        if (methods.empty() && !sim_enabled) fail("analysis.methods", "nothing to do: no methods and sim disabled");
        if (chi_tails.empty()) fail("analysis.chi_tail", "at least one mode is required");
        const bool relay_methods = std::any_of(methods.begin(), methods.end(),
                                               [](OutageKind k) { return k != OutageKind::Direct; });
        for (std::size_t n : n_relays) {
            if (n == 0 && relay_methods) {
                fail("analysis.methods", "only 'direct' is defined for a profile with zero relays");
            }
            const bool needs_symmetric = std::any_of(methods.begin(), methods.end(), [](OutageKind k) {
                return k == OutageKind::Approx || k == OutageKind::ClosedApprox;
            });
            if (n > 0 && needs_symmetric && !profile(n).symmetric_hops()) {
                fail("analysis.methods", "approx/closed_approx need sigma2_f == sigma2_g for every relay");
            }
        }
        if (std::find(methods.begin(), methods.end(), OutageKind::Asymptotic) != methods.end()) {
            for (int l : rounds()) {
                if (l < 2) fail("analysis.l", "the asymptotic method needs l >= 2");
            }
        }
        if (sim_enabled && trials < kMinTrials) {
            fail("sim.trials", "must be at least " + std::to_string(kMinTrials) + " when simulation is enabled");
        }
        if (rho_max && !(*rho_max > 0.0 && *rho_max <= 1.0)) fail("qos.rho_max", "must lie in (0, 1]");
    }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& s)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ConfigError(key + ": '" + s + "' is not a finite number");
    }
    return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& s)
{
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": '" + s + "' is not a nonnegative integer");
    return v;
}

inline int parse_int(const std::string& key, const std::string& s)
{
    int v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": '" + s + "' is not an integer");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& s)
{
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key + ": '" + s + "' is not a boolean");
}

/// Numeric list with `start:step:stop` ranges; stop is included when the
/// grid lands on it (to within 1e-9 steps).
inline std::vector<double> parse_number_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    for (const auto& item : split_list(v)) {
        if (item.find(':') == std::string::npos) {
            out.push_back(parse_double(key, item));
            continue;
        }
        std::vector<std::string> parts;
        std::string part;
        std::istringstream in(item);
        while (std::getline(in, part, ':')) parts.push_back(trim(part));
        if (parts.size() != 3) throw ConfigError(key + ": range '" + item + "' must be start:step:stop");
        const double a = parse_double(key, parts[0]);
        const double step = parse_double(key, parts[1]);
        const double b = parse_double(key, parts[2]);
        if (!(step > 0.0) || b < a) throw ConfigError(key + ": range '" + item + "' needs step > 0 and stop >= start");
        const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        if (count > 1000000) throw ConfigError(key + ": range '" + item + "' has too many points");
        for (std::size_t i = 0; i < count; ++i) out.push_back(a + static_cast<double>(i) * step);
    }
    return out;
}

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) s += ", ";
        s += fmt(v[i]);
    }
    return s;
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string& text)
{
    using namespace detail;
    ExperimentConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "line " + std::to_string(line_no);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
            throw ConfigError(where + ": key '" + key + "' already set on line " + std::to_string(it->second));
        }
        const std::string ctx = where + ": " + key;
        try {
            if (key == "profile.n_relays") {
                cfg.n_relays.clear();
                for (const auto& s : split_list(value)) cfg.n_relays.push_back(parse_u64(ctx, s));
            } else if (key == "profile.sigma2_f") {
                cfg.sigma2_f = parse_number_list(ctx, value);
            } else if (key == "profile.sigma2_g") {
                cfg.sigma2_g = parse_number_list(ctx, value);
            } else if (key == "profile.sigma2_f0") {
                cfg.sigma2_f0 = parse_double(ctx, value);
            } else if (key == "budget.rho_db") {
                cfg.grid.clear();
                for (double db : parse_number_list(ctx, value)) cfg.grid.push_back(GridPoint::from_db(db));
            } else if (key == "budget.rate") {
                cfg.rate = parse_double(ctx, value);
            } else if (key == "budget.max_rounds") {
                cfg.max_rounds = parse_int(ctx, value);
            } else if (key == "analysis.methods") {
                cfg.methods.clear();
                for (const auto& s : split_list(value)) {
                    const auto k = parse_outage_kind(s);
                    if (!k) throw ConfigError(ctx + ": unknown method '" + s + "'");
                    cfg.methods.push_back(*k);
                }
            } else if (key == "analysis.chi_tail") {
                cfg.chi_tails.clear();
                for (const auto& s : split_list(value)) {
                    const auto t = parse_chi_tail(s);
                    if (!t) throw ConfigError(ctx + ": chi_tail must be verbatim or collapsed, got '" + s + "'");
                    cfg.chi_tails.push_back(*t);
                }
            } else if (key == "analysis.l") {
                cfg.l_values.clear();
                for (const auto& s : split_list(value)) cfg.l_values.push_back(parse_int(ctx, s));
            } else if (key == "analysis.throughput") {
                cfg.throughput = parse_bool(ctx, value);
            } else if (key == "sim.enabled") {
                cfg.sim_enabled = parse_bool(ctx, value);
            } else if (key == "sim.combining") {
                const auto c = parse_combining(value);
                if (!c) throw ConfigError(ctx + ": combining must be alamouti or beamforming");
                cfg.combining = *c;
            } else if (key == "sim.trials") {
                cfg.trials = parse_u64(ctx, value);
            } else if (key == "sim.seed") {
                cfg.seed = parse_u64(ctx, value);
            } else if (key == "qos.rho_max") {
                if (value.empty()) {
                    cfg.rho_max.reset();
                } else {
                    cfg.rho_max = parse_double(ctx, value);
                }
            } else if (key == "output.path") {
                cfg.output_path = value;
            } else if (key == "output.timing") {
                cfg.timing = parse_bool(ctx, value);
            } else {
                throw ConfigError(where + ": unknown key '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(ctx + ": " + e.what());
        }
    }
    if (seen.find("budget.rho_db") == seen.end()) throw ConfigError("budget.rho_db: missing required key");
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw ConfigError(path + ": cannot open config file");
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Canonical text form; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ExperimentConfig& c)
{
    using namespace detail;
    auto num = [](double v) { return format_double(v); };
    std::ostringstream o;
    o << "profile.n_relays = " << join(c.n_relays, [](std::size_t n) { return std::to_string(n); }) << '\n';
    o << "profile.sigma2_f = " << join(c.sigma2_f, num) << '\n';
    o << "profile.sigma2_g = " << join(c.sigma2_g, num) << '\n';
    o << "profile.sigma2_f0 = " << num(c.sigma2_f0) << '\n';
    o << "budget.rho_db = " << join(c.grid, [&](const GridPoint& g) { return num(g.rho_db); }) << '\n';
    o << "budget.rate = " << num(c.rate) << '\n';
    o << "budget.max_rounds = " << c.max_rounds << '\n';
    o << "analysis.methods = " << join(c.methods, [](OutageKind k) { return std::string(to_string(k)); }) << '\n';
    o << "analysis.chi_tail = " << join(c.chi_tails, [](ChiTail t) { return std::string(to_string(t)); }) << '\n';
    if (!c.l_values.empty()) {
        o << "analysis.l = " << join(c.l_values, [](int l) { return std::to_string(l); }) << '\n';
    }
    o << "analysis.throughput = " << (c.throughput ? "true" : "false") << '\n';
    o << "sim.enabled = " << (c.sim_enabled ? "true" : "false") << '\n';
    o << "sim.combining = " << to_string(c.combining) << '\n';
    o << "sim.trials = " << c.trials << '\n';
    o << "sim.seed = " << c.seed << '\n';
    if (c.rho_max) o << "qos.rho_max = " << num(*c.rho_max) << '\n';
    if (!c.output_path.empty()) o << "output.path = " << c.output_path << '\n';
    o << "output.timing = " << (c.timing ? "true" : "false") << '\n';
    return o.str();
}

} // namespace relaylab
