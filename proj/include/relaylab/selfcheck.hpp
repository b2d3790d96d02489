#pragma once

// Fast invariant checks run by `relaylab selfcheck`.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "relaylab/errors.hpp"
#include "relaylab/fading_stats.hpp"
#include "relaylab/harq_analysis.hpp"
#include "relaylab/numerics.hpp"
#include "relaylab/protocol_sim.hpp"

namespace relaylab {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline CheckResult run_check(const std::string& name, const std::function<std::string()>& body)
{
    try {
        std::string failure = body();
        return CheckResult{name, failure.empty(), failure};
    } catch (const std::exception& e) {
        return CheckResult{name, false, std::string("exception: ") + e.what()};
    }
}

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

} // namespace detail

inline std::vector<CheckResult> run_selfcheck()
{
    using detail::fmt;
    std::vector<CheckResult> out;
    const double grid_db[] = {0.0, 10.0, 20.0, 30.0};

    out.push_back(detail::run_check("chi distribution telescopes to 1", [&]() -> std::string {
        for (std::size_t n : {1u, 2u, 4u}) {
            const OutageAnalyzer a(NetworkProfile::uniform(n));
            for (double db : grid_db) {
                const LinkBudget b{db_to_linear(db), 1.0, 5};
                for (int l = 1; l <= 5; ++l) {
                    double s = a.pr_chi(l, l, b, ChiVariant::Exact);
                    for (int k = 1; k < l; ++k) s += a.pr_chi(k, l, b, ChiVariant::Exact);
                    if (std::abs(s - 1.0) > 1e-9) return fmt("sum %.15g at %g dB", s, db);
                }
            }
        }
        return {};
    }));

    out.push_back(detail::run_check("exact <= upper bound", [&]() -> std::string {
        for (std::size_t n : {2u, 4u}) {
            const OutageAnalyzer a(NetworkProfile::uniform(n));
            for (double db : grid_db) {
                const LinkBudget b{db_to_linear(db), 1.0, 5};
                for (auto t : {ChiTail::Verbatim, ChiTail::Collapsed}) {
                    const double e = a.outage(2, b, {OutageKind::Exact, t}).value;
                    const double u = a.outage(2, b, {OutageKind::UpperBound, t}).value;
                    if (e > u) return fmt("exact %.6g > bound %.6g at %g dB", e, u, db);
                }
            }
        }
        return {};
    }));

    out.push_back(detail::run_check("outage nonincreasing in l", [&]() -> std::string {
        const OutageAnalyzer a(NetworkProfile::uniform(2));
        for (double db : grid_db) {
            const LinkBudget b{db_to_linear(db), 1.0, 5};
            for (auto kind : {OutageKind::Exact, OutageKind::Direct}) {
                const auto c = a.outage_curve(b, {kind, ChiTail::Collapsed});
                for (std::size_t l = 1; l < c.size(); ++l) {
                    if (c[l] > c[l - 1]) return fmt("P(%g) > P(l-1) at %g dB", static_cast<double>(l), db);
                }
            }
        }
        return {};
    }));

    out.push_back(detail::run_check("direct outage closed form", [&]() -> std::string {
        const OutageAnalyzer a(NetworkProfile::uniform(1));
        const LinkBudget b{1.0, 1.0, 1};
        const double v = a.outage(1, b, {OutageKind::Direct}).value;
        if (std::abs(v - (1.0 - std::exp(-1.0))) > 1e-15) return fmt("got %.17g", v);
        return {};
    }));

    out.push_back(detail::run_check("single-relay distributions coincide", [&]() -> std::string {
        const auto p = NetworkProfile::uniform(1);
        const GainDistribution exact(GainKind::SelectedSource, GainMethod::Exact, p);
        const GainDistribution approx(GainKind::SelectedSource, GainMethod::Approx, p);
        for (int i = 0; i <= 1000; ++i) {
            const double g = 10.0 * i / 1000.0;
            const double ref = -std::expm1(-g);
            if (std::abs(exact.cdf(g) - ref) > 1e-12 || std::abs(approx.cdf(g) - ref) > 1e-12) {
                return fmt("mismatch at gamma=%g", g);
            }
        }
        return {};
    }));

    out.push_back(detail::run_check("mixture integral matches quadrature", [&]() -> std::string {
        const std::vector<double> rates{2.0, 0.5, 1.25, 3.0};
        const auto m = numerics::expand_product(rates);
        for (double upper : {0.5, 2.0, 8.0}) {
            const double a = numerics::integrate_mixture(m, upper);
            const double q = numerics::quad_1d(
                                 [&](double x) {
                                     double p = 1.0;
                                     for (double r : rates) p *= -std::expm1(-r * x);
                                     return p;
                                 },
                                 0.0, upper, numerics::relative_settings(1e-12))
                                 .value;
            if (std::abs(a - q) > 1e-9 * std::max(1.0, std::abs(q))) return fmt("%.15g vs %.15g", a, q);
        }
        return {};
    }));

    out.push_back(detail::run_check("selected-gain densities integrate to 1", [&]() -> std::string {
        for (std::size_t n : {2u, 4u}) {
            const GainDistribution d(GainKind::SelectedSource, GainMethod::Exact, NetworkProfile::uniform(n));
            const double mass =
                numerics::quad_1d([&](double g) { return d.pdf(g); }, 0.0, numerics::kInf).value;
            if (std::abs(mass - 1.0) > 1e-6) return fmt("N=%g mass %.12g", static_cast<double>(n), mass);
        }
        return {};
    }));

    out.push_back(detail::run_check("distributed selection equals argmax", [&]() -> std::string {
        const auto p = NetworkProfile::uniform(4);
        for (std::uint64_t i = 0; i < 10000; ++i) {
            const auto c = draw_realization(p, 7, i);
            if (select_relay_distributed(c, 1.0).relay != select_relay_centralized(c)) {
                return fmt("mismatch at trial %g", static_cast<double>(i));
            }
        }
        return {};
    }));

    out.push_back(detail::run_check("simulation independent of worker count", [&]() -> std::string {
        const LinkBudget b{db_to_linear(5.0), 1.0, 5};
        const auto p = NetworkProfile::uniform(2);
        const auto one = simulate_counts(b, p, Combining::Alamouti, 100000, 3, 1);
        const auto two = simulate_counts(b, p, Combining::Alamouti, 100000, 3, 2);
        if (one.undecoded != two.undecoded || one.chi_hist != two.chi_hist) return "counts differ";
        return {};
    }));

    return out;
}

} // namespace relaylab
