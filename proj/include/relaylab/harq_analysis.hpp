#pragma once

// Analytical HARQ quantities for opportunistic relaying: SNR thresholds,
// relay-decode-round probabilities, conditional outage terms, the outage
// evaluators, LT/DL throughput and diversity-order estimation.
//
// Notation in comments: mu_k is the per-round SNR threshold for k rounds,
// chi the round after which the selected relay has decoded.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relaylab/errors.hpp"
#include "relaylab/fading_stats.hpp"
#include "relaylab/numerics.hpp"

namespace relaylab {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline constexpr int kMaxRoundsLimit = 64;

struct LinkBudget {
    double rho = 1.0;  ///< transmit SNR P/N0, linear
    double rate = 1.0; ///< first-round spectral efficiency R, bps/Hz
    int max_rounds = 1;

    void validate() const
    {
        if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("LinkBudget: rho must be positive");
        if (!(rate > 0.0) || !std::isfinite(rate)) throw ConfigError("LinkBudget: rate must be positive");
        if (max_rounds < 1 || max_rounds > kMaxRoundsLimit) {
            throw ConfigError("LinkBudget: max_rounds must lie in [1, 64]");
        }
    }

    friend bool operator==(const LinkBudget&, const LinkBudget&) = default;
};

enum class OutageKind { Exact, Approx, UpperBound, ClosedApprox, Asymptotic, Direct };

/// How the k >= l part of the relay-decode distribution enters the outage sum.
/// Verbatim repeats the tail term (L - l + 1) times as the printed formulas
/// do; Collapsed counts it once, which keeps the chi distribution normalized.
enum class ChiTail { Verbatim, Collapsed };

struct OutageMethod {
    OutageKind kind = OutageKind::Exact;
    ChiTail chi_tail = ChiTail::Verbatim;

    bool uses_chi_tail() const
    {
        return kind != OutageKind::Asymptotic && kind != OutageKind::Direct;
    }

    friend bool operator==(const OutageMethod&, const OutageMethod&) = default;
};

inline const char* to_string(OutageKind k)
{
    switch (k) {
    case OutageKind::Exact: return "exact";
    case OutageKind::Approx: return "approx";
    case OutageKind::UpperBound: return "upper_bound";
    case OutageKind::ClosedApprox: return "closed_approx";
    case OutageKind::Asymptotic: return "asymptotic";
    case OutageKind::Direct: return "direct";
    }
    return "?";
}

inline const char* to_string(ChiTail t) { return t == ChiTail::Verbatim ? "verbatim" : "collapsed"; }

inline std::optional<OutageKind> parse_outage_kind(const std::string& s)
{
    for (auto k : {OutageKind::Exact, OutageKind::Approx, OutageKind::UpperBound, OutageKind::ClosedApprox,
                   OutageKind::Asymptotic, OutageKind::Direct}) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

inline std::optional<ChiTail> parse_chi_tail(const std::string& s)
{
    if (s == "verbatim") return ChiTail::Verbatim;
    if (s == "collapsed") return ChiTail::Collapsed;
    return std::nullopt;
}

struct OutagePoint {
    int l = 1;
    OutageMethod method;
    double value = 0.0;
    /// Bounds and asymptotes are reported unclamped; set when value > 1.
    bool exceeds_one = false;
};

enum class ChiVariant { Exact, Approx, Bound };
enum class HelpVariant { Exact, Approx, PsiBound };

/// mu_k = (2^{R/k} - 1) / rho, with mu_0 = +inf.
inline double snr_threshold(int k, const LinkBudget& b)
{
    if (k < 0) throw IndexError("snr_threshold: k must be >= 0");
    if (k == 0) return numerics::kInf;
    return std::expm1(b.rate * std::numbers::ln2 / k) / b.rho;
}

/// Upper limit on gamma_gr for outage after l rounds when the relay decoded
/// after round k < l, as a function of the direct gain gamma_f0:
///   (2^{R/(l-k)} (1 + rho x)^{-k/(l-k)} - 1 - rho x) / rho, clamped at 0.
inline double help_gain_limit(double gamma_f0, int l, int k, const LinkBudget& b)
{
    const double y = b.rho * gamma_f0;
    const double expo = (b.rate * std::numbers::ln2 - l * std::log1p(y)) / (l - k);
    return std::max(0.0, (1.0 + y) * std::expm1(expo) / b.rho);
}

struct ThroughputResult {
    double value = 0.0;
    /// false when P_out(l) increases somewhere in l (possible for bounds).
    bool monotone = true;
};

struct QosResult {
    double lt = 0.0;
    double dl = 0.0;
    bool dl_monotone = true;
    bool feasible = false;
};

/// Caches the gain distributions of one network profile so that sweeps over
/// SNR and rounds do not rebuild them. Immutable and thread-safe once built.
class OutageAnalyzer {
public:
    explicit OutageAnalyzer(NetworkProfile profile) : profile_(std::move(profile))
    {
        profile_.validate();
        if (profile_.n_relays() == 0) {
            return; // direct transmission only
        }
        relay_.emplace(profile_);
    }

    const NetworkProfile& profile() const noexcept { return profile_; }

    double pr_chi(int k, int l, const LinkBudget& b, ChiVariant variant) const
    {
        b.validate();
        check_round(k, b, "pr_chi: k");
        check_round(l, b, "pr_chi: l");
        const auto& r = relays("pr_chi");
        const GainDistribution* cdf_upper = nullptr;
        const GainDistribution* cdf_lower = nullptr;
        switch (variant) {
        case ChiVariant::Exact: cdf_upper = cdf_lower = &r.src_exact; break;
        case ChiVariant::Approx: cdf_upper = cdf_lower = &r.approx("pr_chi approx").first; break;
        case ChiVariant::Bound:
            // Pr[chi = k] <= Pr[gamma_max < mu_{k-1}] - Pr[gamma^s_max < mu_k]
            cdf_upper = &r.minmax;
            cdf_lower = &r.sourcemax;
            break;
        }
        if (k < l) {
            return cdf_upper->cdf(snr_threshold(k - 1, b)) - cdf_lower->cdf(snr_threshold(k, b));
        }
        return cdf_upper->cdf(snr_threshold(l - 1, b));
    }

    /// Outage after l rounds when the relay never helped: 1 - exp(-mu_l / sigma2_f0).
    double cond_outage_no_help(int l, const LinkBudget& b) const
    {
        b.validate();
        check_round(l, b, "cond_outage_no_help: l");
        return -std::expm1(-snr_threshold(l, b) / profile_.sigma2_f0);
    }

    double cond_outage_with_help(int l, int k, const LinkBudget& b, HelpVariant variant) const
    {
        b.validate();
        check_round(l, b, "cond_outage_with_help: l");
        if (k < 1 || k >= l) {
            throw IndexError("cond_outage_with_help: need 1 <= k < l");
        }
        const auto& r = relays("cond_outage_with_help");
        switch (variant) {
        case HelpVariant::Exact: return upsilon(l, k, b, r.dst_exact);
        case HelpVariant::Approx: return upsilon(l, k, b, r.approx("help approx").second);
        case HelpVariant::PsiBound:
            return snr_threshold(l, b) / profile_.sigma2_f0 *
                   std::pow(snr_threshold(l - k, b), static_cast<double>(profile_.n_relays())) *
                   r.rate_product;
        }
        return 0.0;
    }

    /// Delta(l): high-SNR coefficient of the outage upper bound, defined for l >= 2.
    double asymptotic_coefficient(int l, const LinkBudget& b) const
    {
        b.validate();
        check_round(l, b, "asymptotic_coefficient: l");
        if (l < 2) {
            throw DomainError("asymptotic outage is defined for l >= 2 (needs a relay-assisted round)");
        }
        const auto& r = relays("asymptotic");
        const double n = static_cast<double>(profile_.n_relays());
        return std::expm1(b.rate * std::numbers::ln2 / l) *
               std::pow(std::expm1(b.rate * std::numbers::ln2 / (l - 1)), n) *
               (b.max_rounds - l + 1) / profile_.sigma2_f0 * r.rate_product;
    }

    OutagePoint outage(int l, const LinkBudget& b, OutageMethod m) const
    {
        b.validate();
        check_round(l, b, "outage: l");
        double value = 0.0;
        switch (m.kind) {
        case OutageKind::Direct: value = cond_outage_no_help(l, b); break;
        case OutageKind::Asymptotic:
            value = asymptotic_coefficient(l, b) /
                    std::pow(b.rho, static_cast<double>(profile_.n_relays()) + 1.0);
            break;
        case OutageKind::Exact: value = assemble(l, b, m.chi_tail, ChiVariant::Exact, HelpVariant::Exact); break;
        case OutageKind::Approx: value = assemble(l, b, m.chi_tail, ChiVariant::Approx, HelpVariant::Approx); break;
        case OutageKind::UpperBound:
            value = assemble(l, b, m.chi_tail, ChiVariant::Bound, HelpVariant::PsiBound);
            break;
        case OutageKind::ClosedApprox:
            value = assemble(l, b, m.chi_tail, ChiVariant::Approx, HelpVariant::PsiBound);
            break;
        }
        return OutagePoint{l, m, value, value > 1.0};
    }

    /// P_out(0..L) with P_out(0) = 1.
    std::vector<double> outage_curve(const LinkBudget& b, OutageMethod m) const
    {
        b.validate();
        std::vector<double> p(static_cast<std::size_t>(b.max_rounds) + 1);
        p[0] = 1.0;
        for (int l = 1; l <= b.max_rounds; ++l) {
            p[static_cast<std::size_t>(l)] = outage(l, b, m).value;
        }
        return p;
    }

    double throughput_lt(const LinkBudget& b, OutageMethod m) const
    {
        return throughput_lt_from_curve(outage_curve(b, m), b.rate);
    }

    ThroughputResult throughput_dl(const LinkBudget& b, OutageMethod m) const
    {
        return throughput_dl_from_curve(outage_curve(b, m), b.rate);
    }

    QosResult throughput_qos(const LinkBudget& b, OutageMethod m, double rho_max) const
    {
        if (!(rho_max > 0.0 && rho_max <= 1.0)) {
            throw ConfigError("throughput_qos: rho_max must lie in (0, 1]");
        }
        const auto curve = outage_curve(b, m);
        const auto dl = throughput_dl_from_curve(curve, b.rate);
        return QosResult{throughput_lt_from_curve(curve, b.rate), dl.value, dl.monotone,
                         curve.back() <= rho_max};
    }

    /// R / sum_{l=0}^{L-1} P_out(l).
    static double throughput_lt_from_curve(std::span<const double> curve, double rate)
    {
        double denom = 0.0;
        for (std::size_t l = 0; l + 1 < curve.size(); ++l) denom += curve[l];
        return rate / denom;
    }

    /// sum_{l=1}^{L} (R/l) [P_out(l-1) - P_out(l)].
    static ThroughputResult throughput_dl_from_curve(std::span<const double> curve, double rate)
    {
        ThroughputResult r;
        for (std::size_t l = 1; l < curve.size(); ++l) {
            const double drop = curve[l - 1] - curve[l];
            if (drop < 0.0) r.monotone = false;
            r.value += rate / static_cast<double>(l) * drop;
        }
        return r;
    }

private:
    struct RelayDistributions {
        explicit RelayDistributions(const NetworkProfile& p)
            : src_exact(GainKind::SelectedSource, GainMethod::Exact, p)
            , dst_exact(GainKind::SelectedDest, GainMethod::Exact, p)
            , minmax(GainKind::MinMax, GainMethod::Exact, p)
            , sourcemax(GainKind::SourceMax, GainMethod::Exact, p)
        {
            if (p.symmetric_hops()) {
                approx_pair.emplace(GainDistribution(GainKind::SelectedSource, GainMethod::Approx, p),
                                    GainDistribution(GainKind::SelectedDest, GainMethod::Approx, p));
            }
            for (std::size_t i = 0; i < p.n_relays(); ++i) rate_product *= p.min_rate(i);
        }

        const std::pair<GainDistribution, GainDistribution>& approx(const char* what) const
        {
            if (!approx_pair) {
                throw ConfigError(std::string(what) +
                                  ": the approximation needs sigma2_f[i] == sigma2_g[i] for every relay");
            }
            return *approx_pair;
        }

        GainDistribution src_exact;
        GainDistribution dst_exact;
        GainDistribution minmax;
        GainDistribution sourcemax;
        std::optional<std::pair<GainDistribution, GainDistribution>> approx_pair;
        double rate_product = 1.0;
    };

    static void check_round(int v, const LinkBudget& b, const char* what)
    {
        if (v < 1 || v > b.max_rounds) {
            throw IndexError(std::string(what) + " must lie in [1, L]");
        }
    }

    const RelayDistributions& relays(const char* what) const
    {
        if (!relay_) {
            throw ConfigError(std::string(what) + ": profile has no relays");
        }
        return *relay_;
    }

    // Pr[gamma_gr < limit(gamma_f0)] averaged over gamma_f0 in [0, mu_l]; the
    // inner integral of the gamma_gr density is its CDF.
    double upsilon(int l, int k, const LinkBudget& b, const GainDistribution& dest) const
    {
        const double s0 = profile_.sigma2_f0;
        auto integrand = [&](double x) {
            return std::exp(-x / s0) / s0 * dest.cdf(help_gain_limit(x, l, k, b));
        };
        return numerics::quad_1d(integrand, 0.0, snr_threshold(l, b), numerics::relative_settings()).value;
    }

    double assemble(int l, const LinkBudget& b, ChiTail tail, ChiVariant chi, HelpVariant help) const
    {
        double sum = 0.0;
        for (int k = 1; k < l; ++k) {
            const double weight = pr_chi(k, l, b, chi);
            if (weight != 0.0) {
                sum += weight * cond_outage_with_help(l, k, b, help);
            }
        }
        const double multiplicity = tail == ChiTail::Verbatim ? static_cast<double>(b.max_rounds - l + 1) : 1.0;
        return sum + multiplicity * pr_chi(l, l, b, chi) * cond_outage_no_help(l, b);
    }

    NetworkProfile profile_;
    std::optional<RelayDistributions> relay_;
};

// Free-function forms; each builds a fresh analyzer.

inline double pr_chi(int k, int l, const LinkBudget& b, const NetworkProfile& p, ChiVariant v)
{
    return OutageAnalyzer(p).pr_chi(k, l, b, v);
}

inline double cond_outage_no_help(int l, const LinkBudget& b, const NetworkProfile& p)
{
    return OutageAnalyzer(p).cond_outage_no_help(l, b);
}

inline double cond_outage_with_help(int l, int k, const LinkBudget& b, const NetworkProfile& p, HelpVariant v)
{
    return OutageAnalyzer(p).cond_outage_with_help(l, k, b, v);
}

inline OutagePoint outage(int l, const LinkBudget& b, const NetworkProfile& p, OutageMethod m)
{
    return OutageAnalyzer(p).outage(l, b, m);
}

inline double throughput_lt(const LinkBudget& b, const NetworkProfile& p, OutageMethod m)
{
    return OutageAnalyzer(p).throughput_lt(b, m);
}

inline ThroughputResult throughput_dl(const LinkBudget& b, const NetworkProfile& p, OutageMethod m)
{
    return OutageAnalyzer(p).throughput_dl(b, m);
}

inline QosResult throughput_qos(const LinkBudget& b, const NetworkProfile& p, OutageMethod m, double rho_max)
{
    return OutageAnalyzer(p).throughput_qos(b, m, rho_max);
}

/// Negated least-squares slope of log P_out against log rho.
inline double diversity_fit(std::span<const std::pair<double, double>> points)
{
    if (points.size() < 3) {
        throw DomainError("diversity_fit: need at least 3 points");
    }
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [rho, p] = points[i];
        if (!(rho > 0.0) || !(p > 0.0)) {
            throw DomainError("diversity_fit: rho and outage probabilities must be positive");
        }
        if (i > 0 && !(rho > points[i - 1].first)) {
            throw DomainError("diversity_fit: rho must be strictly increasing");
        }
        sx += std::log(rho);
        sy += std::log(p);
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n;
    const double my = sy / n;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [rho, p] : points) {
        const double dx = std::log(rho) - mx;
        sxy += dx * (std::log(p) - my);
        sxx += dx * dx;
    }
    return -sxy / sxx;
}

} // namespace relaylab
