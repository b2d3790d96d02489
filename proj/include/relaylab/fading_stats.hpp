#pragma once

// Distributions of the gains seen through opportunistic relay selection:
//   SelectedSource  gamma_fr   source -> selected relay
//   SelectedDest    gamma_gr   selected relay -> destination
//   MinMax          gamma_max  = max_i min(gamma_fi, gamma_gi)
//   SourceMax       gamma^s_max = max_i gamma_fi
// All gains are exponential (Rayleigh fading) with the profile means.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relaylab/errors.hpp"
#include "relaylab/numerics.hpp"

namespace relaylab {

/// Link variances of the relay network. A profile with zero relays
/// describes plain direct transmission; only the simulator accepts it.
struct NetworkProfile {
    std::vector<double> sigma2_f; ///< source -> relay i
    std::vector<double> sigma2_g; ///< relay i -> destination
    double sigma2_f0 = 1.0;       ///< source -> destination

    std::size_t n_relays() const noexcept { return sigma2_f.size(); }

    static NetworkProfile uniform(std::size_t n, double sigma2 = 1.0)
    {
        return NetworkProfile{std::vector<double>(n, sigma2), std::vector<double>(n, sigma2), sigma2};
    }

    void validate() const
    {
        if (sigma2_f.size() != sigma2_g.size()) {
            throw ConfigError("NetworkProfile: sigma2_f and sigma2_g must have one entry per relay");
        }
        auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!ok(sigma2_f0)) {
            throw ConfigError("NetworkProfile: sigma2_f0 must be positive and finite");
        }
        for (std::size_t i = 0; i < sigma2_f.size(); ++i) {
            if (!ok(sigma2_f[i]) || !ok(sigma2_g[i])) {
                throw ConfigError("NetworkProfile: relay " + std::to_string(i) +
                                  " variances must be positive and finite");
            }
        }
    }

    void require_relays() const
    {
        validate();
        if (n_relays() == 0) {
            throw ConfigError("NetworkProfile: at least one relay is required");
        }
    }

    /// Same network with the roles of the two relay hops exchanged.
    NetworkProfile swapped() const { return NetworkProfile{sigma2_g, sigma2_f, sigma2_f0}; }

    /// Rate of m_i = min(gamma_fi, gamma_gi): 1/sigma2_fi + 1/sigma2_gi.
    double min_rate(std::size_t i) const { return 1.0 / sigma2_f[i] + 1.0 / sigma2_g[i]; }

    bool equal_variances() const
    {
        auto all_same = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
        };
        return !sigma2_f.empty() && all_same(sigma2_f) && all_same(sigma2_g);
    }

    bool symmetric_hops() const { return sigma2_f == sigma2_g; }

    friend bool operator==(const NetworkProfile&, const NetworkProfile&) = default;
};

enum class GainKind { SelectedSource, SelectedDest, MinMax, SourceMax };
enum class GainMethod { Exact, EqualVariance, Approx, HighSnr };

inline const char* to_string(GainKind k)
{
    switch (k) {
    case GainKind::SelectedSource: return "selected_source";
    case GainKind::SelectedDest: return "selected_dest";
    case GainKind::MinMax: return "min_max";
    case GainKind::SourceMax: return "source_max";
    }
    return "?";
}

inline const char* to_string(GainMethod m)
{
    switch (m) {
    case GainMethod::Exact: return "exact";
    case GainMethod::EqualVariance: return "equal_variance";
    case GainMethod::Approx: return "approx";
    case GainMethod::HighSnr: return "high_snr";
    }
    return "?";
}

namespace detail {

/// 1 - exp(-rate*x) without cancellation.
inline double exp_cdf(double rate, double x) { return -std::expm1(-rate * x); }

inline double truncate_density(double v, const char* where)
{
    if (v < 0.0 && v > -1e-12) {
        debug_log(std::string(where) + ": truncated negative density " + std::to_string(v));
        return 0.0;
    }
    return v;
}

} // namespace detail

/// Immutable CDF/PDF evaluator for one of the selection gains.
class GainDistribution {
public:
    struct Options {
        /// Lets Approx run on profiles with sigma2_f != sigma2_g, using the
        /// per-relay geometric mean as sigma2_i. Exploratory use only.
        bool approx_geometric_mean_override = false;
    };

    GainDistribution(GainKind kind, GainMethod method, NetworkProfile profile)
        : GainDistribution(kind, method, std::move(profile), Options{})
    {
    }

    GainDistribution(GainKind kind, GainMethod method, NetworkProfile profile, Options opts)
        : kind_(kind), method_(method), input_profile_(std::move(profile))
    {
        input_profile_.require_relays();
        const bool selected = kind == GainKind::SelectedSource || kind == GainKind::SelectedDest;
        if (!selected && method != GainMethod::Exact) {
            throw ConfigError(std::string("GainDistribution: ") + to_string(kind) +
                              " only supports the exact method");
        }
        // gamma_gr is gamma_fr of the network with both hops exchanged.
        profile_ = kind == GainKind::SelectedDest ? input_profile_.swapped() : input_profile_;
        const std::size_t n = profile_.n_relays();
        rates_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            rates_[i] = profile_.min_rate(i);
        }

        switch (method) {
        case GainMethod::Exact:
            if (selected) {
                prepare_exact();
            }
            break;
        case GainMethod::EqualVariance:
            if (!profile_.equal_variances()) {
                throw ConfigError("GainDistribution: equal_variance needs identical sigma2_f and "
                                  "identical sigma2_g across relays");
            }
            break;
        case GainMethod::Approx:
            if (!profile_.symmetric_hops() && !opts.approx_geometric_mean_override) {
                throw ConfigError("GainDistribution: approx needs sigma2_f[i] == sigma2_g[i] for "
                                  "every relay (set the geometric-mean override to force it)");
            }
            approx_sigma2_.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                approx_sigma2_[i] = std::sqrt(profile_.sigma2_f[i] * profile_.sigma2_g[i]);
            }
            break;
        case GainMethod::HighSnr: {
            double prod = 1.0;
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                prod *= rates_[i];
                mean += profile_.sigma2_g[i] / (profile_.sigma2_f[i] + profile_.sigma2_g[i]);
            }
            high_snr_coeff_ = prod * mean / static_cast<double>(n);
            break;
        }
        }
    }

    GainKind kind() const noexcept { return kind_; }
    GainMethod method() const noexcept { return method_; }
    const NetworkProfile& profile() const noexcept { return input_profile_; }

    double cdf(double gamma) const
    {
        check_argument(gamma);
        if (std::isinf(gamma)) return 1.0;
        if (gamma == 0.0) return 0.0;
        switch (kind_) {
        case GainKind::MinMax: return minmax_cdf(gamma);
        case GainKind::SourceMax: return sourcemax_cdf(gamma);
        default: break;
        }
        switch (method_) {
        case GainMethod::Exact: return std::clamp(exact_cdf(gamma), 0.0, 1.0);
        case GainMethod::EqualVariance: return std::clamp(equal_variance_cdf(gamma), 0.0, 1.0);
        case GainMethod::Approx: return approx_cdf(gamma);
        case GainMethod::HighSnr: return std::min(1.0, high_snr_coeff_ * std::pow(gamma, n()));
        }
        return 0.0;
    }

    double pdf(double gamma) const
    {
        check_argument(gamma);
        if (std::isinf(gamma)) return 0.0;
        switch (kind_) {
        case GainKind::MinMax: return minmax_pdf(gamma);
        case GainKind::SourceMax: return sourcemax_pdf(gamma);
        default: break;
        }
        switch (method_) {
        case GainMethod::Exact: return detail::truncate_density(exact_pdf(gamma), "exact pdf");
        case GainMethod::EqualVariance:
            return detail::truncate_density(equal_variance_pdf(gamma), "equal-variance pdf");
        case GainMethod::Approx: return approx_pdf(gamma);
        case GainMethod::HighSnr: {
            // Derivative of the clamped corollary form.
            if (high_snr_coeff_ * std::pow(gamma, n()) >= 1.0) return 0.0;
            return high_snr_coeff_ * n() * std::pow(gamma, n() - 1.0);
        }
        }
        return 0.0;
    }

private:
    static constexpr std::size_t kMaxExpandedRelays = 20;

    double n() const { return static_cast<double>(rates_.size()); }

    static void check_argument(double gamma)
    {
        if (std::isnan(gamma) || gamma < 0.0) {
            throw DomainError("GainDistribution: gain argument must be >= 0");
        }
    }

    double prod_min_cdf(double gamma, std::size_t skip) const
    {
        double p = 1.0;
        for (std::size_t i = 0; i < rates_.size(); ++i) {
            if (i != skip) p *= detail::exp_cdf(rates_[i], gamma);
        }
        return p;
    }

    // ---- MinMax / SourceMax ------------------------------------------------

    double minmax_cdf(double gamma) const { return prod_min_cdf(gamma, rates_.size()); }

    double minmax_pdf(double gamma) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < rates_.size(); ++i) {
            s += rates_[i] * std::exp(-rates_[i] * gamma) * prod_min_cdf(gamma, i);
        }
        return s;
    }

    double sourcemax_cdf(double gamma) const
    {
        double p = 1.0;
        for (double s2 : profile_.sigma2_f) p *= detail::exp_cdf(1.0 / s2, gamma);
        return p;
    }

    double sourcemax_pdf(double gamma) const
    {
        const auto& sf = profile_.sigma2_f;
        double s = 0.0;
        for (std::size_t i = 0; i < sf.size(); ++i) {
            double p = std::exp(-gamma / sf[i]) / sf[i];
            for (std::size_t j = 0; j < sf.size(); ++j) {
                if (j != i) p *= detail::exp_cdf(1.0 / sf[j], gamma);
            }
            s += p;
        }
        return s;
    }

    // ---- Exact -------------------------------------------------------------

    void prepare_exact()
    {
        const std::size_t n = rates_.size();
        if (n > kMaxExpandedRelays) {
            return; // quadrature only
        }
        inner_.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> others;
            for (std::size_t i = 0; i < n; ++i) {
                if (i != j) others.push_back(rates_[i]);
            }
            inner_.push_back(numerics::expand_product(others).times_exp(1.0 / profile_.sigma2_g[j]));
        }
    }

    // J_j(gamma) = int_0^gamma e^{-beta/sigma2_gj} prod_{i != j} (1 - e^{-c_i beta}) dbeta.
    // Uses the subset expansion unless it loses more than ~1e-12 relative
    // accuracy to cancellation (small gamma), then falls back to quadrature.
    double inner_integral(std::size_t j, double gamma) const
    {
        if (j < inner_.size()) {
            const auto r = numerics::integrate_mixture_detailed(inner_[j], gamma);
            constexpr double kCancellationLimit = 1e-12;
            if (r.magnitude * 1e-15 <= kCancellationLimit * std::abs(r.value)) {
                return r.value;
            }
        }
        const double decay = 1.0 / profile_.sigma2_g[j];
        auto integrand = [&](double beta) { return std::exp(-decay * beta) * prod_min_cdf(beta, j); };
        return numerics::quad_1d(integrand, 0.0, gamma, numerics::relative_settings(1e-12)).value;
    }

    double exact_cdf(double gamma) const
    {
        double s = 0.0;
        for (std::size_t j = 0; j < rates_.size(); ++j) {
            s += std::exp(-gamma / profile_.sigma2_f[j]) * inner_integral(j, gamma) / profile_.sigma2_g[j];
        }
        return minmax_cdf(gamma) - s;
    }

    double exact_pdf(double gamma) const
    {
        double s = 0.0;
        for (std::size_t j = 0; j < rates_.size(); ++j) {
            const double sf = profile_.sigma2_f[j];
            const double sg = profile_.sigma2_g[j];
            s += std::exp(-rates_[j] * gamma) * prod_min_cdf(gamma, j) / sf;
            if (gamma > 0.0) {
                s += std::exp(-gamma / sf) * inner_integral(j, gamma) / (sf * sg);
            }
        }
        return s;
    }

    // ---- Equal variances (incomplete beta form) -----------------------------

    double equal_variance_cdf(double gamma) const
    {
        const double sf = profile_.sigma2_f.front();
        const double sg = profile_.sigma2_g.front();
        const double c = rates_.front();
        const double t = detail::exp_cdf(c, gamma);
        const double b = sf / (sf + sg);
        return std::pow(t, n()) - n() * b * std::exp(-gamma / sf) * numerics::incomplete_beta(t, n(), b);
    }

    double equal_variance_pdf(double gamma) const
    {
        const double sf = profile_.sigma2_f.front();
        const double sg = profile_.sigma2_g.front();
        const double c = rates_.front();
        const double t = detail::exp_cdf(c, gamma);
        const double b = sf / (sf + sg);
        const double beta_term = t > 0.0 ? numerics::incomplete_beta(t, n(), b) : 0.0;
        return n() / sf * std::exp(-c * gamma) * std::pow(t, n() - 1.0) +
               n() / (sf + sg) * std::exp(-gamma / sf) * beta_term;
    }

    // ---- Approximation (independence of the two hops of the selected relay) --

    // Returns (P, 1 - P) with P = prod_i (1 - e^{-2 gamma / sigma2_i}).
    std::pair<double, double> approx_product(double gamma) const
    {
        double p = 1.0;
        double log_p = 0.0;
        for (double s2 : approx_sigma2_) {
            const double e = std::exp(-2.0 * gamma / s2);
            p *= -std::expm1(-2.0 * gamma / s2);
            log_p += std::log1p(-e);
        }
        return {p, -std::expm1(log_p)};
    }

    double approx_cdf(double gamma) const
    {
        const auto [p, q] = approx_product(gamma);
        // 1 - sqrt(1 - P) written without cancellation for small P.
        return p / (1.0 + std::sqrt(q));
    }

    double approx_pdf(double gamma) const
    {
        const auto [p, q] = approx_product(gamma);
        (void)p;
        if (q <= 0.0) return 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < approx_sigma2_.size(); ++i) {
            double term = std::exp(-2.0 * gamma / approx_sigma2_[i]) / approx_sigma2_[i];
            for (std::size_t j = 0; j < approx_sigma2_.size(); ++j) {
                if (j != i) term *= -std::expm1(-2.0 * gamma / approx_sigma2_[j]);
            }
            s += term;
        }
        return s / std::sqrt(q);
    }

    GainKind kind_;
    GainMethod method_;
    NetworkProfile input_profile_;
    NetworkProfile profile_;
    std::vector<double> rates_;
    std::vector<numerics::ExpMixture> inner_;
    std::vector<double> approx_sigma2_;
    double high_snr_coeff_ = 0.0;
};

inline double cdf(const GainDistribution& d, double gamma) { return d.cdf(gamma); }
inline double pdf(const GainDistribution& d, double gamma) { return d.pdf(gamma); }

/// N * gamma^{N-1} * prod_i (1/sigma2_fi + 1/sigma2_gi); dominates the
/// MinMax density near zero.
inline double pdf_minmax_upper(const NetworkProfile& profile, double gamma)
{
    profile.require_relays();
    if (std::isnan(gamma) || gamma < 0.0) {
        throw DomainError("pdf_minmax_upper: gain argument must be >= 0");
    }
    const auto n = profile.n_relays();
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) prod *= profile.min_rate(i);
    return static_cast<double>(n) * std::pow(gamma, static_cast<double>(n) - 1.0) * prod;
}

struct Sandwich {
    double lower; ///< Pr[gamma^s_max < gamma]
    double mid;   ///< Pr[gamma_fr < gamma]
    double upper; ///< Pr[gamma_max < gamma]
};

inline Sandwich sandwich_check(const NetworkProfile& profile, double gamma)
{
    const GainDistribution lower(GainKind::SourceMax, GainMethod::Exact, profile);
    const GainDistribution mid(GainKind::SelectedSource, GainMethod::Exact, profile);
    const GainDistribution upper(GainKind::MinMax, GainMethod::Exact, profile);
    return {lower.cdf(gamma), mid.cdf(gamma), upper.cdf(gamma)};
}

} // namespace relaylab
