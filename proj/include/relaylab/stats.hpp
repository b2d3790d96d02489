#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "relaylab/errors.hpp"

namespace relaylab::stats {

/// Two-sided one-sample Kolmogorov-Smirnov statistic sup |F_n - F|.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf)
{
    if (samples.empty()) throw DomainError("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic KS critical value at the 1% level.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

/// z-score of an observed count against a hypothesised probability, using
/// the binomial standard deviation under that hypothesis.
inline double binomial_z(std::uint64_t successes, std::uint64_t trials, double p_null)
{
    const double n = static_cast<double>(trials);
    const double sd = std::sqrt(p_null * (1.0 - p_null) / n);
    const double diff = static_cast<double>(successes) / n - p_null;
    if (sd == 0.0) return diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
    return diff / sd;
}

} // namespace relaylab::stats
