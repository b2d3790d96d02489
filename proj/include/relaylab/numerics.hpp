#pragma once

// Special functions and quadrature used by the analytical outage formulas.
//
// Integrands of the form  e^{-a*beta} * prod_i (1 - e^{-c_i*beta})  are
// handled exactly through ExpMixture (subset expansion). Everything else
// goes through an adaptive Gauss-Kronrod (7/15) rule.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relaylab/errors.hpp"

namespace relaylab::numerics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Exponential mixtures
// ---------------------------------------------------------------------------

struct ExpTerm {
    double weight;
    double rate;

    friend bool operator==(const ExpTerm&, const ExpTerm&) = default;
};

/// f(beta) = sum_i weight_i * exp(-rate_i * beta), kept in canonical form:
/// sorted by rate, equal rates merged, zero weights dropped.
class ExpMixture {
public:
    ExpMixture() = default;

    explicit ExpMixture(std::vector<ExpTerm> terms) : terms_(std::move(terms))
    {
        for (const auto& t : terms_) {
            if (!std::isfinite(t.weight) || !std::isfinite(t.rate) || t.rate < 0.0) {
                throw DomainError("ExpMixture: weights must be finite and rates finite and >= 0");
            }
        }
        canonicalize();
    }

    static ExpMixture constant(double c) { return ExpMixture({{c, 0.0}}); }

    double operator()(double beta) const
    {
        double s = 0.0;
        for (const auto& t : terms_) {
            s += t.weight * std::exp(-t.rate * beta);
        }
        return s;
    }

    ExpMixture scaled(double factor) const
    {
        std::vector<ExpTerm> out;
        out.reserve(terms_.size());
        for (const auto& t : terms_) {
            out.push_back({t.weight * factor, t.rate});
        }
        return ExpMixture(std::move(out));
    }

    /// Multiplies by exp(-rate * beta).
    ExpMixture times_exp(double rate) const
    {
        std::vector<ExpTerm> out;
        out.reserve(terms_.size());
        for (const auto& t : terms_) {
            out.push_back({t.weight, t.rate + rate});
        }
        return ExpMixture(std::move(out));
    }

    friend ExpMixture operator*(const ExpMixture& lhs, const ExpMixture& rhs)
    {
        std::vector<ExpTerm> out;
        out.reserve(lhs.size() * rhs.size());
        for (const auto& a : lhs.terms_) {
            for (const auto& b : rhs.terms_) {
                out.push_back({a.weight * b.weight, a.rate + b.rate});
            }
        }
        return ExpMixture(std::move(out));
    }

    friend ExpMixture operator+(const ExpMixture& lhs, const ExpMixture& rhs)
    {
        std::vector<ExpTerm> out(lhs.terms_);
        out.insert(out.end(), rhs.terms_.begin(), rhs.terms_.end());
        return ExpMixture(std::move(out));
    }

    std::span<const ExpTerm> terms() const noexcept { return terms_; }
    std::size_t size() const noexcept { return terms_.size(); }
    bool empty() const noexcept { return terms_.empty(); }

private:
    void canonicalize()
    {
        std::sort(terms_.begin(), terms_.end(),
                  [](const ExpTerm& a, const ExpTerm& b) { return a.rate < b.rate; });
        std::vector<ExpTerm> merged;
        merged.reserve(terms_.size());
        for (const auto& t : terms_) {
            // Rates produced by different summation orders may differ in the last ulp.
            if (!merged.empty() &&
                t.rate - merged.back().rate <= 1e-14 * std::max(t.rate, merged.back().rate)) {
                merged.back().weight += t.weight;
            } else {
                merged.push_back(t);
            }
        }
        std::erase_if(merged, [](const ExpTerm& t) { return t.weight == 0.0; });
        terms_ = std::move(merged);
    }

    std::vector<ExpTerm> terms_;
};

inline constexpr std::size_t kMaxExpansionFactors = 30;

/// Expands prod_i (1 - exp(-rates[i] * beta)) into an ExpMixture by
/// inclusion-exclusion over subsets.
inline ExpMixture expand_product(std::span<const double> rates)
{
    if (rates.size() > kMaxExpansionFactors) {
        throw ExpansionTooLarge(rates.size());
    }
    ExpMixture acc = ExpMixture::constant(1.0);
    for (double c : rates) {
        if (!std::isfinite(c) || c < 0.0) {
            throw DomainError("expand_product: rates must be finite and >= 0");
        }
        acc = acc * ExpMixture({{1.0, 0.0}, {-1.0, c}});
    }
    return acc;
}

struct MixtureIntegral {
    double value;
    /// sum of |contribution| over terms; value/magnitude measures cancellation.
    double magnitude;
};

inline MixtureIntegral integrate_mixture_detailed(const ExpMixture& m, double upper)
{
    if (std::isnan(upper) || upper < 0.0) {
        throw DomainError("integrate_mixture: upper limit must be >= 0");
    }
    MixtureIntegral out{0.0, 0.0};
    for (const auto& t : m.terms()) {
        double contrib = 0.0;
        if (t.rate == 0.0) {
            if (std::isinf(upper)) {
                throw DomainError("integrate_mixture: divergent integral (rate-0 term over [0, inf))");
            }
            contrib = t.weight * upper;
        } else if (std::isinf(upper)) {
            contrib = t.weight / t.rate;
        } else {
            contrib = -t.weight * std::expm1(-t.rate * upper) / t.rate;
        }
        out.value += contrib;
        out.magnitude += std::abs(contrib);
    }
    return out;
}

/// Integral of m over [0, upper]; upper may be +inf.
inline double integrate_mixture(const ExpMixture& m, double upper)
{
    return integrate_mixture_detailed(m, upper).value;
}

// ---------------------------------------------------------------------------
// Incomplete beta
// ---------------------------------------------------------------------------

inline double complete_beta(double a, double b)
{
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

namespace detail {

// Modified Lentz evaluation of the incomplete-beta continued fraction.
inline double beta_continued_fraction(double a, double b, double x)
{
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            return h;
        }
    }
    throw NumericalError("incomplete_beta: continued fraction did not converge", h, kInf);
}

// B(x; a, b) = x^a * sum_n (1-b)_n x^n / (n! (a+n)), for small x.
inline double beta_power_series(double a, double b, double x)
{
    double term = 1.0; // (1-b)_n x^n / n!
    double sum = 1.0 / a;
    for (int n = 1; n < 1000; ++n) {
        term *= (n - b) * x / n;
        const double add = term / (a + n);
        sum += add;
        if (std::abs(add) <= 1e-17 * std::abs(sum)) {
            return std::exp(a * std::log(x)) * sum;
        }
    }
    throw NumericalError("incomplete_beta: power series did not converge", sum, kInf);
}

} // namespace detail

/// Non-regularized incomplete beta B(x; a, b) = int_0^x t^{a-1} (1-t)^{b-1} dt.
inline double incomplete_beta(double x, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("incomplete_beta: a and b must be positive and finite");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        throw DomainError("incomplete_beta: x must lie in [0, 1]");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return complete_beta(a, b);

    constexpr double kSeriesZone = 0.05;
    if (x <= kSeriesZone && b <= 10.0) {
        return detail::beta_power_series(a, b, x);
    }
    if (1.0 - x <= kSeriesZone && a <= 10.0) {
        return complete_beta(a, b) - detail::beta_power_series(b, a, 1.0 - x);
    }
    if (x < (a + 1.0) / (a + b + 2.0)) {
        const double front = std::exp(a * std::log(x) + b * std::log1p(-x));
        return front * detail::beta_continued_fraction(a, b, x) / a;
    }
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x));
    return complete_beta(a, b) - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

struct QuadratureSettings {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    int max_subdivisions = 2000;

    void validate() const
    {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
            throw ConfigError("QuadratureSettings: tolerances must be > 0");
        }
        if (max_subdivisions < 1) {
            throw ConfigError("QuadratureSettings: max_subdivisions must be >= 1");
        }
    }
};

/// Settings for integrals whose value may be far below abs_tol (deep
/// high-SNR tails): convergence is judged on relative error only.
inline QuadratureSettings relative_settings(double rel_tol = 1e-10)
{
    return QuadratureSettings{rel_tol, 1e-300, 2000};
}

struct QuadResult {
    double value;
    double err_est;
    int subdivisions;
};

namespace detail {

struct GkSegment {
    double a;
    double b;
    double value;
    double error;

    bool operator<(const GkSegment& o) const { return error < o.error; }
};

inline constexpr std::array<double, 8> kGkNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double checked(double v)
{
    if (!std::isfinite(v)) {
        throw NumericalError("quad_1d: integrand returned a non-finite value", v, kInf);
    }
    return v;
}

// QUADPACK qk15 error heuristic.
template <class F>
GkSegment gauss_kronrod_15(F& f, double a, double b)
{
    constexpr double kEpm = std::numeric_limits<double>::epsilon();
    constexpr double kUflow = std::numeric_limits<double>::min();
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = checked(f(centre));
    double res_g = fc * kGaussWeights[3];
    double res_k = fc * kKronrodWeights[7];
    double res_abs = std::abs(res_k);
    std::array<double, 7> f1{};
    std::array<double, 7> f2{};
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kGkNodes[j];
        f1[j] = checked(f(centre - dx));
        f2[j] = checked(f(centre + dx));
        const double sum = f1[j] + f2[j];
        res_k += kKronrodWeights[j] * sum;
        res_abs += kKronrodWeights[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1) {
            res_g += kGaussWeights[j / 2] * sum;
        }
    }
    const double mean = 0.5 * res_k;
    double res_asc = kKronrodWeights[7] * std::abs(fc - mean);
    for (int j = 0; j < 7; ++j) {
        res_asc += kKronrodWeights[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
    }
    const double result = res_k * half;
    res_abs *= std::abs(half);
    res_asc *= std::abs(half);
    double err = std::abs((res_k - res_g) * half);
    if (res_asc != 0.0 && err != 0.0) {
        err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
    }
    if (res_abs > kUflow / (50.0 * kEpm)) {
        err = std::max(kEpm * 50.0 * res_abs, err);
    }
    return {a, b, result, err};
}

template <class F>
QuadResult adaptive_finite(F& f, double a, double b, const QuadratureSettings& s)
{
    std::priority_queue<GkSegment> heap;
    const GkSegment first = gauss_kronrod_15(f, a, b);
    heap.push(first);
    double value = first.value;
    double error = first.error;
    int segments = 1;
    while (error > std::max(s.abs_tol, s.rel_tol * std::abs(value))) {
        const GkSegment worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        const bool splittable = mid > worst.a && mid < worst.b;
        if (segments >= s.max_subdivisions || !splittable) {
            throw NumericalError("quad_1d: tolerance not reached within " +
                                     std::to_string(s.max_subdivisions) + " subdivisions",
                                 value, error);
        }
        heap.pop();
        const GkSegment left = gauss_kronrod_15(f, worst.a, mid);
        const GkSegment right = gauss_kronrod_15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++segments;
        if (error < 0.0 || segments % 64 == 0) {
            // Re-sum occasionally so incremental drift cannot mask convergence.
            auto copy = heap;
            value = 0.0;
            error = 0.0;
            while (!copy.empty()) {
                value += copy.top().value;
                error += copy.top().error;
                copy.pop();
            }
        }
    }
    return {value, error, segments};
}

} // namespace detail

/// Adaptive Gauss-Kronrod integral of f over [a, b]; b may be +inf, in which
/// case x = a + u/(1-u) maps the range onto [0, 1).
template <class F>
QuadResult quad_1d(F&& f, double a, double b, const QuadratureSettings& s = {})
{
    s.validate();
    if (!std::isfinite(a) || std::isnan(b) || b < a) {
        throw DomainError("quad_1d: need finite a <= b");
    }
    if (a == b) {
        return {0.0, 0.0, 0};
    }
    if (std::isinf(b)) {
        auto mapped = [&](double u) {
            const double one_minus = 1.0 - u;
            return f(a + u / one_minus) / (one_minus * one_minus);
        };
        return detail::adaptive_finite(mapped, 0.0, 1.0, s);
    }
    return detail::adaptive_finite(f, a, b, s);
}

/// Iterated integral  int_0^U int_0^{[inner_upper(x)]^+} f(x, y) dy dx.
template <class F, class G>
double quad_2d_region(F&& f, double outer_upper, G&& inner_upper, const QuadratureSettings& s = {})
{
    if (!std::isfinite(outer_upper) || outer_upper < 0.0) {
        throw DomainError("quad_2d_region: outer upper limit must be finite and >= 0");
    }
    auto outer = [&](double x) {
        const double y_max = std::max(0.0, inner_upper(x));
        return quad_1d([&](double y) { return f(x, y); }, 0.0, y_max, s).value;
    };
    return quad_1d(outer, 0.0, outer_upper, s).value;
}

} // namespace relaylab::numerics
