#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "relaylab/numerics.hpp"

using namespace relaylab;
using namespace relaylab::numerics;

TEST(ExpMixture, CanonicalFormMergesRatesAndDropsZeros)
{
    const ExpMixture m({{1.0, 2.0}, {0.5, 2.0}, {0.0, 3.0}, {-1.0, 0.0}});
    ASSERT_EQ(m.size(), 2u);
    EXPECT_DOUBLE_EQ(m.terms()[0].rate, 0.0);
    EXPECT_DOUBLE_EQ(m.terms()[0].weight, -1.0);
    EXPECT_DOUBLE_EQ(m.terms()[1].weight, 1.5);
    EXPECT_NEAR(m(0.7), -1.0 + 1.5 * std::exp(-1.4), 1e-15);
}

TEST(ExpMixture, CancellingTermsVanish)
{
    const ExpMixture m({{1.0, 1.0}, {-1.0, 1.0}});
    EXPECT_TRUE(m.empty());
    EXPECT_EQ(m(3.0), 0.0);
}

TEST(ExpMixture, RejectsNegativeRate)
{
    EXPECT_THROW(ExpMixture({{1.0, -0.5}}), DomainError);
    EXPECT_THROW(ExpMixture({{NAN, 0.5}}), DomainError);
}

TEST(ExpMixture, AlgebraMatchesPointwise)
{
    const ExpMixture a({{2.0, 0.5}, {1.0, 0.0}});
    const ExpMixture b({{-1.0, 1.5}});
    for (double x : {0.0, 0.3, 2.0}) {
        EXPECT_NEAR((a * b)(x), a(x) * b(x), 1e-14);
        EXPECT_NEAR((a + b)(x), a(x) + b(x), 1e-14);
        EXPECT_NEAR(a.scaled(3.0)(x), 3.0 * a(x), 1e-14);
        EXPECT_NEAR(a.times_exp(0.25)(x), a(x) * std::exp(-0.25 * x), 1e-14);
    }
}

TEST(ExpandProduct, DistinctRatesGiveAllSubsets)
{
    const std::vector<double> rates{1.0, 2.5, 7.0};
    const auto m = expand_product(rates);
    EXPECT_EQ(m.size(), 8u);
    for (double x : {0.0, 0.1, 1.0, 5.0}) {
        double p = 1.0;
        for (double r : rates) p *= 1.0 - std::exp(-r * x);
        EXPECT_NEAR(m(x), p, 1e-14);
    }
}

TEST(ExpandProduct, EqualRatesCollapseToBinomial)
{
    const std::vector<double> rates(4, 2.0);
    EXPECT_EQ(expand_product(rates).size(), 5u);
}

TEST(ExpandProduct, TermBudget)
{
    const std::vector<double> ok(kMaxExpansionFactors, 1.0);
    EXPECT_NO_THROW(expand_product(ok));
    const std::vector<double> too_many(kMaxExpansionFactors + 1, 1.0);
    try {
        expand_product(too_many);
        FAIL() << "expected ExpansionTooLarge";
    } catch (const ExpansionTooLarge& e) {
        EXPECT_EQ(e.factors(), kMaxExpansionFactors + 1);
        EXPECT_NE(std::string(e.what()).find("quad_1d"), std::string::npos);
    }
    EXPECT_THROW(expand_product(std::vector<double>{1.0, -1.0}), DomainError);
}

TEST(IntegrateMixture, ClosedFormCases)
{
    const ExpMixture m({{3.0, 2.0}, {1.0, 0.0}});
    EXPECT_NEAR(integrate_mixture(m, 1.5), 3.0 * (1.0 - std::exp(-3.0)) / 2.0 + 1.5, 1e-15);
    EXPECT_NEAR(integrate_mixture(ExpMixture({{3.0, 2.0}}), kInf), 1.5, 1e-15);
    EXPECT_THROW(integrate_mixture(m, kInf), DomainError);
    EXPECT_EQ(integrate_mixture(m, 0.0), 0.0);
}

// Mixture integral against Boost Gauss-Kronrod on random rate sets, N <= 8.
TEST(IntegrateMixture, AgreesWithQuadratureUpTo8Factors)
{
    std::mt19937_64 gen(20240601);
    std::uniform_real_distribution<double> rate(0.2, 6.0);
    std::uniform_real_distribution<double> upper(0.05, 6.0);
    for (int n = 1; n <= 8; ++n) {
        for (int rep = 0; rep < 6; ++rep) {
            std::vector<double> rates(static_cast<std::size_t>(n));
            for (auto& r : rates) r = rate(gen);
            const double u = upper(gen);
            auto prod = [&](double x) {
                double p = 1.0;
                for (double r : rates) p *= -std::expm1(-r * x);
                return p;
            };
            const double expected = oracle::gk(prod, 0.0, u);
            const double got = integrate_mixture(expand_product(rates), u);
            EXPECT_NEAR(got, expected, 1e-9 * std::max(1.0, expected)) << "n=" << n << " u=" << u;
            const double quad = quad_1d(prod, 0.0, u, relative_settings(1e-12)).value;
            EXPECT_NEAR(quad, expected, 1e-9 * std::max(1.0, expected));
        }
    }
}

TEST(IncompleteBeta, HandExample)
{
    // B(1/2; 2, 1/2) = int_0^{1/2} t (1-t)^{-1/2} dt = 4/3 - (2 sqrt(1/2) - (2/3)(1/2)^{3/2}).
    const double expected = 4.0 / 3.0 - (2.0 * std::sqrt(0.5) - 2.0 / 3.0 * std::pow(0.5, 1.5));
    EXPECT_NEAR(expected, 0.1548220, 5e-8);
    EXPECT_NEAR(incomplete_beta(0.5, 2.0, 0.5), expected, 1e-14);
}

TEST(IncompleteBeta, MatchesBoostOnGrid)
{
    for (double a : {0.5, 1.0, 2.0, 4.0, 10.0, 30.0}) {
        for (double b : {0.1, 0.5, 1.0, 3.0, 10.0}) {
            for (double x : {1e-6, 0.01, 0.04, 0.2, 0.5, 0.8, 0.97, 0.999}) {
                const double ref = oracle::incomplete_beta(x, a, b);
                EXPECT_NEAR(incomplete_beta(x, a, b), ref, 1e-11 * ref) << a << ' ' << b << ' ' << x;
            }
        }
    }
}

TEST(IncompleteBeta, EndpointsAndReflection)
{
    for (double a : {0.5, 2.0, 7.0}) {
        for (double b : {0.25, 1.0, 4.0}) {
            EXPECT_EQ(incomplete_beta(0.0, a, b), 0.0);
            EXPECT_DOUBLE_EQ(incomplete_beta(1.0, a, b), complete_beta(a, b));
            for (double x : {0.1, 0.45, 0.9}) {
                EXPECT_NEAR(incomplete_beta(x, a, b) + incomplete_beta(1.0 - x, b, a), complete_beta(a, b),
                            1e-12 * complete_beta(a, b));
            }
        }
    }
    EXPECT_NEAR(complete_beta(2.0, 3.0), 1.0 / 12.0, 1e-15);
}

TEST(IncompleteBeta, MonotoneInX)
{
    for (double a : {0.5, 3.0, 12.0}) {
        for (double b : {0.3, 1.0, 5.0}) {
            double prev = 0.0;
            for (int i = 1; i <= 400; ++i) {
                const double v = incomplete_beta(i / 400.0, a, b);
                EXPECT_GE(v, prev);
                prev = v;
            }
        }
    }
}

TEST(IncompleteBeta, RejectsBadArguments)
{
    EXPECT_THROW(incomplete_beta(-0.1, 1.0, 1.0), DomainError);
    EXPECT_THROW(incomplete_beta(1.1, 1.0, 1.0), DomainError);
    EXPECT_THROW(incomplete_beta(0.5, 0.0, 1.0), DomainError);
    EXPECT_THROW(incomplete_beta(0.5, 1.0, -2.0), DomainError);
}

TEST(Quad1d, ElementaryIntegrals)
{
    EXPECT_NEAR(quad_1d([](double x) { return x * x; }, 0.0, 1.0).value, 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(quad_1d([](double x) { return std::exp(-x); }, 0.0, kInf).value, 1.0, 1e-10);
    EXPECT_NEAR(quad_1d([](double x) { return std::sin(x); }, 0.0, std::numbers::pi).value, 2.0, 1e-12);
    EXPECT_NEAR(quad_1d([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, {1e-8, 1e-10, 5000}).value, 2.0,
                1e-6);
    EXPECT_EQ(quad_1d([](double) { return 1.0; }, 2.0, 2.0).value, 0.0);
}

TEST(Quad1d, RelativeSettingsResolveTinyIntegrals)
{
    const double scale = 1e-40;
    const auto r = quad_1d([&](double x) { return scale * x; }, 0.0, 1.0, relative_settings());
    EXPECT_NEAR(r.value, 0.5 * scale, 1e-12 * scale);
}

TEST(Quad1d, NonConvergenceCarriesBestEstimate)
{
    auto spiky = [](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3)); };
    try {
        quad_1d(spiky, 0.0, 1.0, {1e-14, 1e-14, 5});
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        const double exact = 2.0 * std::sqrt(0.3) + 2.0 * std::sqrt(0.7);
        EXPECT_NEAR(e.best_estimate(), exact, 0.2);
        EXPECT_GT(e.error_estimate(), 0.0);
    }
}

TEST(Quad1d, NonFiniteIntegrandIsAnError)
{
    EXPECT_THROW(quad_1d([](double) { return NAN; }, 0.0, 1.0), NumericalError);
    EXPECT_THROW(quad_1d([](double x) { return x; }, 1.0, 0.0), DomainError);
    EXPECT_THROW(quad_1d([](double x) { return x; }, 0.0, 1.0, {0.0, 1e-12, 10}), ConfigError);
}

TEST(Quad2dRegion, TriangleAndSquare)
{
    const double tri = quad_2d_region([](double, double) { return 1.0; }, 1.0, [](double x) { return x; });
    EXPECT_NEAR(tri, 0.5, 1e-13);
    const double sq = quad_2d_region([](double x, double y) { return x * y; }, 1.0, [](double) { return 1.0; });
    EXPECT_NEAR(sq, 0.25, 1e-13);
    const double tri_xy = quad_2d_region([](double x, double y) { return x + y; }, 2.0, [](double x) { return 2.0 - x; });
    EXPECT_NEAR(tri_xy, 8.0 / 3.0, 1e-12);
}

TEST(Quad2dRegion, NegativeInnerLimitIsClampedToZero)
{
    const double v = quad_2d_region([](double, double) { return 1.0; }, 1.0, [](double x) { return x - 0.5; });
    EXPECT_NEAR(v, 0.125, 1e-13);
    const double none = quad_2d_region([](double, double) { return 1.0; }, 1.0, [](double) { return -1e-17; });
    EXPECT_EQ(none, 0.0);
}

TEST(ExpandProduct, SmallCasesTermByTerm)
{
    const auto empty = expand_product(std::vector<double>{});
    ASSERT_EQ(empty.size(), 1u);
    EXPECT_EQ(empty.terms()[0], (ExpTerm{1.0, 0.0}));

    const auto one = expand_product(std::vector<double>{0.7});
    ASSERT_EQ(one.size(), 2u);
    EXPECT_EQ(one.terms()[0], (ExpTerm{1.0, 0.0}));
    EXPECT_EQ(one.terms()[1], (ExpTerm{-1.0, 0.7}));

    const auto two = expand_product(std::vector<double>{1.0, 2.0});
    ASSERT_EQ(two.size(), 4u);
    const std::vector<ExpTerm> expected{{1.0, 0.0}, {-1.0, 1.0}, {-1.0, 2.0}, {1.0, 3.0}};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(two.terms()[i], expected[i]);
}

TEST(IntegrateMixture, UnitExamples)
{
    EXPECT_DOUBLE_EQ(integrate_mixture(ExpMixture({{1.0, 1.0}}), kInf), 1.0);
    EXPECT_DOUBLE_EQ(integrate_mixture(ExpMixture::constant(1.0), 2.5), 2.5);
    const auto m = expand_product(std::vector<double>{1.0, 2.0}).times_exp(1.0);
    const double ref = oracle::gk([](double b) { return std::exp(-b) * (1 - std::exp(-b)) * (1 - std::exp(-2 * b)); },
                                  0.0, 1.0);
    EXPECT_NEAR(integrate_mixture(m, 1.0), ref, 1e-14);
}

TEST(IncompleteBeta, SingularEndpointBySubstitution)
{
    // t = 1 - u^2 removes the (1-t)^{-1/2} singularity: B(1/2; 2, 1/2) = int_{sqrt(1/2)}^{1} 2 (1-u^2) du.
    const double ref = oracle::gk([](double u) { return 2.0 * (1.0 - u * u); }, std::sqrt(0.5), 1.0);
    EXPECT_NEAR(incomplete_beta(0.5, 2.0, 0.5), ref, 1e-14);
    EXPECT_DOUBLE_EQ(incomplete_beta(1.0, 1.0, 1.0), 1.0);
}

TEST(IncompleteBeta, CompleteValueMatchesGammaIdentity)
{
    for (int a = 1; a <= 10; ++a) {
        for (double b : {0.3, 1.0, 2.5, 7.0}) {
            const double ref = std::tgamma(a) * std::tgamma(b) / std::tgamma(a + b);
            EXPECT_NEAR(incomplete_beta(1.0, a, b), ref, 1e-10 * ref);
        }
    }
}

TEST(Quad1d, PolynomialsUpToDegree5AreExact)
{
    EXPECT_NEAR(quad_1d([](double) { return 1.0; }, 0.0, 3.0).value, 3.0, 1e-12);
    const double coeffs[] = {0.5, -1.0, 2.0, 0.25, -3.0, 1.5};
    for (int deg = 0; deg <= 5; ++deg) {
        auto poly = [&](double x) {
            double s = 0.0;
            for (int i = deg; i >= 0; --i) s = s * x + coeffs[i];
            return s;
        };
        double exact = 0.0;
        for (int i = 0; i <= deg; ++i) exact += coeffs[i] * (std::pow(2.0, i + 1) - std::pow(-1.0, i + 1)) / (i + 1);
        const auto r = quad_1d(poly, -1.0, 2.0);
        EXPECT_NEAR(r.value, exact, 1e-12) << "degree " << deg;
        EXPECT_EQ(r.subdivisions, 1);
    }
}

// Iterated-integral form of the help-phase outage term for one relay,
// checked against direct sampling of the event it describes.
TEST(Quad2dRegion, HelpTermAgreesWithSampling)
{
    const double rho = 10.0, R = 1.0;
    const double mu2 = (std::pow(2.0, R / 2) - 1.0) / rho;
    auto beta = [&](double x) { return (std::pow(2.0, R) / (1.0 + rho * x) - 1.0 - rho * x) / rho; };
    // N = 1, unit variances: the selected relay's second hop is Exp(1).
    const double v = quad_2d_region([](double x, double y) { return std::exp(-x) * std::exp(-y); }, mu2, beta,
                                    relative_settings(1e-11));
    std::mt19937_64 gen(99);
    std::exponential_distribution<double> e(1.0);
    const int n = 10000000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const double x = e(gen), y = e(gen);
        if (x < mu2 && y < beta(x)) ++hits;
    }
    const double p = static_cast<double>(hits) / n;
    EXPECT_NEAR(v, p, 3.0 * std::sqrt(v * (1 - v) / n) + 1e-12);
}
