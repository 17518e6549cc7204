#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <gtest/gtest.h>

#include "defectscope/defect_indicator.hpp"
#include "defectscope/errors.hpp"
#include "defectscope/num_kernel.hpp"
#include "oracles.hpp"

using namespace defectscope;

namespace {

// K_{is}(gamma) by a plain trapezoid rule with a fixed, much finer spacing.
double brute_force_k_imag(double s, double gamma, double spacing) {
    const double t_max = std::acosh(745.0 / gamma);
    const auto n = static_cast<long>(std::ceil(t_max / spacing));
    const double h = t_max / static_cast<double>(n);
    double sum = 0.5 * (std::exp(-gamma) + std::exp(-gamma * std::cosh(t_max)) * std::cos(s * t_max));
    for (long k = 1; k < n; ++k) {
        const double t = h * static_cast<double>(k);
        sum += std::exp(-gamma * std::cosh(t)) * std::cos(s * t);
    }
    return h * sum;
}

double correction_from_quadrature(double gamma, double tau) {
    return a_c(gamma, tau);
}

double correction_from_expansion(double gamma, double tau) {
    const SabrParams p{gamma, 1.0, 1.0};
    return indicator(p) - defect_asymptotic_large_T(p, tau);
}

}  // namespace

TEST(BesselKImag, OrderZeroAtOne) {
    EXPECT_NEAR(bessel_k_imag(0.0, 1.0), 0.4210244382, 1e-10);
}

TEST(BesselKImag, OrderZeroMatchesRealOrderOracle) {
    for (double g = 0.05; g <= 5.0; g *= 1.3) {
        const double ref = boost::math::cyl_bessel_k(0.0, g);
        EXPECT_NEAR(bessel_k_imag(0.0, g) / ref, 1.0, 1e-8) << "gamma=" << g;
    }
}

TEST(BesselKImag, FiniteOnTestedRange) {
    for (double s = 0.0; s <= 50.0; s += 2.5) {
        for (double g : {0.01, 0.1, 1.0, 5.0}) {
            EXPECT_TRUE(std::isfinite(bessel_k_imag(s, g))) << s << " " << g;
        }
    }
}

TEST(BesselKImag, AgreesWithTenfoldRefinement) {
    const DefectQuadConfig cfg;
    for (double s : {0.5, 1.5, 3.0}) {
        for (double g : {0.1, 0.5, 2.0}) {
            const double spacing = std::min(cfg.bessel_t_step_factor, M_PI / (10.0 * std::max(s, 1.0))) / 10.0;
            const double ref = brute_force_k_imag(s, g, spacing);
            EXPECT_NEAR(bessel_k_imag(s, g), ref, cfg.rel_tol * std::abs(ref) + 1e-15) << s << " " << g;
        }
    }
}

TEST(BesselKImag, RejectsNonPositiveGamma) {
    EXPECT_THROW(bessel_k_imag(1.0, 0.0), InvalidArgument);
    EXPECT_THROW(bessel_k_imag(1.0, -1.0), InvalidArgument);
}

TEST(SinhBesselKImag, MatchesQuadratureProduct) {
    for (double s : {0.3, 1.0, 2.5}) {
        for (double g : {0.1, 0.25, 1.0, 3.0}) {
            const double ref = std::sinh(M_PI * s) * bessel_k_imag(s, g);
            EXPECT_NEAR(sinh_bessel_k_imag(s, g), ref, 1e-9 * std::max(1.0, std::abs(ref))) << s << " " << g;
        }
    }
}

TEST(AC, VanishesForLargeTau) {
    EXPECT_LT(a_c(0.25, 400.0), 1e-15);
}

TEST(AC, RejectsSmallTau) {
    EXPECT_THROW(a_c(0.25, 0.005), TauTooSmall);
}

TEST(AC, StaysInRange) {
    for (double g : {0.05, 0.25, 1.0, 2.0}) {
        for (double tau : {0.05, 0.5, 2.0, 10.0, 60.0}) {
            const double v = a_c(g, tau);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0 - std::exp(-2.0 * g));
        }
    }
}

TEST(AC, SmallTauIsTheFullMass) {
    for (double g : {0.05, 0.25, 2.0}) {
        const double total = 1.0 - std::exp(-2.0 * g);
        EXPECT_NEAR(a_c(g, 0.02, {}) / total, 1.0, 1e-9) << "gamma=" << g;
    }
}

TEST(AC, RefusesWhenPrecisionIsLost) {
    // Absorption is certain to be non-negligible here, and the integrand
    // grows like exp(pi^2 / (8 tau)) before its Gaussian factor takes over.
    EXPECT_THROW(a_c(100.0, 0.02), NoConvergence);
}

TEST(AC, ClosedFormMatchesAbsorptionOracle) {
    const double d = 1.0 - std::exp(-0.5) - a_c(0.25, 0.64);
    const auto mc = absorption_mc_oracle(0.25, 0.64, {1000000, absorption_default_steps(0.64, AbsorptionScheme::IntegratingFactor), 2});
    EXPECT_NEAR(d, mc.value, 3.0 * mc.std_error);
}

TEST(AC, ExpansionTracksQuadratureAtLargeTau) {
    double last = INFINITY;
    for (double tau : {50.0, 100.0, 200.0}) {
        const double q = correction_from_quadrature(0.25, tau);
        const double rel = std::abs(correction_from_expansion(0.25, tau) - q) / q;
        if (tau == 50.0) EXPECT_LE(rel, 0.2);
        EXPECT_LT(rel, last) << "tau=" << tau;
        last = rel;
    }
}

TEST(DefectFiniteT, ZeroWithoutPositiveCorrelation) {
    for (double T : {0.1, 1.0, 10.0, 100.0}) {
        EXPECT_EQ(defect_finite_T({0.4, 0.8, 0.0}, T), 0.0);
        EXPECT_EQ(defect_finite_T({0.4, 0.8, -0.5}, T), 0.0);
    }
}

TEST(DefectFiniteT, ZeroBelowTauMin) {
    EXPECT_EQ(defect_finite_T({0.4, 0.8, 0.5}, 0.01), 0.0);
}

TEST(DefectFiniteT, LargeTauReachesIndicator) {
    for (double g : {0.05, 0.25, 1.0, 2.0}) {
        const SabrParams p{g * 0.8 / 0.5, 0.8, 0.5};
        EXPECT_NEAR(defect_finite_T(p, 200.0 / 0.64), indicator(p), 1e-3) << "gamma=" << g;
    }
}

TEST(DefectFiniteT, MatchesAbsorptionOracleOnGrid) {
    for (double g : {0.1, 0.5, 1.0}) {
        for (double tau : {0.5, 2.0, 8.0}) {
            const double d = defect_finite_T({g, 1.0, 1.0}, tau);
            const int steps = absorption_default_steps(tau, AbsorptionScheme::IntegratingFactor);
            const auto mc = absorption_mc_oracle(g, tau, {1000000, steps, 1000 + static_cast<std::uint64_t>(10 * tau + 100 * g)});
            EXPECT_NEAR(d, mc.value, 3.0 * mc.std_error) << "gamma=" << g << " tau=" << tau;
        }
    }
}

TEST(DefectFiniteT, NonDecreasingAndBounded) {
    const SabrParams p{0.4, 0.8, 0.5};
    double last = 0.0;
    for (double T = 0.05; T < 200.0; T *= 1.5) {
        const double d = defect_finite_T(p, T);
        EXPECT_GE(d, last - 1e-9) << "T=" << T;
        EXPECT_GE(d, 0.0);
        EXPECT_LT(d, 1.0);
        EXPECT_LE(d, std::max(indicator(p), 0.0) + 1e-9);
        last = d;
    }
}

TEST(DefectFiniteT, ContinuousAtZeroCorrelation) {
    for (double T : {1.0, 10.0, 50.0}) {
        EXPECT_LT(std::abs(defect_finite_T({0.4, 0.8, 1e-6}, T) - defect_finite_T({0.4, 0.8, -1e-6}, T)), 1e-4);
    }
}

TEST(DefectCurve, MonotoneAndSorted) {
    const std::vector<double> ts{5.0, 0.5, 2.0, 1.0, 20.0};
    const auto c = defect_curve({0.4, 0.8, 0.5}, ts);
    ASSERT_EQ(c.maturities.size(), ts.size());
    EXPECT_TRUE(std::is_sorted(c.maturities.begin(), c.maturities.end()));
    EXPECT_TRUE(std::is_sorted(c.defects.begin(), c.defects.end()));
    for (double d : c.defects) {
        EXPECT_GE(d, 0.0);
        EXPECT_LT(d, 1.0);
    }
}

TEST(Indicator, Values) {
    EXPECT_EQ(indicator({0.4, 0.8, 0.0}), 0.0);
    EXPECT_NEAR(indicator({0.4, 0.8, 0.5}), 0.3934693, 5e-8);
    EXPECT_NEAR(indicator({0.4, 0.8, 0.5}), 1.0 - std::exp(-0.5), 1e-15);
    EXPECT_NEAR(indicator({1e3, 1e-3, 1.0}), 1.0, 1e-15);
    EXPECT_LT(indicator({0.4, 0.8, -0.5}), 0.0);
    EXPECT_THROW(indicator({0.4, 0.0, 0.5}), NuDegenerate);
}

TEST(Asymptotic, ConvergesToIndicator) {
    const SabrParams p{0.4, 0.8, 0.5};
    EXPECT_NEAR(defect_asymptotic_large_T(p, 1e4), indicator(p), 1e-12);
}

TEST(Asymptotic, CorrectionIsPositive) {
    const SabrParams p{1.0, 1.0, 1.0};  // gamma = 1
    EXPECT_LT(defect_asymptotic_large_T(p, 100.0), indicator(p));
}

TEST(Asymptotic, SelfConsistencyImprovesWithTau) {
    const double nu = 0.8;
    const SabrParams p{0.25 * nu / 0.5, nu, 0.5};
    double last = INFINITY;
    for (double tau : {50.0, 100.0, 200.0}) {
        const double T = tau / (nu * nu);
        const double corr = indicator(p) - defect_finite_T(p, T);
        const double rel = std::abs(defect_asymptotic_large_T(p, T) - defect_finite_T(p, T)) / corr;
        EXPECT_LT(rel, last);
        last = rel;
    }
}

TEST(Asymptotic, RejectsOutsideDomain) {
    EXPECT_THROW(defect_asymptotic_large_T({0.4, 0.8, -0.5}, 100.0), InvalidArgument);
    EXPECT_THROW(defect_asymptotic_large_T({0.4, 0.8, 0.5}, 1.0), TauTooSmall);
}

TEST(AbsorptionOracle, NoHitsForTinyTau) {
    const auto mc = absorption_mc_oracle(0.25, 1e-4, {100000, 50, 1});
    EXPECT_EQ(mc.value, 0.0);
    EXPECT_GT(mc.std_error, 0.0);
}

TEST(AbsorptionOracle, LongHorizonReachesLimit) {
    // dt = 0.04 keeps this affordable; the hitting probability has saturated.
    const auto mc = absorption_mc_oracle(0.25, 200.0, {20000, 5000, 4});
    EXPECT_NEAR(mc.value, 1.0 - std::exp(-0.5), 3.0 * mc.std_error);
}

TEST(AbsorptionOracle, EulerBiasShrinksWithStepHalving) {
    const double exact = 1.0 - std::exp(-0.5) - a_c(0.25, 1.28);
    double last = INFINITY;
    for (int steps : {250, 500, 1000}) {
        const auto mc = absorption_mc_oracle(0.25, 1.28, {400000, steps, 99}, AbsorptionScheme::Euler);
        const double bias = std::abs(mc.value - exact);
        EXPECT_LT(bias, last) << steps;
        last = bias;
    }
}

TEST(AbsorptionOracle, SchemesAgree) {
    const auto euler = absorption_mc_oracle(0.5, 2.0, {100000, 5000, 5}, AbsorptionScheme::Euler);
    const auto integ = absorption_mc_oracle(0.5, 2.0, {100000, 500, 6});
    EXPECT_NEAR(euler.value, integ.value, 3.0 * std::hypot(euler.std_error, integ.std_error));
}

TEST(FundamentalValue, NoBubbleIsDiscountedSpot) {
    EXPECT_DOUBLE_EQ(fundamental_value({0.4, 0.8, -0.3}, 100.0, 0.03, 0.02, 2.0), 100.0 * std::exp(-0.04));
}

TEST(FundamentalValue, BubbleBelowSpot) {
    EXPECT_LT(fundamental_value({0.4, 0.8, 0.5}, 100.0, 0.0, 0.0, 3.0), 100.0);
}

TEST(FundamentalValue, MatchesAbsorptionOracle) {
    const auto mc = absorption_mc_oracle(0.25, 0.64, {1000000, 500, 12});
    EXPECT_NEAR(fundamental_value({0.4, 0.8, 0.5}, 100.0, 0.0, 0.0, 1.0), 100.0 * (1.0 - mc.value),
                3.0 * 100.0 * mc.std_error);
}

TEST(CollateralizedCall, NoBubbleNoCorrection) {
    EXPECT_DOUBLE_EQ(collateralized_call_price(7.5, 100.0, 0.02, 1.0, 100.0 * std::exp(-0.02)), 7.5);
}

TEST(CollateralizedCall, RestoresParity) {
    const SabrParams p{0.4, 0.8, 0.5};
    const double x = 100.0, r = 0.03, q = 0.01, T = 6.0, K = 90.0;
    const double m = fundamental_value(p, x, r, q, T);
    const double put = 11.0;
    const double call = put + m - std::exp(-r * T) * K;  // parity with m in place of the forward
    const double coll = collateralized_call_price(call, x, q, T, m);
    EXPECT_NEAR(coll - put, x * std::exp(-q * T) - std::exp(-r * T) * K, 1e-12 * x);
}

TEST(CollateralizedCall, ZeroStrikeRecoversDiscountedSpot) {
    const SabrParams p{0.4, 0.8, 0.5};
    const double x = 100.0, r = 0.02, q = 0.01, T = 1.0;
    const double fwd = x * std::exp((r - q) * T);
    const auto mc = sabr_mc_price(p, fwd, 0.0, T, OptionSide::Call, std::exp(-r * T), {200000, 500, 61});
    const double coll = collateralized_call_price(mc.value, x, q, T, fundamental_value(p, x, r, q, T));
    EXPECT_NEAR(coll, x * std::exp(-q * T), 3.0 * mc.std_error);
}

TEST(CollateralizedCall, RejectsExcessFundamental) {
    EXPECT_THROW(collateralized_call_price(1.0, 100.0, 0.0, 1.0, 101.0), InvalidArgument);
}

TEST(Cev, ShortHorizonAndStrictDeficit) {
    EXPECT_NEAR(cev_expected_value(1.3, 1e-8), 1.3, 1e-12);
    for (double x : {0.5, 1.0, 2.0}) {
        for (double T : {0.1, 1.0, 10.0}) EXPECT_LT(cev_expected_value(x, T), x);
    }
}

TEST(Cev, MatchesLogEulerMonteCarlo) {
    const auto mc = oracle::cev_log_euler_mean(1.0, 1.0, 1000, 100000, 8);
    EXPECT_NEAR(cev_expected_value(1.0, 1.0), mc.mean, 3.0 * mc.std_error);
}

TEST(Cev, ExponentDecidedByExactOracle) {
    // The two candidate forms x(1 - 2 Phi(-1/(x^b sqrt T))) coincide at x = 1;
    // away from it only b = 1 survives the exact reciprocal-Bessel sampler.
    auto candidate = [](double x, double T, double b) {
        return x * (1.0 - 2.0 * norm_cdf(-1.0 / (std::pow(x, b) * std::sqrt(T))));
    };
    for (double x : {0.5, 1.0, 2.0}) {
        const auto mc = oracle::bessel3_reciprocal_mean(x, 1.0, 1000000, 21);
        EXPECT_NEAR(cev_expected_value(x, 1.0), mc.mean, 3.0 * mc.std_error) << "x=" << x;
        EXPECT_DOUBLE_EQ(cev_expected_value(x, 1.0), candidate(x, 1.0, 1.0));
        if (x != 1.0) EXPECT_GT(std::abs(candidate(x, 1.0, 2.0) - mc.mean), 10.0 * mc.std_error) << "x=" << x;
    }
}

TEST(DefectQuadConfig, Validation) {
    DefectQuadConfig c;
    EXPECT_NO_THROW(c.validate());
    c.rel_tol = 1e-5;
    EXPECT_THROW(c.validate(), InvalidArgument);
}
