#pragma once

/**
 * @file defect_indicator.hpp
 * @brief Martingale defect of the lognormal SABR forward.
 *
 * For theta = (alpha, nu, rho) with rho > 0 the forward is a strict local
 * martingale. With gamma = rho * alpha / nu and tau = nu^2 T the normalized
 * defect is
 *
 *   d(T) = 1 - exp(-2 gamma) - A_c(gamma, tau),
 *   A_c(gamma, tau) = sqrt(2 gamma / pi^3) exp(-(gamma + tau / 8))
 *                     * int_0^inf 8 s sinh(pi s) / (4 s^2 + 1) K_{is}(gamma) exp(-s^2 tau / 2) ds,
 *
 * and d(T) -> A(theta) = 1 - exp(-2 gamma) as T -> infinity. d(T) is also the
 * probability that dX = (X - 1) dt - X dW, X_0 = 1 / gamma, reaches zero
 * before tau, which gives an independent Monte Carlo check.
 */

#include <span>
#include <vector>

#include "defectscope/sabr_model.hpp"

namespace defectscope {

struct DefectQuadConfig {
    double s_max_floor = 10.0;
    double tail_log_cut = 40.0;           ///< L: Gaussian tail cut exp(-L) at s_max
    double rel_tol = 1e-9;                ///< successive-halving tolerance, <= 1e-6
    double bessel_t_step_factor = 0.05;   ///< max node spacing for the K_{is} quadrature
    double tau_min = 0.01;                ///< below this the defect is reported as 0

    void validate() const;
};

/// Defect as a function of maturity for one parameter set.
struct DefectCurve {
    std::vector<double> maturities;
    std::vector<double> defects;
};

/// K_{is}(gamma) = int_0^inf exp(-gamma cosh t) cos(s t) dt by composite
/// trapezoid quadrature on [0, acosh(745 / gamma)].
double bessel_k_imag(double s, double gamma, const DefectQuadConfig& cfg = {});

/// sinh(pi s) K_{is}(gamma), evaluated as -pi Im I_{is}(gamma) from the power
/// series of I_{is}. Unlike the quadrature above, it stays accurate when the
/// sinh factor is large.
double sinh_bessel_k_imag(double s, double gamma);

/// Integral term of the closed form. Throws TauTooSmall for tau < cfg.tau_min.
double a_c(double gamma, double tau, const DefectQuadConfig& cfg = {});

/// Normalized defect d(T; theta) in [0, 1).
double defect_finite_T(const SabrParams& params, double maturity, const DefectQuadConfig& cfg = {});

DefectCurve defect_curve(const SabrParams& params, std::span<const double> maturities,
                         const DefectQuadConfig& cfg = {});

/// A(theta) = 1 - exp(-2 rho alpha / nu). Negative when rho < 0.
/// Throws NuDegenerate for nu == 0.
double indicator(const SabrParams& params);

/// Leading-order large-maturity expansion
///   1 - exp(-2 gamma) - 8 sqrt(gamma) / tau^{3/2} exp(-(gamma + tau / 8)) K_0(gamma).
/// Requires rho > 0 and nu^2 T >= 10.
double defect_asymptotic_large_T(const SabrParams& params, double maturity);

enum class AbsorptionScheme {
    /// Plain Euler on X, absorbed at the first non-positive value.
    Euler,
    /// X is linear, X_t = Phi_t (1/gamma - int_0^t Phi_u^{-1} du) with
    /// Phi_t = exp(t/2 - W_t); absorption by tau is the event
    /// int_0^tau exp(W_u - u/2) du >= 1/gamma. The exponent is sampled
    /// exactly at the nodes and the integral by the trapezoid rule.
    IntegratingFactor,
};

/// Default step count for the absorption oracle.
int absorption_default_steps(double tau, AbsorptionScheme scheme);

/// Monte Carlo estimate of P(X hits 0 before tau | X_0 = 1 / gamma).
///
/// The standard error is the binomial one evaluated at the Jeffreys-adjusted
/// proportion (hits + 1/2) / (n + 1), so a run with no hits still reports the
/// resolution of the sample.
McEstimate absorption_mc_oracle(double gamma, double tau, const McConfig& mc,
                                AbsorptionScheme scheme = AbsorptionScheme::IntegratingFactor);

/// m_x(T) = x exp(-q T) (1 - d(T)).
double fundamental_value(const SabrParams& params, double spot, double rate, double carry_yield,
                         double maturity, const DefectQuadConfig& cfg = {});

/// Call price plus the defect premium x exp(-q T) - m_x(T).
double collateralized_call_price(double uncollateralized, double spot, double carry_yield,
                                 double maturity, double fundamental);

/// E_x X_T for dX = X^2 dW (reciprocal of a 3-d Bessel process):
/// x (1 - 2 Phi(-1 / (x sqrt(T)))).
double cev_expected_value(double spot, double maturity);

}  // namespace defectscope
