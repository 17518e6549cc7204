#pragma once

/**
 * @file sabr_model.hpp
 * @brief Lognormal (beta = 1) SABR model.
 *
 *   dF_t     = alpha_t F_t dW1_t
 *   dalpha_t = nu alpha_t dW2_t,   d<W1, W2>_t = rho dt
 *
 * The Hagan expansion is the forward map from parameters to implied vols;
 * the Monte Carlo simulator is the independent oracle used to check it.
 */

#include <cstdint>
#include <span>
#include <vector>

#include "defectscope/num_kernel.hpp"

namespace defectscope {

struct SabrParams {
    double alpha = 0.2;  ///< initial volatility
    double nu = 0.3;     ///< volatility of volatility
    double rho = 0.0;    ///< spot/vol correlation

    bool is_valid() const noexcept;
    /// Throws InvalidArgument unless alpha > 0, nu >= 0 and |rho| <= 1.
    void validate() const;
    /// rho * alpha / nu; requires nu > 0.
    double gamma() const;

    friend bool operator==(const SabrParams&, const SabrParams&) = default;
};

struct McConfig {
    std::int64_t n_paths = 100'000;
    int n_steps = 500;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Monte Carlo estimate with its standard error.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Default number of SABR simulation steps for a horizon: 500 per year.
int sabr_default_steps(double maturity);

/// Hagan lognormal implied vol. Throws ExpansionBreakdown on non-finite output.
double hagan_implied_vol(const SabrParams& params, double forward, double strike, double maturity);

/// Terminal forwards F_T / F_0 from a log-Euler scheme on F with exact
/// lognormal updates for alpha. Every entry is strictly positive.
std::vector<double> sabr_simulate_forward(const SabrParams& params, double maturity,
                                          const McConfig& mc);

/// Discounted payoff mean over a set of terminal forwards (scaled by `forward`).
McEstimate price_from_terminals(std::span<const double> terminal_ratios, double forward,
                                double strike, OptionSide side, double discount);

McEstimate sabr_mc_price(const SabrParams& params, double forward, double strike, double maturity,
                         OptionSide side, double discount, const McConfig& mc);

/// Prices for several strikes from one set of paths (common random numbers).
std::vector<McEstimate> sabr_mc_prices(const SabrParams& params, double forward,
                                       std::span<const double> strikes, double maturity,
                                       OptionSide side, double discount, const McConfig& mc);

}  // namespace defectscope
