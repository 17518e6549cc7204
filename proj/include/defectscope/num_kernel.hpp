#pragma once

/**
 * @file num_kernel.hpp
 * @brief Deterministic option-pricing primitives.
 *
 * Black (forward) European pricing and its bisection inverse, and an
 * American-exercise pricer built from a Crank-Nicolson discretisation in
 * spot with projected SOR for the early-exercise constraint.
 */

#include <string_view>

namespace defectscope {

enum class OptionSide { Call, Put };

std::string_view to_string(OptionSide side) noexcept;

/// Finite-difference grid and PSOR controls for the American pricer.
struct FdGrid {
    int n_space = 400;          ///< spatial nodes, including both boundaries
    int n_time = 200;           ///< time steps
    double x_max_mult = 4.0;    ///< upper truncation = x_max_mult * max(spot, strike)
    double omega = 1.2;         ///< SOR relaxation factor, in (1, 2)
    double psor_tol = 1e-8;     ///< max-norm update tolerance, price units
    int psor_max_iter = 10000;

    /// Throws InvalidArgument when an invariant is violated.
    void validate() const;
};

/// Discounted lognormal expectation of the payoff on a forward.
double black_price(double forward, double strike, double maturity, double vol, double discount,
                   OptionSide side);

/// Bisection inverse of black_price.
///
/// Bracket [1e-6, 5] (upper end doubled while the bracket does not contain
/// the price); stops once |black_price(v) - price| <= 1e-10 * discount * forward.
/// Throws OutOfBounds outside the static no-arbitrage bounds and
/// NoConvergence after 200 iterations.
double implied_vol(double price, double forward, double strike, double maturity, double discount,
                   OptionSide side);

/// American option on a spot with continuous carry yield.
double american_fd_price(double spot, double strike, double maturity, double vol, double rate,
                         double carry_yield, OptionSide side, const FdGrid& grid = {});

/// Bisection on american_fd_price over vol in [1e-6, 5] to a price error of
/// max(1e-6, 1e-4 * price).
double american_implied_vol(double price, double spot, double strike, double maturity, double rate,
                            double carry_yield, OptionSide side, const FdGrid& grid = {});

/// Standard normal distribution function.
double norm_cdf(double x) noexcept;

}  // namespace defectscope
