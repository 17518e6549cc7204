#include "defectscope/num_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "defectscope/errors.hpp"

namespace defectscope {

namespace {

constexpr double kVolLo = 1e-6;
constexpr double kVolHi = 5.0;
constexpr int kBisectionCap = 200;

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw InvalidArgument(std::string(name) + " must be finite");
    }
}

double intrinsic(double s, double k, OptionSide side) {
    return side == OptionSide::Call ? std::max(s - k, 0.0) : std::max(k - s, 0.0);
}

// Value at spot from three grid nodes by quadratic Lagrange interpolation.
double interpolate_at(const std::vector<double>& v, double ds, double spot) {
    const int n = static_cast<int>(v.size());
    int j = static_cast<int>(std::floor(spot / ds + 0.5));
    j = std::clamp(j, 1, n - 2);
    const double x0 = (j - 1) * ds, x1 = j * ds, x2 = (j + 1) * ds;
    const double l0 = (spot - x1) * (spot - x2) / ((x0 - x1) * (x0 - x2));
    const double l1 = (spot - x0) * (spot - x2) / ((x1 - x0) * (x1 - x2));
    const double l2 = (spot - x0) * (spot - x1) / ((x2 - x0) * (x2 - x1));
    return l0 * v[j - 1] + l1 * v[j] + l2 * v[j + 1];
}

}  // namespace

std::string_view to_string(OptionSide side) noexcept {
    return side == OptionSide::Call ? "C" : "P";
}

double norm_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

void FdGrid::validate() const {
    if (n_space < 3) throw InvalidArgument("FdGrid: n_space must be >= 3");
    if (n_time < 1) throw InvalidArgument("FdGrid: n_time must be >= 1");
    if (!(x_max_mult > 1.0)) throw InvalidArgument("FdGrid: x_max_mult must exceed 1");
    if (!(omega > 1.0 && omega < 2.0)) throw InvalidArgument("FdGrid: omega must lie in (1, 2)");
    if (!(psor_tol > 0.0)) throw InvalidArgument("FdGrid: psor_tol must be positive");
    if (psor_max_iter < 1) throw InvalidArgument("FdGrid: psor_max_iter must be positive");
}

double black_price(double forward, double strike, double maturity, double vol, double discount,
                   OptionSide side) {
    require_finite(forward, "forward");
    require_finite(strike, "strike");
    require_finite(maturity, "maturity");
    require_finite(vol, "vol");
    require_finite(discount, "discount");
    if (!(forward > 0.0) || strike < 0.0 || !(maturity > 0.0) || vol < 0.0 || !(discount > 0.0) ||
        discount > 1.0) {
        throw InvalidArgument("black_price: arguments outside the valid domain");
    }

    if (strike == 0.0) {
        return side == OptionSide::Call ? discount * forward : 0.0;
    }
    const double sd = vol * std::sqrt(maturity);
    if (sd == 0.0) {
        return discount * intrinsic(forward, strike, side);
    }
    const double d1 = (std::log(forward / strike) + 0.5 * sd * sd) / sd;
    const double d2 = d1 - sd;
    if (side == OptionSide::Call) {
        return discount * (forward * norm_cdf(d1) - strike * norm_cdf(d2));
    }
    return discount * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1));
}

double implied_vol(double price, double forward, double strike, double maturity, double discount,
                   OptionSide side) {
    require_finite(price, "price");
    const double lower = side == OptionSide::Call ? std::max(discount * (forward - strike), 0.0)
                                                  : std::max(discount * (strike - forward), 0.0);
    const double upper = side == OptionSide::Call ? discount * forward : discount * strike;
    if (!(price > lower) || !(price < upper)) {
        throw OutOfBounds("implied_vol: price " + std::to_string(price) +
                          " outside no-arbitrage bounds (" + std::to_string(lower) + ", " +
                          std::to_string(upper) + ")");
    }

    const double tol = 1e-10 * discount * forward;
    double lo = kVolLo;
    double hi = kVolHi;
    int iter = 0;
    while (black_price(forward, strike, maturity, hi, discount, side) < price) {
        if (++iter > kBisectionCap) throw NoConvergence("implied_vol: could not bracket price");
        lo = hi;
        hi *= 2.0;
    }
    if (black_price(forward, strike, maturity, lo, discount, side) > price + tol) {
        throw OutOfBounds("implied_vol: price below the value at the lowest bracket vol");
    }
    for (; iter < kBisectionCap; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double diff = black_price(forward, strike, maturity, mid, discount, side) - price;
        if (std::abs(diff) <= tol) return mid;
        (diff < 0.0 ? lo : hi) = mid;
    }
    throw NoConvergence("implied_vol: bisection cap reached");
}

double american_fd_price(double spot, double strike, double maturity, double vol, double rate,
                         double carry_yield, OptionSide side, const FdGrid& grid) {
    for (double v : {spot, strike, maturity, vol, rate, carry_yield}) require_finite(v, "argument");
    if (!(spot > 0.0) || !(vol > 0.0) || !(maturity > 0.0) || strike < 0.0) {
        throw InvalidArgument("american_fd_price: spot, vol and maturity must be positive");
    }
    grid.validate();

    const int n = grid.n_space;
    const double s_max = grid.x_max_mult * std::max(spot, strike);
    const double ds = s_max / (n - 1);
    const double dt = maturity / grid.n_time;

    std::vector<double> payoff(n);
    for (int j = 0; j < n; ++j) payoff[j] = intrinsic(j * ds, strike, side);

    // L V_j = a_j V_{j-1} + b_j V_j + c_j V_{j+1} with S_j = j * ds.
    std::vector<double> a(n), b(n), c(n);
    const double drift = rate - carry_yield;
    for (int j = 0; j < n; ++j) {
        const double diff = vol * vol * j * j;
        a[j] = 0.5 * diff - 0.5 * drift * j;
        b[j] = -diff - rate;
        c[j] = 0.5 * diff + 0.5 * drift * j;
    }

    auto boundary = [&](double tau, bool low) {
        const double s = low ? 0.0 : s_max;
        double european = 0.0;
        if (side == OptionSide::Put) {
            european = low ? strike * std::exp(-rate * tau) : 0.0;
        } else {
            european = low ? 0.0 : s * std::exp(-carry_yield * tau) - strike * std::exp(-rate * tau);
        }
        return std::max(european, intrinsic(s, strike, side));
    };

    std::vector<double> v = payoff;
    std::vector<double> rhs(n);
    double tau = 0.0;

    // Starting point for PSOR: eliminate towards the exercise side, then
    // substitute back away from it with projection. For a single exercise
    // boundary this is already the LCP solution and PSOR stops after one
    // sweep; at high vol the fixed omega alone converges very slowly.
    std::vector<double> bp(n), rp(n);
    auto brennan_schwartz_guess = [&](double h, double theta) {
        auto lo_coef = [&](int j) { return -theta * h * a[j]; };
        auto diag = [&](int j) { return 1.0 - theta * h * b[j]; };
        auto up_coef = [&](int j) { return -theta * h * c[j]; };
        if (side == OptionSide::Put) {
            bp[n - 2] = diag(n - 2);
            rp[n - 2] = rhs[n - 2] - up_coef(n - 2) * v[n - 1];
            for (int j = n - 3; j >= 1; --j) {
                const double m = up_coef(j) / bp[j + 1];
                bp[j] = diag(j) - m * lo_coef(j + 1);
                rp[j] = rhs[j] - m * rp[j + 1];
            }
            for (int j = 1; j < n - 1; ++j) {
                v[j] = std::max(payoff[j], (rp[j] - lo_coef(j) * v[j - 1]) / bp[j]);
            }
        } else {
            bp[1] = diag(1);
            rp[1] = rhs[1] - lo_coef(1) * v[0];
            for (int j = 2; j < n - 1; ++j) {
                const double m = lo_coef(j) / bp[j - 1];
                bp[j] = diag(j) - m * up_coef(j - 1);
                rp[j] = rhs[j] - m * rp[j - 1];
            }
            for (int j = n - 2; j >= 1; --j) {
                v[j] = std::max(payoff[j], (rp[j] - up_coef(j) * v[j + 1]) / bp[j]);
            }
        }
    };

    // Rannacher start: the first step is taken as two implicit half steps to
    // damp the payoff kink, the remainder with Crank-Nicolson.
    auto step = [&](double h, double theta) {
        const double tau_next = tau + h;
        for (int j = 1; j < n - 1; ++j) {
            rhs[j] = v[j] + (1.0 - theta) * h * (a[j] * v[j - 1] + b[j] * v[j] + c[j] * v[j + 1]);
        }
        v[0] = boundary(tau_next, true);
        v[n - 1] = boundary(tau_next, false);
        brennan_schwartz_guess(h, theta);
        // Lower boundary feeds row 1; the upper boundary feeds row n-2.
        int it = 0;
        for (; it < grid.psor_max_iter; ++it) {
            double err = 0.0;
            for (int j = 1; j < n - 1; ++j) {
                const double diag = 1.0 - theta * h * b[j];
                const double off = theta * h * (a[j] * v[j - 1] + c[j] * v[j + 1]);
                const double gs = (rhs[j] + off) / diag;
                const double updated =
                    std::max(payoff[j], v[j] + grid.omega * (gs - v[j]));
                err = std::max(err, std::abs(updated - v[j]));
                v[j] = updated;
            }
            if (err < grid.psor_tol) break;
        }
        if (it == grid.psor_max_iter) {
            throw NoConvergence("american_fd_price: PSOR did not converge within " +
                                std::to_string(grid.psor_max_iter) + " iterations");
        }
        tau = tau_next;
    };

    step(0.5 * dt, 1.0);
    step(0.5 * dt, 1.0);
    for (int k = 1; k < grid.n_time; ++k) step(dt, 0.5);

    return std::max(interpolate_at(v, ds, spot), intrinsic(spot, strike, side));
}

double american_implied_vol(double price, double spot, double strike, double maturity, double rate,
                            double carry_yield, OptionSide side, const FdGrid& grid) {
    require_finite(price, "price");
    auto value = [&](double vol) {
        return american_fd_price(spot, strike, maturity, vol, rate, carry_yield, side, grid);
    };
    const double tol = std::max(1e-6, 1e-4 * price);
    double lo = kVolLo;
    double hi = kVolHi;
    const double p_lo = value(lo);
    const double p_hi = value(hi);
    if (price < p_lo - tol || price > p_hi + tol) {
        throw OutOfBounds("american_implied_vol: price " + std::to_string(price) +
                          " outside attainable range [" + std::to_string(p_lo) + ", " +
                          std::to_string(p_hi) + "]");
    }
    if (std::abs(p_lo - price) <= tol) return lo;
    if (std::abs(p_hi - price) <= tol) return hi;
    for (int iter = 0; iter < kBisectionCap; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double diff = value(mid) - price;
        if (std::abs(diff) <= tol) return mid;
        (diff < 0.0 ? lo : hi) = mid;
    }
    throw NoConvergence("american_implied_vol: bisection cap reached");
}

}  // namespace defectscope
