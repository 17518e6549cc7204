#include "defectscope/sabr_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "defectscope/errors.hpp"
#include "defectscope/random.hpp"

namespace defectscope {

bool SabrParams::is_valid() const noexcept {
    return std::isfinite(alpha) && std::isfinite(nu) && std::isfinite(rho) && alpha > 0.0 &&
           nu >= 0.0 && rho >= -1.0 && rho <= 1.0;
}

void SabrParams::validate() const {
    if (!is_valid()) {
        throw InvalidArgument("SabrParams: need alpha > 0, nu >= 0, |rho| <= 1 (got alpha=" +
                              std::to_string(alpha) + ", nu=" + std::to_string(nu) +
                              ", rho=" + std::to_string(rho) + ")");
    }
}

double SabrParams::gamma() const {
    if (!(nu > 0.0)) throw InvalidArgument("SabrParams::gamma: nu must be positive");
    return rho * alpha / nu;
}

void McConfig::validate() const {
    if (n_paths < 1) throw InvalidArgument("McConfig: n_paths must be >= 1");
    if (n_steps < 1) throw InvalidArgument("McConfig: n_steps must be >= 1");
}

int sabr_default_steps(double maturity) {
    return std::max(1, static_cast<int>(std::ceil(500.0 * maturity)));
}

double hagan_implied_vol(const SabrParams& params, double forward, double strike, double maturity) {
    params.validate();
    if (!(forward > 0.0) || !(strike > 0.0) || !(maturity > 0.0) || !std::isfinite(forward) ||
        !std::isfinite(strike) || !std::isfinite(maturity)) {
        throw InvalidArgument("hagan_implied_vol: forward, strike and maturity must be positive");
    }
    const double alpha = params.alpha;
    const double nu = params.nu;
    const double rho = params.rho;

    const double z = nu / alpha * std::log(forward / strike);
    double ratio = 1.0;  // z / chi(z)
    if (std::abs(z) < 1e-6) {
        ratio = 1.0 - 0.5 * rho * z + (2.0 - 3.0 * rho * rho) * z * z / 12.0;
    } else {
        double chi = 0.0;
        if (1.0 - rho < 1e-12) {
            // rho = 1: sqrt((1 - z)^2) + z - 1 vanishes for z < 1; use the limit.
            chi = z < 1.0 ? -std::log1p(-z) : std::numeric_limits<double>::infinity();
        } else {
            // log((root + z - rho) / (1 - rho)) with root - 1 formed without cancellation.
            const double root = std::sqrt(1.0 - 2.0 * rho * z + z * z);
            const double root_minus_one = (z * z - 2.0 * rho * z) / (root + 1.0);
            chi = std::log1p((root_minus_one + z) / (1.0 - rho));
        }
        ratio = z / chi;
    }
    const double correction =
        1.0 + (0.25 * rho * nu * alpha + (2.0 - 3.0 * rho * rho) * nu * nu / 24.0) * maturity;
    const double vol = alpha * ratio * correction;
    if (!std::isfinite(vol) || !(vol > 0.0)) {
        throw ExpansionBreakdown("hagan_implied_vol: expansion breaks down at strike " +
                                 std::to_string(strike));
    }
    return vol;
}

std::vector<double> sabr_simulate_forward(const SabrParams& params, double maturity,
                                          const McConfig& mc) {
    params.validate();
    mc.validate();
    if (!(maturity > 0.0)) throw InvalidArgument("sabr_simulate_forward: maturity must be positive");

    const double dt = maturity / mc.n_steps;
    const double sqdt = std::sqrt(dt);
    const double rho_perp = std::sqrt(std::max(0.0, 1.0 - params.rho * params.rho));
    const double vol_drift = -0.5 * params.nu * params.nu * dt;
    const double vol_diff = params.nu * sqdt;

    Engine engine = make_engine(mc.seed);
    Normal normal;
    std::vector<double> out(static_cast<std::size_t>(mc.n_paths));
    for (auto& terminal : out) {
        double log_f = 0.0;
        double alpha = params.alpha;
        for (int k = 0; k < mc.n_steps; ++k) {
            const double z1 = normal(engine);
            const double z2 = params.rho * z1 + rho_perp * normal(engine);
            log_f += -0.5 * alpha * alpha * dt + alpha * sqdt * z1;
            alpha *= std::exp(vol_drift + vol_diff * z2);
        }
        // exp underflows only for absurd parameters; keep the positivity contract.
        terminal = std::max(std::exp(log_f), std::numeric_limits<double>::min());
    }
    return out;
}

McEstimate price_from_terminals(std::span<const double> terminal_ratios, double forward,
                                double strike, OptionSide side, double discount) {
    if (terminal_ratios.empty()) throw InvalidArgument("price_from_terminals: empty sample");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double r : terminal_ratios) {
        const double f = forward * r;
        const double payoff = side == OptionSide::Call ? std::max(f - strike, 0.0)
                                                       : std::max(strike - f, 0.0);
        sum += payoff;
        sum_sq += payoff * payoff;
    }
    const double n = static_cast<double>(terminal_ratios.size());
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
    return {discount * mean, discount * std::sqrt(var / n)};
}

McEstimate sabr_mc_price(const SabrParams& params, double forward, double strike, double maturity,
                         OptionSide side, double discount, const McConfig& mc) {
    const auto terminals = sabr_simulate_forward(params, maturity, mc);
    return price_from_terminals(terminals, forward, strike, side, discount);
}

std::vector<McEstimate> sabr_mc_prices(const SabrParams& params, double forward,
                                       std::span<const double> strikes, double maturity,
                                       OptionSide side, double discount, const McConfig& mc) {
    const auto terminals = sabr_simulate_forward(params, maturity, mc);
    std::vector<McEstimate> out;
    out.reserve(strikes.size());
    for (double k : strikes) out.push_back(price_from_terminals(terminals, forward, k, side, discount));
    return out;
}

}  // namespace defectscope
