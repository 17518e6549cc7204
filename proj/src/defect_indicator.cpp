#include "defectscope/defect_indicator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "defectscope/errors.hpp"
#include "defectscope/num_kernel.hpp"
#include "defectscope/random.hpp"

namespace defectscope {

namespace {

using std::numbers::pi;
using cplx = std::complex<double>;

// Below this value the defect is indistinguishable from zero for every caller.
constexpr double kNegligibleDefect = 1e-9;
// Largest tolerated rounding-error estimate for the closed form.
constexpr double kMaxRoundingError = 1e-7;

// log Gamma(z) for Re z > 0: shift to Re z >= 15, then Stirling.
cplx log_gamma(cplx z) {
    cplx shift = 0.0;
    while (z.real() < 15.0) {
        shift += std::log(z);
        z += 1.0;
    }
    const cplx inv = 1.0 / z;
    const cplx inv2 = inv * inv;
    const cplx series =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    return (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * pi) + series - shift;
}

// I_{is}(gamma) from its power series; also returns the magnitude scale of the
// summands so callers can bound cancellation.
struct BesselISeries {
    cplx value;
    double scale;
};

BesselISeries bessel_i_imag_order(double s, double gamma) {
    const cplx is(0.0, s);
    const cplx lead = std::exp(is * std::log(0.5 * gamma) - log_gamma(1.0 + is));
    const double q = 0.25 * gamma * gamma;
    cplx term = 1.0;
    cplx total = 1.0;
    double largest = 1.0;
    for (int k = 1; k < 100000; ++k) {
        term *= q / (static_cast<double>(k) * (static_cast<double>(k) + is));
        total += term;
        largest = std::max(largest, std::abs(term));
        if (k > 0.5 * gamma && std::abs(term) < 1e-18 * std::abs(total)) break;
    }
    return {lead * total, std::abs(lead) * largest};
}

// Rigorous bound: absorption by tau needs max_{u<=tau} W_u >= log(1/(gamma tau)).
double absorption_upper_bound(double gamma, double tau) {
    const double level = -std::log(gamma * tau);
    if (level <= 0.0) return 1.0;
    return std::min(1.0, 2.0 * norm_cdf(-level / std::sqrt(tau)));
}

}  // namespace

void DefectQuadConfig::validate() const {
    if (!(s_max_floor > 0.0) || !(tail_log_cut > 0.0) || !(rel_tol > 0.0) ||
        !(bessel_t_step_factor > 0.0) || !(tau_min > 0.0)) {
        throw InvalidArgument("DefectQuadConfig: all fields must be positive");
    }
    if (rel_tol > 1e-6) throw InvalidArgument("DefectQuadConfig: rel_tol must be <= 1e-6");
}

double bessel_k_imag(double s, double gamma, const DefectQuadConfig& cfg) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InvalidArgument("bessel_k_imag: gamma must be positive");
    }
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidArgument("bessel_k_imag: order must be >= 0");
    if (gamma >= 745.0) return 0.0;

    const double t_max = std::acosh(745.0 / gamma);
    const double h_cap = std::min(cfg.bessel_t_step_factor, pi / (10.0 * std::max(s, 1.0)));
    const auto n = static_cast<long>(std::ceil(t_max / h_cap));
    const double h = t_max / static_cast<double>(n);
    auto f = [&](double t) { return std::exp(-gamma * std::cosh(t)) * std::cos(s * t); };

    double sum = 0.5 * (f(0.0) + f(t_max));
    for (long k = 1; k < n; ++k) sum += f(static_cast<double>(k) * h);
    return h * sum;
}

double sinh_bessel_k_imag(double s, double gamma) {
    if (!(gamma > 0.0)) throw InvalidArgument("sinh_bessel_k_imag: gamma must be positive");
    if (s == 0.0) return 0.0;
    return -pi * bessel_i_imag_order(s, gamma).value.imag();
}

double a_c(double gamma, double tau, const DefectQuadConfig& cfg) {
    cfg.validate();
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("a_c: gamma must be positive");
    if (!std::isfinite(tau) || tau < cfg.tau_min) {
        throw TauTooSmall("a_c: tau=" + std::to_string(tau) + " below tau_min=" +
                          std::to_string(cfg.tau_min));
    }
    // a_c = 1 - e^{-2 gamma} - P(absorption by tau). When the absorption
    // bound is within tolerance the integral is not needed; at small tau it
    // could not be evaluated anyway, as the integrand peaks near exp(pi^2 / (8 tau)).
    const double total = -std::expm1(-2.0 * gamma);
    if (absorption_upper_bound(gamma, tau) <= cfg.rel_tol * total) return total;

    const double s_max =
        std::max(cfg.s_max_floor, pi / tau + std::sqrt(2.0 * cfg.tail_log_cut / tau));
    const double prefactor = std::sqrt(2.0 * gamma / (pi * pi * pi)) * std::exp(-(gamma + tau / 8.0));

    double rounding_scale = 0.0;
    auto integrand = [&](double s) {
        if (s == 0.0) return 0.0;
        const auto series = bessel_i_imag_order(s, gamma);
        const double weight = 8.0 * s / (4.0 * s * s + 1.0) * std::exp(-0.5 * s * s * tau);
        rounding_scale = std::max(rounding_scale, weight * pi * series.scale);
        return weight * (-pi * series.value.imag());
    };

    // Simpson from successive trapezoid refinements; odd nodes are new at each level.
    long n = 256;
    double h = s_max / static_cast<double>(n);
    double edge = 0.5 * (integrand(0.0) + integrand(s_max));
    double interior = 0.0;
    for (long k = 1; k < n; ++k) interior += integrand(static_cast<double>(k) * h);
    double trap = h * (edge + interior);
    double simpson = trap;
    bool converged = false;
    for (int level = 0; level < 12; ++level) {
        const long n2 = 2 * n;
        const double h2 = s_max / static_cast<double>(n2);
        double fresh = 0.0;
        for (long k = 1; k < n2; k += 2) fresh += integrand(static_cast<double>(k) * h2);
        interior += fresh;
        const double trap2 = h2 * (edge + interior);
        const double simpson2 = (4.0 * trap2 - trap) / 3.0;
        const bool settled = level > 0 && std::abs(simpson2 - simpson) <=
                                              cfg.rel_tol * std::max(std::abs(simpson2), 1e-300);
        trap = trap2;
        simpson = simpson2;
        n = n2;
        if (settled) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NoConvergence("a_c: quadrature refinement did not settle");

    const double rounding = 1e-15 * prefactor * s_max * rounding_scale;
    if (rounding > kMaxRoundingError) {
        throw NoConvergence("a_c: closed form loses precision at gamma=" + std::to_string(gamma) +
                            ", tau=" + std::to_string(tau));
    }
    return std::clamp(prefactor * simpson, 0.0, -std::expm1(-2.0 * gamma));
}

double defect_finite_T(const SabrParams& params, double maturity, const DefectQuadConfig& cfg) {
    params.validate();
    cfg.validate();
    if (!(maturity > 0.0) || !std::isfinite(maturity)) {
        throw InvalidArgument("defect_finite_T: maturity must be positive");
    }
    if (params.rho <= 0.0 || params.nu == 0.0) return 0.0;

    const double gamma = params.gamma();
    const double tau = params.nu * params.nu * maturity;
    if (tau < cfg.tau_min || absorption_upper_bound(gamma, tau) < kNegligibleDefect) return 0.0;

    const double d = -std::expm1(-2.0 * gamma) - a_c(gamma, tau, cfg);
    return std::clamp(d, 0.0, std::nextafter(1.0, 0.0));
}

DefectCurve defect_curve(const SabrParams& params, std::span<const double> maturities,
                         const DefectQuadConfig& cfg) {
    DefectCurve curve;
    curve.maturities.assign(maturities.begin(), maturities.end());
    std::sort(curve.maturities.begin(), curve.maturities.end());
    curve.defects.reserve(curve.maturities.size());
    double running = 0.0;
    for (double t : curve.maturities) {
        // Quadrature noise must not break the monotone shape.
        running = std::max(running, defect_finite_T(params, t, cfg));
        curve.defects.push_back(running);
    }
    return curve;
}

double indicator(const SabrParams& params) {
    if (!std::isfinite(params.alpha) || !std::isfinite(params.nu) || !std::isfinite(params.rho)) {
        throw InvalidArgument("indicator: parameters must be finite");
    }
    if (params.nu == 0.0) throw NuDegenerate("indicator: nu must be non-zero");
    return -std::expm1(-2.0 * params.rho * params.alpha / params.nu);
}

double defect_asymptotic_large_T(const SabrParams& params, double maturity) {
    params.validate();
    if (!(params.rho > 0.0)) throw InvalidArgument("defect_asymptotic_large_T: requires rho > 0");
    if (!(params.nu > 0.0)) throw NuDegenerate("defect_asymptotic_large_T: nu must be positive");
    const double tau = params.nu * params.nu * maturity;
    if (!(tau >= 10.0)) {
        throw TauTooSmall("defect_asymptotic_large_T: needs nu^2 T >= 10, got " + std::to_string(tau));
    }
    const double gamma = params.gamma();
    const double correction = 8.0 * std::sqrt(gamma) / std::pow(tau, 1.5) *
                              std::exp(-(gamma + tau / 8.0)) * bessel_k_imag(0.0, gamma);
    return -std::expm1(-2.0 * gamma) - correction;
}

int absorption_default_steps(double tau, AbsorptionScheme scheme) {
    if (scheme == AbsorptionScheme::Euler) return 5000;
    return std::max(500, static_cast<int>(std::ceil(tau / 0.004)));
}

McEstimate absorption_mc_oracle(double gamma, double tau, const McConfig& mc,
                                AbsorptionScheme scheme) {
    mc.validate();
    if (!(gamma > 0.0) || !(tau > 0.0) || !std::isfinite(gamma) || !std::isfinite(tau)) {
        throw InvalidArgument("absorption_mc_oracle: gamma and tau must be positive");
    }
    const double dt = tau / mc.n_steps;
    const double sqdt = std::sqrt(dt);
    const double start = 1.0 / gamma;

    Engine engine = make_engine(mc.seed);
    Normal normal;
    std::int64_t hits = 0;
    for (std::int64_t p = 0; p < mc.n_paths; ++p) {
        if (scheme == AbsorptionScheme::Euler) {
            double x = start;
            for (int k = 0; k < mc.n_steps; ++k) {
                x += (x - 1.0) * dt - x * sqdt * normal(engine);
                if (x <= 0.0) {
                    ++hits;
                    break;
                }
            }
        } else {
            double w = 0.0;
            double left = 1.0;
            double integral = 0.0;
            for (int k = 0; k < mc.n_steps; ++k) {
                w += sqdt * normal(engine) - 0.5 * dt;
                const double right = std::exp(w);
                integral += 0.5 * (left + right) * dt;
                left = right;
                if (integral >= start) {
                    ++hits;
                    break;
                }
            }
        }
    }
    const double n = static_cast<double>(mc.n_paths);
    const double p = static_cast<double>(hits) / n;
    const double adjusted = (static_cast<double>(hits) + 0.5) / (n + 1.0);
    return {p, std::sqrt(adjusted * (1.0 - adjusted) / n)};
}

double fundamental_value(const SabrParams& params, double spot, double rate, double carry_yield,
                         double maturity, const DefectQuadConfig& cfg) {
    if (!(spot > 0.0) || !std::isfinite(rate) || !std::isfinite(carry_yield)) {
        throw InvalidArgument("fundamental_value: spot must be positive, rates finite");
    }
    return spot * std::exp(-carry_yield * maturity) * (1.0 - defect_finite_T(params, maturity, cfg));
}

double collateralized_call_price(double uncollateralized, double spot, double carry_yield,
                                 double maturity, double fundamental) {
    const double cap = spot * std::exp(-carry_yield * maturity);
    if (fundamental > cap * (1.0 + 1e-14)) {
        throw InvalidArgument("collateralized_call_price: fundamental value exceeds x exp(-qT)");
    }
    return uncollateralized + (cap - fundamental);
}

double cev_expected_value(double spot, double maturity) {
    if (!(spot > 0.0) || !(maturity > 0.0)) {
        throw InvalidArgument("cev_expected_value: spot and maturity must be positive");
    }
    return spot * (1.0 - 2.0 * norm_cdf(-1.0 / (spot * std::sqrt(maturity))));
}

}  // namespace defectscope
