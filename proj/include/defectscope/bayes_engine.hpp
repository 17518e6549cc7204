#pragma once

/**
 * @file bayes_engine.hpp
 * @brief Posterior over lognormal SABR parameters given implied-vol
 * observations, MAP initialization and an adaptive Metropolis-within-Gibbs
 * sampler, plus posterior summaries.
 *
 * The likelihood is Gaussian in the vol residuals, restricted to the set
 * where every residual lies within half the quoted vol spread. The prior is
 * flat on alpha > 0, nu >= 0, |rho| <= 1.
 */

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defectscope/market_data.hpp"
#include "defectscope/sabr_model.hpp"

namespace defectscope {

struct PosteriorSpec {
    std::vector<VolObservation> observations;
    double forward = 0.0;
    double maturity = 0.0;
    double obs_sigma = 1.0;  ///< observation noise sd, in vol units

    void validate() const;
};

/// Log posterior up to a constant; -inf outside the support. Never throws.
double log_posterior(const SabrParams& params, const PosteriorSpec& spec);

/// max_i (|y_i - f_i| - spread_i / 2). Non-positive exactly when every
/// spread constraint holds; +inf when the model cannot be evaluated.
double max_constraint_violation(const SabrParams& params, const PosteriorSpec& spec);

/// Smallest positive alpha with hagan_implied_vol(alpha, nu, rho; K = F) == atm_vol.
/// At beta = 1 the ATM identity is the quadratic
///   (rho nu T / 4) alpha^2 + (1 + (2 - 3 rho^2) nu^2 T / 24) alpha - atm_vol = 0.
double west_alpha_root(double atm_vol, double forward, double maturity, double nu, double rho);

/// Index of the observation whose strike is closest to the forward.
std::size_t nearest_to_forward(const PosteriorSpec& spec);

/// Heuristic starting point for the (rho, nu) search: rho0 is the sign of
/// the least-squares slope of mid vols in log-moneyness, nu0 = 0.5.
std::pair<double, double> default_rho_nu_start(const PosteriorSpec& spec);

struct NelderMeadConfig {
    double diameter_tol = 1e-6;
    int max_evaluations = 2000;
    double penalty = 1e6;
    int max_restarts = 3;
};

struct MapResult {
    SabrParams params;
    double log_posterior = 0.0;
    int evaluations = 0;
};

/// MAP estimate over (rho, nu). alpha is profiled out at every evaluation:
/// the ATM root seeds a 1-d solve that makes the model reproduce the vol at
/// the strike nearest the forward. Outside the support the objective is the
/// Gaussian misfit plus penalty * sum max(0, |r_i| - spread_i / 2)^2.
///
/// Throws InfeasibleStart when no starting vertex can be evaluated, or when
/// the search ends outside the support.
MapResult nelder_mead_map(const PosteriorSpec& spec, double rho0, double nu0,
                          const NelderMeadConfig& cfg = {});

/// Batch-wise scale adaptation: after every `batch` iterations each log
/// scale moves by +/- min(max_delta, batch_index^{-1/2}) towards the target
/// acceptance rate.
struct AdaptationConfig {
    int batch = 50;
    double target_acceptance = 0.44;
    double max_delta = 0.01;
    double min_scale = 1e-6;
    double max_scale = 10.0;
    bool frozen = false;
};

/// Output of the generic component-wise sampler. states holds J rows of
/// dimension `dim`, row-major.
struct ComponentChain {
    std::size_t dim = 0;
    std::vector<double> states;
    std::vector<std::uint8_t> accepted;  ///< J x dim acceptance flags
    std::vector<std::int64_t> acceptance_counts;
    std::vector<double> final_scales;
};

using LogTarget = std::function<double(std::span<const double>)>;

/// Single-component random-walk Metropolis with Gaussian proposals, updating
/// coordinates in order each iteration.
ComponentChain component_mcmc(const LogTarget& log_target, std::vector<double> init,
                              std::vector<double> scales, std::int64_t iterations,
                              std::uint64_t seed, const AdaptationConfig& adapt = {});

struct McmcSample {
    SabrParams params;
    double indicator = 0.0;
    std::array<bool, 3> accepted{};  ///< alpha, rho, nu
};

struct McmcChain {
    std::vector<McmcSample> samples;
    std::array<double, 3> proposal_scales{};  ///< final (s_alpha, s_rho, s_nu)
    std::array<std::int64_t, 3> acceptance_counts{};
    std::uint64_t seed = 0;
    std::int64_t length = 0;
};

/// Runs the sampler on (alpha, rho, nu) from `init`. Initial scales are
/// 0.1 alpha, 0.1 and 0.1 max(nu, 0.1). Proposals with nu <= 0 are rejected
/// since the indicator is undefined there.
/// Throws InvalidInit when log_posterior(init) is -inf.
McmcChain adaptive_mcmc_run(const PosteriorSpec& spec, const SabrParams& init,
                            std::int64_t iterations, std::uint64_t seed,
                            const AdaptationConfig& adapt = {});

struct KdeCurve {
    double bandwidth = 0.0;
    std::vector<double> grid;
    std::vector<double> density;
};

/// Epanechnikov density estimate on 512 points over [min - h, max + h],
/// h = (max - min) / 15 unless overridden. Throws DegenerateSample when
/// fewer than two distinct values are given.
KdeCurve kde_epanechnikov(std::span<const double> samples,
                          std::optional<double> bandwidth_override = std::nullopt);

/// Linear-interpolation empirical quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double p);

struct QuantitySummary {
    std::string name;
    double mean = 0.0;
    double lower = 0.0;  ///< 2.5% quantile
    double upper = 0.0;  ///< 97.5% quantile
    std::optional<KdeCurve> kde;  ///< empty when the samples are all equal
};

struct PosteriorSummary {
    double burn_in_fraction = 0.25;
    std::int64_t burn_in = 0;
    std::int64_t retained = 0;
    std::array<QuantitySummary, 4> quantities;  ///< alpha, rho, nu, A
    double prob_bubble = 0.0;
    std::array<double, 3> acceptance_rates{};
};

/// Drops the first floor(burn_in_fraction * J) samples and summarizes the rest.
PosteriorSummary summarize_posterior(const McmcChain& chain, double burn_in_fraction = 0.25);

/// iter,alpha,rho,nu,A,accepted_alpha,accepted_rho,accepted_nu
void write_mcmc_trace_csv(std::ostream& out, const McmcChain& chain);

/// iter and running means of alpha, rho, nu, A over the full chain.
void write_cumulative_average_csv(std::ostream& out, const McmcChain& chain);
/// quantity,x,density for every KDE curve in the summary.
void write_kde_csv(std::ostream& out, const PosteriorSummary& summary);
void write_summary_json(std::ostream& out, const PosteriorSummary& summary, const McmcChain& chain);

/// strike,side,observed_vol,bid_vol,ask_vol,model_vol for plotting a fit.
void write_smile_fit_csv(std::ostream& out, const PosteriorSpec& spec, const SabrParams& params);

}  // namespace defectscope
