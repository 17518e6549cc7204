#include "defectscope/bayes_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/tools/roots.hpp>
#include <boost/random/uniform_01.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "defectscope/defect_indicator.hpp"
#include "defectscope/errors.hpp"
#include "defectscope/random.hpp"

namespace defectscope {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::array<const char*, 4> kQuantityNames = {"alpha", "rho", "nu", "A"};

bool in_prior_support(const SabrParams& p) {
    return std::isfinite(p.alpha) && std::isfinite(p.nu) && std::isfinite(p.rho) && p.alpha > 0.0 &&
           p.nu >= 0.0 && std::abs(p.rho) <= 1.0;
}

// Residuals y_i - f_i(theta); false when the forward map fails anywhere.
bool residuals(const SabrParams& p, const PosteriorSpec& spec, std::vector<double>& out) {
    out.resize(spec.observations.size());
    try {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& o = spec.observations[i];
            out[i] = o.mid_vol - hagan_implied_vol(p, spec.forward, o.strike, spec.maturity);
        }
    } catch (const Error&) {
        return false;
    }
    return true;
}

// Vertex of the (rho, nu) search together with its profiled alpha.
struct Vertex {
    double rho = 0.0;
    double nu = 0.0;
    double alpha = 0.0;
    double value = kInf;
};

class MapObjective {
public:
    MapObjective(const PosteriorSpec& spec, double penalty)
        : spec_(spec), penalty_(penalty), atm_(spec.observations[nearest_to_forward(spec)]) {}

    Vertex operator()(double rho, double nu) {
        ++evaluations;
        Vertex v{rho, nu, 0.0, kInf};
        if (!(std::abs(rho) <= 1.0) || !(nu >= 0.0)) return v;
        const auto alpha = profiled_alpha(rho, nu);
        if (!alpha) return v;
        v.alpha = *alpha;
        if (!residuals({v.alpha, nu, rho}, spec_, r_)) return v;
        const double inv_var = 1.0 / (spec_.obs_sigma * spec_.obs_sigma);
        double value = 0.0;
        for (std::size_t i = 0; i < r_.size(); ++i) {
            const double excess = std::max(0.0, std::abs(r_[i]) - 0.5 * spec_.observations[i].spread_vol);
            value += 0.5 * r_[i] * r_[i] * inv_var + penalty_ * excess * excess;
        }
        v.value = value;
        return v;
    }

    int evaluations = 0;

private:
    std::optional<double> profiled_alpha(double rho, double nu) const {
        double start = 0.0;
        try {
            start = west_alpha_root(atm_.mid_vol, spec_.forward, spec_.maturity, nu, rho);
        } catch (const Error&) {
            return std::nullopt;
        }
        auto gap = [&](double alpha) {
            try {
                return hagan_implied_vol({alpha, nu, rho}, spec_.forward, atm_.strike, spec_.maturity) -
                       atm_.mid_vol;
            } catch (const Error&) {
                return kInf;
            }
        };
        const double g0 = gap(start);
        if (!std::isfinite(g0)) return start;
        if (g0 == 0.0) return start;
        // Bracket by geometric steps away from the root of the ATM identity.
        double lo = start;
        double hi = start;
        double g_lo = g0;
        double g_hi = g0;
        for (int i = 0; i < 60 && g_lo * g_hi > 0.0; ++i) {
            if (g0 > 0.0) {
                hi = lo;
                g_hi = g_lo;
                lo /= 1.25;
                g_lo = gap(lo);
            } else {
                lo = hi;
                g_lo = g_hi;
                hi *= 1.25;
                g_hi = gap(hi);
            }
            if (!std::isfinite(g_lo) || !std::isfinite(g_hi)) return start;
        }
        if (g_lo * g_hi > 0.0) return start;
        std::uintmax_t max_iter = 100;
        const auto [a, b] = boost::math::tools::toms748_solve(
            gap, lo, hi, g_lo, g_hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
        return 0.5 * (a + b);
    }

    const PosteriorSpec& spec_;
    double penalty_;
    VolObservation atm_;
    std::vector<double> r_;
};

// One Nelder-Mead run on (rho, nu) from the given simplex.
Vertex nelder_mead(MapObjective& f, std::array<Vertex, 3> s, const NelderMeadConfig& cfg) {
    auto order = [&] {
        std::sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.value < b.value; });
    };
    auto diameter = [&] {
        double d = 0.0;
        for (int i = 1; i < 3; ++i) d = std::max(d, std::hypot(s[i].rho - s[0].rho, s[i].nu - s[0].nu));
        return d;
    };
    order();
    while (f.evaluations < cfg.max_evaluations && diameter() >= cfg.diameter_tol) {
        const double c_rho = 0.5 * (s[0].rho + s[1].rho);
        const double c_nu = 0.5 * (s[0].nu + s[1].nu);
        auto along = [&](double t) { return f(c_rho + t * (s[2].rho - c_rho), c_nu + t * (s[2].nu - c_nu)); };

        const Vertex reflected = along(-1.0);
        if (reflected.value < s[0].value) {
            const Vertex expanded = along(-2.0);
            s[2] = expanded.value < reflected.value ? expanded : reflected;
        } else if (reflected.value < s[1].value) {
            s[2] = reflected;
        } else {
            const bool outside = reflected.value < s[2].value;
            const Vertex contracted = along(outside ? -0.5 : 0.5);
            if (contracted.value < (outside ? reflected.value : s[2].value)) {
                s[2] = contracted;
            } else {
                for (int i = 1; i < 3; ++i) {
                    s[i] = f(s[0].rho + 0.5 * (s[i].rho - s[0].rho), s[0].nu + 0.5 * (s[i].nu - s[0].nu));
                }
            }
        }
        order();
    }
    return s[0];
}

std::array<Vertex, 3> initial_simplex(MapObjective& f, double rho0, double nu0) {
    const double d_rho = rho0 + 0.2 <= 1.0 ? 0.2 : -0.2;
    const double d_nu = 0.25 * std::max(nu0, 0.2);
    return {f(rho0, nu0), f(rho0 + d_rho, nu0), f(rho0, nu0 + d_nu)};
}

}  // namespace

void PosteriorSpec::validate() const {
    if (observations.empty()) throw InvalidArgument("PosteriorSpec: no observations");
    if (!(obs_sigma > 0.0)) throw InvalidArgument("PosteriorSpec: obs_sigma must be positive");
    if (!(forward > 0.0) || !(maturity > 0.0)) {
        throw InvalidArgument("PosteriorSpec: forward and maturity must be positive");
    }
    for (const auto& o : observations) {
        if (!(o.strike > 0.0) || !(o.spread_vol >= 0.0) || !std::isfinite(o.mid_vol)) {
            throw InvalidArgument(fmt::format("PosteriorSpec: bad observation at strike {}", o.strike));
        }
    }
}

double log_posterior(const SabrParams& params, const PosteriorSpec& spec) {
    if (!in_prior_support(params)) return -kInf;
    thread_local std::vector<double> r;
    if (!residuals(params, spec, r)) return -kInf;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (std::abs(r[i]) > 0.5 * spec.observations[i].spread_vol) return -kInf;
        sum_sq += r[i] * r[i];
    }
    return -0.5 * sum_sq / (spec.obs_sigma * spec.obs_sigma);
}

double max_constraint_violation(const SabrParams& params, const PosteriorSpec& spec) {
    if (!in_prior_support(params)) return kInf;
    std::vector<double> r;
    if (!residuals(params, spec, r)) return kInf;
    double worst = -kInf;
    for (std::size_t i = 0; i < r.size(); ++i) {
        worst = std::max(worst, std::abs(r[i]) - 0.5 * spec.observations[i].spread_vol);
    }
    return worst;
}

double west_alpha_root(double atm_vol, double /*forward*/, double maturity, double nu, double rho) {
    if (!(atm_vol > 0.0)) throw InvalidArgument("west_alpha_root: atm_vol must be positive");
    const double a = 0.25 * rho * nu * maturity;
    const double b = 1.0 + (2.0 - 3.0 * rho * rho) * nu * nu * maturity / 24.0;
    const double c = -atm_vol;
    if (a == 0.0) {
        if (b > 0.0) return atm_vol / b;
        throw NoPositiveRoot("west_alpha_root: linear ATM identity has no positive root");
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) throw NoPositiveRoot("west_alpha_root: complex roots");
    // Cancellation-free pair of roots.
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    double best = kInf;
    for (double root : {q / a, c / q}) {
        if (std::isfinite(root) && root > 0.0) best = std::min(best, root);
    }
    if (!std::isfinite(best)) throw NoPositiveRoot("west_alpha_root: no positive root");
    return best;
}

std::size_t nearest_to_forward(const PosteriorSpec& spec) {
    if (spec.observations.empty()) throw InvalidArgument("nearest_to_forward: no observations");
    std::size_t best = 0;
    for (std::size_t i = 1; i < spec.observations.size(); ++i) {
        if (std::abs(spec.observations[i].strike - spec.forward) <
            std::abs(spec.observations[best].strike - spec.forward)) {
            best = i;
        }
    }
    return best;
}

std::pair<double, double> default_rho_nu_start(const PosteriorSpec& spec) {
    const auto& obs = spec.observations;
    double mx = 0.0;
    double my = 0.0;
    for (const auto& o : obs) {
        mx += std::log(o.strike / spec.forward);
        my += o.mid_vol;
    }
    mx /= static_cast<double>(obs.size());
    my /= static_cast<double>(obs.size());
    double sxy = 0.0;
    for (const auto& o : obs) sxy += (std::log(o.strike / spec.forward) - mx) * (o.mid_vol - my);
    const auto [lo, hi] = std::minmax_element(obs.begin(), obs.end(), [](const auto& x, const auto& y) {
        return x.mid_vol < y.mid_vol;
    });
    if (lo->mid_vol == hi->mid_vol) return {0.0, 0.5};
    const double rho0 = sxy > 0.0 ? 1.0 : (sxy < 0.0 ? -1.0 : 0.0);
    return {rho0, 0.5};
}

MapResult nelder_mead_map(const PosteriorSpec& spec, double rho0, double nu0, const NelderMeadConfig& cfg) {
    spec.validate();
    MapObjective f(spec, cfg.penalty);
    auto simplex = initial_simplex(f, rho0, nu0);
    if (std::none_of(simplex.begin(), simplex.end(),
                     [](const Vertex& v) { return std::isfinite(v.value); })) {
        throw InfeasibleStart("nelder_mead_map: no initial vertex can be evaluated");
    }
    Vertex best = nelder_mead(f, simplex, cfg);
    for (int restart = 0; restart < cfg.max_restarts && f.evaluations < cfg.max_evaluations; ++restart) {
        const Vertex again = nelder_mead(f, initial_simplex(f, best.rho, best.nu), cfg);
        const bool improved = again.value < best.value - 1e-12 * (1.0 + std::abs(best.value));
        if (again.value < best.value) best = again;
        if (!improved) break;
    }

    MapResult out;
    out.params = {best.alpha, best.nu, best.rho};
    out.log_posterior = log_posterior(out.params, spec);
    out.evaluations = f.evaluations;
    if (!std::isfinite(out.log_posterior)) {
        throw InfeasibleStart(fmt::format(
            "nelder_mead_map: no point satisfies every spread constraint (worst excess {:.3g})",
            max_constraint_violation(out.params, spec)));
    }
    return out;
}

ComponentChain component_mcmc(const LogTarget& log_target, std::vector<double> init,
                              std::vector<double> scales, std::int64_t iterations, std::uint64_t seed,
                              const AdaptationConfig& adapt) {
    const std::size_t dim = init.size();
    if (dim == 0 || scales.size() != dim) throw InvalidArgument("component_mcmc: dimension mismatch");
    if (iterations < 1) throw InvalidArgument("component_mcmc: iterations must be >= 1");
    if (adapt.batch < 1) throw InvalidArgument("component_mcmc: batch must be >= 1");
    for (double& s : scales) {
        if (!(s > 0.0)) throw InvalidArgument("component_mcmc: proposal scales must be positive");
        s = std::clamp(s, adapt.min_scale, adapt.max_scale);
    }
    double current = log_target(init);
    if (!(current > -kInf) || std::isnan(current)) {
        throw InvalidInit("component_mcmc: initial state has zero target density");
    }

    ComponentChain chain;
    chain.dim = dim;
    chain.states.reserve(static_cast<std::size_t>(iterations) * dim);
    chain.accepted.reserve(static_cast<std::size_t>(iterations) * dim);
    chain.acceptance_counts.assign(dim, 0);

    Engine engine = make_engine(seed);
    Normal normal;
    boost::random::uniform_01<double> uniform;
    std::vector<double> log_scale(dim);
    for (std::size_t c = 0; c < dim; ++c) log_scale[c] = std::log(scales[c]);
    std::vector<std::int64_t> batch_hits(dim, 0);
    std::vector<double> x = std::move(init);

    for (std::int64_t j = 0; j < iterations; ++j) {
        for (std::size_t c = 0; c < dim; ++c) {
            const double old = x[c];
            x[c] = old + scales[c] * normal(engine);
            const double proposed = log_target(x);
            const double u = uniform(engine);
            const bool accept = proposed > -kInf && std::log(u) < proposed - current;
            if (accept) {
                current = proposed;
                ++chain.acceptance_counts[c];
                ++batch_hits[c];
            } else {
                x[c] = old;
            }
            chain.accepted.push_back(accept ? 1 : 0);
        }
        chain.states.insert(chain.states.end(), x.begin(), x.end());

        if (!adapt.frozen && (j + 1) % adapt.batch == 0) {
            const double batch_index = static_cast<double>((j + 1) / adapt.batch);
            const double delta = std::min(adapt.max_delta, 1.0 / std::sqrt(batch_index));
            for (std::size_t c = 0; c < dim; ++c) {
                const double rate = static_cast<double>(batch_hits[c]) / adapt.batch;
                log_scale[c] += rate > adapt.target_acceptance ? delta : -delta;
                log_scale[c] = std::clamp(log_scale[c], std::log(adapt.min_scale), std::log(adapt.max_scale));
                scales[c] = std::exp(log_scale[c]);
                batch_hits[c] = 0;
            }
        }
    }
    chain.final_scales = std::move(scales);
    return chain;
}

McmcChain adaptive_mcmc_run(const PosteriorSpec& spec, const SabrParams& init, std::int64_t iterations,
                            std::uint64_t seed, const AdaptationConfig& adapt) {
    spec.validate();
    if (!(init.nu > 0.0) || !(log_posterior(init, spec) > -kInf)) {
        throw InvalidInit("adaptive_mcmc_run: initial point lies outside the posterior support");
    }
    const auto target = [&spec](std::span<const double> x) {
        if (!(x[2] > 0.0)) return -kInf;
        return log_posterior({x[0], x[2], x[1]}, spec);
    };
    const auto raw = component_mcmc(target, {init.alpha, init.rho, init.nu},
                                    {0.1 * init.alpha, 0.1, 0.1 * std::max(init.nu, 0.1)}, iterations,
                                    seed, adapt);

    McmcChain chain;
    chain.seed = seed;
    chain.length = iterations;
    chain.samples.reserve(static_cast<std::size_t>(iterations));
    for (std::int64_t j = 0; j < iterations; ++j) {
        const auto row = static_cast<std::size_t>(j) * 3;
        McmcSample s;
        s.params = {raw.states[row], raw.states[row + 2], raw.states[row + 1]};
        s.indicator = indicator(s.params);
        for (std::size_t c = 0; c < 3; ++c) s.accepted[c] = raw.accepted[row + c] != 0;
        chain.samples.push_back(s);
    }
    for (std::size_t c = 0; c < 3; ++c) {
        chain.proposal_scales[c] = raw.final_scales[c];
        chain.acceptance_counts[c] = raw.acceptance_counts[c];
    }
    return chain;
}

KdeCurve kde_epanechnikov(std::span<const double> samples, std::optional<double> bandwidth_override) {
    if (samples.empty()) throw DegenerateSample("kde_epanechnikov: no samples");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) throw DegenerateSample("kde_epanechnikov: fewer than two distinct values");
    const double h = bandwidth_override.value_or((hi - lo) / 15.0);
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("kde_epanechnikov: bandwidth must be positive");

    constexpr std::size_t kPoints = 512;
    KdeCurve curve;
    curve.bandwidth = h;
    curve.grid.resize(kPoints);
    curve.density.assign(kPoints, 0.0);
    const double x0 = lo - h;
    const double step = (hi - lo + 2.0 * h) / static_cast<double>(kPoints - 1);
    for (std::size_t i = 0; i < kPoints; ++i) curve.grid[i] = x0 + step * static_cast<double>(i);

    // Each sample only touches the grid points within one bandwidth.
    for (double s : samples) {
        const auto first = static_cast<std::ptrdiff_t>(std::ceil((s - h - x0) / step));
        const auto last = static_cast<std::ptrdiff_t>(std::floor((s + h - x0) / step));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(first, 0);
             i <= std::min<std::ptrdiff_t>(last, kPoints - 1); ++i) {
            const double u = (curve.grid[static_cast<std::size_t>(i)] - s) / h;
            if (std::abs(u) < 1.0) curve.density[static_cast<std::size_t>(i)] += 1.0 - u * u;
        }
    }
    const double norm = 0.75 / (h * static_cast<double>(samples.size()));
    for (double& d : curve.density) d *= norm;
    return curve;
}

double sorted_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InvalidArgument("sorted_quantile: empty data");
    const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= sorted.size()) return sorted.back();
    const double w = pos - static_cast<double>(i);
    return sorted[i] + w * (sorted[i + 1] - sorted[i]);
}

PosteriorSummary summarize_posterior(const McmcChain& chain, double burn_in_fraction) {
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
        throw InvalidArgument("summarize_posterior: burn_in_fraction must lie in [0, 1)");
    }
    const auto n = static_cast<std::int64_t>(chain.samples.size());
    const auto burn = static_cast<std::int64_t>(std::floor(burn_in_fraction * static_cast<double>(n)));
    if (n - burn < 1) throw EmptyChain("summarize_posterior: no samples after burn-in");

    PosteriorSummary out;
    out.burn_in_fraction = burn_in_fraction;
    out.burn_in = burn;
    out.retained = n - burn;
    const auto kept = std::span(chain.samples).subspan(static_cast<std::size_t>(burn));

    std::vector<double> values(kept.size());
    for (std::size_t q = 0; q < 4; ++q) {
        for (std::size_t j = 0; j < kept.size(); ++j) {
            const auto& s = kept[j];
            values[j] = q == 0 ? s.params.alpha : q == 1 ? s.params.rho : q == 2 ? s.params.nu : s.indicator;
        }
        auto& qs = out.quantities[q];
        qs.name = kQuantityNames[q];
        qs.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        try {
            qs.kde = kde_epanechnikov(values);
        } catch (const DegenerateSample&) {
            qs.kde.reset();
        }
        std::sort(values.begin(), values.end());
        qs.lower = sorted_quantile(values, 0.025);
        qs.upper = sorted_quantile(values, 0.975);
    }
    const auto bubbles = std::count_if(kept.begin(), kept.end(), [](const McmcSample& s) { return s.indicator > 0.0; });
    out.prob_bubble = static_cast<double>(bubbles) / static_cast<double>(kept.size());
    for (std::size_t c = 0; c < 3; ++c) {
        out.acceptance_rates[c] = n > 0 ? static_cast<double>(chain.acceptance_counts[c]) / static_cast<double>(n) : 0.0;
    }
    return out;
}

void write_mcmc_trace_csv(std::ostream& out, const McmcChain& chain) {
    out << "iter,alpha,rho,nu,A,accepted_alpha,accepted_rho,accepted_nu\n";
    fmt::memory_buffer buf;
    for (std::size_t j = 0; j < chain.samples.size(); ++j) {
        const auto& s = chain.samples[j];
        buf.clear();
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},{},{}\n", j + 1, s.params.alpha,
                       s.params.rho, s.params.nu, s.indicator, int{s.accepted[0]}, int{s.accepted[1]},
                       int{s.accepted[2]});
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

void write_cumulative_average_csv(std::ostream& out, const McmcChain& chain) {
    out << "iter,alpha,rho,nu,A\n";
    std::array<double, 4> sum{};
    fmt::memory_buffer buf;
    for (std::size_t j = 0; j < chain.samples.size(); ++j) {
        const auto& s = chain.samples[j];
        sum[0] += s.params.alpha;
        sum[1] += s.params.rho;
        sum[2] += s.params.nu;
        sum[3] += s.indicator;
        const double n = static_cast<double>(j + 1);
        buf.clear();
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}\n", j + 1, sum[0] / n, sum[1] / n,
                       sum[2] / n, sum[3] / n);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

void write_kde_csv(std::ostream& out, const PosteriorSummary& summary) {
    out << "quantity,x,density\n";
    for (const auto& q : summary.quantities) {
        if (!q.kde) continue;
        for (std::size_t i = 0; i < q.kde->grid.size(); ++i) {
            out << fmt::format("{},{},{}\n", q.name, q.kde->grid[i], q.kde->density[i]);
        }
    }
}

void write_summary_json(std::ostream& out, const PosteriorSummary& summary, const McmcChain& chain) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["schema_version"] = 1;
    j["length"] = chain.length;
    j["seed"] = chain.seed;
    j["burn_in_fraction"] = summary.burn_in_fraction;
    j["burn_in"] = summary.burn_in;
    j["retained"] = summary.retained;
    j["prob_bubble"] = summary.prob_bubble;
    ordered_json means = ordered_json::object();
    ordered_json intervals = ordered_json::object();
    ordered_json kdes = ordered_json::object();
    for (const auto& q : summary.quantities) {
        means[q.name] = q.mean;
        intervals[q.name] = {q.lower, q.upper};
        if (q.kde) {
            kdes[q.name] = {{"bandwidth", q.kde->bandwidth}, {"x", q.kde->grid}, {"density", q.kde->density}};
        } else {
            kdes[q.name] = nullptr;
        }
    }
    j["cond_means"] = means;
    j["credible_intervals_95"] = intervals;
    j["acceptance_rates"] = {{"alpha", summary.acceptance_rates[0]},
                             {"rho", summary.acceptance_rates[1]},
                             {"nu", summary.acceptance_rates[2]}};
    j["proposal_scales"] = {{"alpha", chain.proposal_scales[0]},
                            {"rho", chain.proposal_scales[1]},
                            {"nu", chain.proposal_scales[2]}};
    j["kde_curves"] = kdes;
    out << j.dump(2) << '\n';
}

void write_smile_fit_csv(std::ostream& out, const PosteriorSpec& spec, const SabrParams& params) {
    out << "strike,side,observed_vol,bid_vol,ask_vol,model_vol\n";
    for (const auto& o : spec.observations) {
        double model = std::numeric_limits<double>::quiet_NaN();
        try {
            model = hagan_implied_vol(params, spec.forward, o.strike, spec.maturity);
        } catch (const Error&) {
        }
        out << fmt::format("{},{},{},{},{},{}\n", o.strike, to_string(o.side), o.mid_vol,
                           o.mid_vol - 0.5 * o.spread_vol, o.mid_vol + 0.5 * o.spread_vol, model);
    }
}

}  // namespace defectscope
