// defectscope command-line front end.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "defectscope/bayes_engine.hpp"
#include "defectscope/defect_indicator.hpp"
#include "defectscope/pipeline.hpp"
#include "defectscope/sabr_model.hpp"

namespace ds = defectscope;

namespace {

std::map<double, double> parse_overrides(const std::vector<std::string>& items) {
    std::map<double, double> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw ds::StageError(ds::Stage::Usage, "--spread-override expects K=mult, got '" + item + "'");
        }
        try {
            std::size_t used_k = 0;
            std::size_t used_m = 0;
            const std::string k_text = item.substr(0, eq);
            const std::string m_text = item.substr(eq + 1);
            const double k = std::stod(k_text, &used_k);
            const double m = std::stod(m_text, &used_m);
            if (used_k != k_text.size() || used_m != m_text.size()) throw std::invalid_argument(item);
            out[k] = m;
        } catch (const std::logic_error&) {
            throw ds::StageError(ds::Stage::Usage, "--spread-override expects K=mult, got '" + item + "'");
        }
    }
    return out;
}

void print_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::cout << in.rdbuf();
}

struct Options {
    std::string chain_file;
    std::string vols_file;
    std::string map_file;
    std::string output_dir = "defectscope_out";
    std::string output;
    std::optional<double> rate;
    std::optional<double> forward;
    std::int64_t samples = 100000;
    double burn_in = 0.25;
    std::optional<std::uint64_t> seed;
    double obs_sigma = 1.0;
    std::vector<std::string> overrides;
    std::optional<double> rho0;
    std::optional<double> nu0;
    bool allow_unconverged = false;

    std::optional<double> alpha;
    std::optional<double> nu;
    std::optional<double> rho;
    std::optional<double> maturity;
    std::optional<double> gamma;
    std::optional<double> tau;
    std::int64_t paths = 1000000;
    std::optional<int> steps;
    std::string scheme = "integrating-factor";
};

void add_chain_input(CLI::App* cmd, Options& o) {
    cmd->add_option("--chain-file", o.chain_file, "option chain CSV")->required();
    cmd->add_option("--rate", o.rate, "continuously compounded rate (overrides #rate)");
}

void add_posterior_input(CLI::App* cmd, Options& o) {
    cmd->add_option("--vols-file", o.vols_file, "vol observations CSV written by `vols`")->required();
    cmd->add_option("--obs-sigma", o.obs_sigma, "observation noise sd in vol units")->check(CLI::PositiveNumber);
}

void add_start(CLI::App* cmd, Options& o) {
    cmd->add_option("--rho0", o.rho0, "initial rho for the MAP search")->check(CLI::Range(-1.0, 1.0));
    cmd->add_option("--nu0", o.nu0, "initial nu for the MAP search")->check(CLI::NonNegativeNumber);
}

void add_sampler(CLI::App* cmd, Options& o) {
    cmd->add_option("--samples", o.samples, "chain length J")->check(CLI::Range(std::int64_t{1000}, INT64_MAX));
    cmd->add_option("--burn-in", o.burn_in, "burn-in fraction in [0, 1)");
    cmd->add_option("--seed", o.seed, "RNG seed (default: $DEFECTSCOPE_SEED or 42)");
}

ds::RunConfig make_run_config(const Options& o) {
    ds::RunConfig cfg;
    cfg.chain_file = o.chain_file;
    cfg.rate = o.rate;
    cfg.samples = o.samples;
    cfg.burn_in = o.burn_in;
    cfg.seed = ds::resolve_seed(o.seed);
    cfg.obs_sigma = o.obs_sigma;
    cfg.spread_overrides = parse_overrides(o.overrides);
    cfg.output_dir = o.output_dir;
    cfg.mc_paths = o.paths;
    cfg.rho0 = o.rho0;
    cfg.nu0 = o.nu0;
    cfg.allow_unconverged = o.allow_unconverged;
    cfg.validate();
    return cfg;
}

int cmd_analyze(const Options& o) {
    const auto cfg = make_run_config(o);
    const auto r = ds::analyze_pipeline(cfg);
    std::cout << fmt::format("forward {} carry {} ({} iterations)\n", r.forward.forward, r.forward.carry_yield,
                             r.forward.iterations);
    std::cout << fmt::format("observations {} dropped {}\n", r.vols.observations.size(), r.vols.dropped.size());
    std::cout << fmt::format("map alpha {} rho {} nu {}\n", r.map.params.alpha, r.map.params.rho, r.map.params.nu);
    std::cout << fmt::format("mean A {} P(A>0) {}\n", r.summary.quantities[3].mean, r.summary.prob_bubble);
    std::cout << "artifacts in " << cfg.output_dir.string() << '\n';
    return 0;
}

int cmd_forward(const Options& o) {
    const auto chain = ds::load_chain(o.chain_file, o.rate);
    const auto fe = ds::run_forward_stage(chain, {}, o.allow_unconverged);
    const auto path = std::filesystem::path(o.output_dir) / "forward.json";
    ds::write_file_atomic(path, [&](std::ostream& out) { ds::write_forward_json(out, fe, chain); });
    print_json_file(path);
    return 0;
}

int cmd_filter(const Options& o) {
    const auto chain = ds::load_chain(o.chain_file, o.rate);
    const double forward = o.forward ? *o.forward : ds::run_forward_stage(chain, {}, o.allow_unconverged).forward;
    const auto filtered = ds::run_filter_stage(chain, forward);
    if (o.output.empty()) {
        ds::write_chain_csv(std::cout, filtered);
    } else {
        ds::write_file_atomic(o.output, [&](std::ostream& out) { ds::write_chain_csv(out, filtered); });
    }
    return 0;
}

int cmd_vols(const Options& o) {
    const auto chain = ds::load_chain(o.chain_file, o.rate);
    const auto overrides = parse_overrides(o.overrides);
    const auto fe = ds::run_forward_stage(chain, {}, o.allow_unconverged);
    const auto filtered = ds::run_filter_stage(chain, fe.forward);
    const auto vols = ds::run_vols_stage(filtered, fe, {}, overrides);
    const std::filesystem::path dir = o.output_dir;
    const ds::VolObservationFile file{fe.forward, chain.maturity, vols.observations};
    ds::write_file_atomic(dir / "forward.json", [&](std::ostream& out) { ds::write_forward_json(out, fe, chain); });
    ds::write_file_atomic(dir / "vols.csv", [&](std::ostream& out) { ds::write_vol_observations_csv(out, file); });
    ds::write_file_atomic(dir / "dropped_quotes.csv", [&](std::ostream& out) { ds::write_dropped_csv(out, vols); });
    std::cout << fmt::format("{} observations, {} dropped; written to {}\n", vols.observations.size(),
                             vols.dropped.size(), (dir / "vols.csv").string());
    return 0;
}

int cmd_map(const Options& o) {
    const auto spec = ds::load_posterior_spec(o.vols_file, o.obs_sigma);
    const auto map = ds::run_map_stage(spec, o.rho0, o.nu0);
    const std::filesystem::path dir = o.output_dir;
    ds::write_file_atomic(dir / "map.json", [&](std::ostream& out) { ds::write_map_json(out, map); });
    ds::write_file_atomic(dir / "smile_fit.csv",
                          [&](std::ostream& out) { ds::write_smile_fit_csv(out, spec, map.params); });
    print_json_file(dir / "map.json");
    return 0;
}

int cmd_mcmc(const Options& o) {
    if (!(o.burn_in >= 0.0 && o.burn_in < 1.0)) {
        throw ds::StageError(ds::Stage::Usage, "burn-in must lie in [0, 1)");
    }
    const auto spec = ds::load_posterior_spec(o.vols_file, o.obs_sigma);
    const auto init = o.map_file.empty() ? ds::run_map_stage(spec, o.rho0, o.nu0).params
                                         : ds::read_map_json(o.map_file);
    const auto chain = ds::run_mcmc_stage(spec, init, o.samples, ds::resolve_seed(o.seed));
    const auto summary = ds::summarize_posterior(chain, o.burn_in);
    ds::write_posterior_artifacts(o.output_dir, spec, init, chain, summary);
    std::cout << fmt::format("mean A {} P(A>0) {}\n", summary.quantities[3].mean, summary.prob_bubble);
    return 0;
}

int cmd_indicator(const Options& o) {
    const ds::SabrParams p{*o.alpha, *o.nu, *o.rho};
    p.validate();
    std::cout << fmt::format("indicator {:.7f}\n", ds::indicator(p));
    if (o.maturity) {
        std::cout << fmt::format("defect {:.7g}\n", ds::defect_finite_T(p, *o.maturity));
    }
    return 0;
}

int cmd_simulate(const Options& o) {
    const std::uint64_t seed = ds::resolve_seed(o.seed);
    if (o.gamma || o.tau) {
        if (!o.gamma || !o.tau) throw ds::StageError(ds::Stage::Usage, "--gamma and --tau go together");
        const auto scheme = o.scheme == "euler" ? ds::AbsorptionScheme::Euler
                                                : ds::AbsorptionScheme::IntegratingFactor;
        const int steps = o.steps.value_or(ds::absorption_default_steps(*o.tau, scheme));
        const auto mc = ds::absorption_mc_oracle(*o.gamma, *o.tau, {o.paths, steps, seed}, scheme);
        // d(T) depends on (gamma, tau) only; pick nu = 1, rho = 1.
        const double closed = ds::defect_finite_T({*o.gamma, 1.0, 1.0}, *o.tau);
        std::cout << fmt::format("hit_probability {:.7g} std_error {:.3g}\n", mc.value, mc.std_error);
        std::cout << fmt::format("closed_form {:.7g} z {:.3g}\n", closed,
                                 mc.std_error > 0 ? (mc.value - closed) / mc.std_error : 0.0);
        return 0;
    }
    if (!o.alpha || !o.nu || !o.rho || !o.maturity) {
        throw ds::StageError(ds::Stage::Usage,
                             "simulate needs --gamma/--tau or --alpha/--nu/--rho/--maturity");
    }
    const ds::SabrParams p{*o.alpha, *o.nu, *o.rho};
    const int steps = o.steps.value_or(ds::sabr_default_steps(*o.maturity));
    const auto terminals = ds::sabr_simulate_forward(p, *o.maturity, {o.paths, steps, seed});
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double r : terminals) {
        sum += r;
        sum_sq += r * r;
    }
    const double n = static_cast<double>(terminals.size());
    const double mean = sum / n;
    const double se = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / (n - 1.0));
    std::cout << fmt::format("mean_ratio {:.7g} std_error {:.3g}\n", mean, se);
    if (p.rho > 0.0) {
        std::cout << fmt::format("one_minus_defect {:.7g}\n", 1.0 - ds::defect_finite_T(p, *o.maturity));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Martingale defect and bubble detection under lognormal SABR"};
    app.require_subcommand(1);
    Options o;

    auto* analyze = app.add_subcommand("analyze", "full pipeline from a chain file");
    add_chain_input(analyze, o);
    add_sampler(analyze, o);
    analyze->add_option("--obs-sigma", o.obs_sigma, "observation noise sd in vol units")->check(CLI::PositiveNumber);
    analyze->add_option("--spread-override", o.overrides, "K=mult spread multiplier (repeatable)");
    analyze->add_option("--output-dir", o.output_dir, "artifact directory");
    analyze->add_option("--mc-paths", o.paths, "paths for oracle runs");
    analyze->add_flag("--allow-unconverged", o.allow_unconverged, "continue if the forward loop hits its cap");
    add_start(analyze, o);

    auto* forward = app.add_subcommand("forward", "implied forward and carry yield");
    add_chain_input(forward, o);
    forward->add_option("--output-dir", o.output_dir, "artifact directory");
    forward->add_flag("--allow-unconverged", o.allow_unconverged, "accept a capped fixed-point loop");

    auto* filter = app.add_subcommand("filter", "liquidity filters");
    add_chain_input(filter, o);
    filter->add_option("--forward", o.forward, "forward for the moneyness rule (default: estimated)");
    filter->add_option("--output", o.output, "filtered chain CSV (default: stdout)");
    filter->add_flag("--allow-unconverged", o.allow_unconverged, "accept a capped fixed-point loop");

    auto* vols = app.add_subcommand("vols", "filtered quotes to implied-vol observations");
    add_chain_input(vols, o);
    vols->add_option("--spread-override", o.overrides, "K=mult spread multiplier (repeatable)");
    vols->add_option("--output-dir", o.output_dir, "artifact directory");
    vols->add_flag("--allow-unconverged", o.allow_unconverged, "accept a capped fixed-point loop");

    auto* map = app.add_subcommand("map", "MAP estimate from vol observations");
    add_posterior_input(map, o);
    add_start(map, o);
    map->add_option("--output-dir", o.output_dir, "artifact directory");

    auto* mcmc = app.add_subcommand("mcmc", "posterior sampling from vol observations");
    add_posterior_input(mcmc, o);
    add_start(mcmc, o);
    add_sampler(mcmc, o);
    mcmc->add_option("--map-file", o.map_file, "start from this map.json instead of re-optimizing");
    mcmc->add_option("--output-dir", o.output_dir, "artifact directory");

    auto* ind = app.add_subcommand("indicator", "martingale defect indicator for given parameters");
    ind->add_option("--alpha", o.alpha)->required();
    ind->add_option("--nu", o.nu)->required();
    ind->add_option("--rho", o.rho)->required();
    ind->add_option("--maturity", o.maturity, "also print the defect at this maturity");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo oracles");
    sim->add_option("--gamma", o.gamma, "absorption oracle: rho alpha / nu");
    sim->add_option("--tau", o.tau, "absorption oracle: nu^2 T");
    sim->add_option("--alpha", o.alpha);
    sim->add_option("--nu", o.nu);
    sim->add_option("--rho", o.rho);
    sim->add_option("--maturity", o.maturity);
    sim->add_option("--paths", o.paths)->check(CLI::PositiveNumber);
    sim->add_option("--steps", o.steps)->check(CLI::PositiveNumber);
    sim->add_option("--scheme", o.scheme)->check(CLI::IsMember({"integrating-factor", "euler"}));
    sim->add_option("--seed", o.seed, "RNG seed (default: $DEFECTSCOPE_SEED or 42)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ds::Stage::Usage);
    }

    try {
        if (*analyze) return cmd_analyze(o);
        if (*forward) return cmd_forward(o);
        if (*filter) return cmd_filter(o);
        if (*vols) return cmd_vols(o);
        if (*map) return cmd_map(o);
        if (*mcmc) return cmd_mcmc(o);
        if (*ind) return cmd_indicator(o);
        if (*sim) return cmd_simulate(o);
    } catch (const ds::StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.stage());
    } catch (const std::exception& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return static_cast<int>(ds::Stage::Usage);
    }
    return static_cast<int>(ds::Stage::Usage);
}
