#include "defectscope/pipeline.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace defectscope {

namespace {

template <typename F>
auto in_stage(Stage stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

std::string format_date(std::chrono::year_month_day d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                       static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

}  // namespace

std::string_view stage_name(Stage stage) noexcept {
    switch (stage) {
        case Stage::Usage: return "usage";
        case Stage::Parse: return "parse";
        case Stage::Forward: return "forward";
        case Stage::Filter: return "filter";
        case Stage::Vols: return "vols";
        case Stage::Map: return "map";
        case Stage::Mcmc: return "mcmc";
        case Stage::Output: return "output";
    }
    return "unknown";
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> explicit_seed) {
    if (explicit_seed) return *explicit_seed;
    const char* env = std::getenv(kSeedEnvVar);
    if (env == nullptr || *env == '\0') return kDefaultSeed;
    const std::string_view text(env);
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw InvalidArgument(fmt::format("{}='{}' is not a non-negative integer", kSeedEnvVar, text));
    }
    return seed;
}

void RunConfig::validate() const {
    if (samples < 1000) throw InvalidArgument("samples must be at least 1000");
    if (!(burn_in >= 0.0 && burn_in < 1.0)) throw InvalidArgument("burn-in must lie in [0, 1)");
    if (!(obs_sigma > 0.0)) throw InvalidArgument("obs-sigma must be positive");
    if (mc_paths < 1) throw InvalidArgument("mc-paths must be positive");
    for (const auto& [k, m] : spread_overrides) {
        if (!(k > 0.0) || !(m > 0.0)) throw InvalidArgument("spread overrides need K > 0 and mult > 0");
    }
    if (rho0 && !(std::abs(*rho0) <= 1.0)) throw InvalidArgument("rho0 must lie in [-1, 1]");
    if (nu0 && !(*nu0 >= 0.0)) throw InvalidArgument("nu0 must be non-negative");
    grid.validate();
}

ChainSlice load_chain(const std::filesystem::path& file, std::optional<double> rate_override) {
    return in_stage(Stage::Parse, [&] {
        std::ifstream in(file);
        if (!in) throw Error("cannot open chain file '" + file.string() + "'");
        ChainSlice chain = parse_chain_csv(in);
        if (rate_override) chain.rate = *rate_override;
        return chain;
    });
}

ForwardEstimate run_forward_stage(const ChainSlice& chain, const FdGrid& grid, bool allow_unconverged) {
    return in_stage(Stage::Forward, [&] {
        ForwardEstimate fe = estimate_forward_and_carry(drop_zero_volume(chain), 0.0, grid);
        if (!fe.converged && !allow_unconverged) {
            throw NoConvergence(fmt::format(
                "call and put vols still disagree after {} iterations (forward {:.6g}, carry {:.6g})",
                fe.iterations, fe.forward, fe.carry_yield));
        }
        return fe;
    });
}

ChainSlice run_filter_stage(const ChainSlice& chain, double forward) {
    return in_stage(Stage::Filter, [&] { return filter_liquidity(chain, forward); });
}

VolObservationSet run_vols_stage(const ChainSlice& filtered, const ForwardEstimate& fe, const FdGrid& grid,
                                 const std::map<double, double>& spread_overrides) {
    return in_stage(Stage::Vols, [&] {
        auto vols = quotes_to_vol_observations(filtered, fe, grid, spread_overrides);
        if (vols.observations.empty()) throw Error("no quote could be inverted to an implied vol");
        return vols;
    });
}

PosteriorSpec load_posterior_spec(const std::filesystem::path& vols_file, double obs_sigma) {
    return in_stage(Stage::Parse, [&] {
        std::ifstream in(vols_file);
        if (!in) throw Error("cannot open vols file '" + vols_file.string() + "'");
        const auto file = read_vol_observations_csv(in);
        PosteriorSpec spec{file.observations, file.forward, file.maturity, obs_sigma};
        spec.validate();
        return spec;
    });
}

MapResult run_map_stage(const PosteriorSpec& spec, std::optional<double> rho0, std::optional<double> nu0) {
    return in_stage(Stage::Map, [&] {
        const auto [rho_default, nu_default] = default_rho_nu_start(spec);
        return nelder_mead_map(spec, rho0.value_or(rho_default), nu0.value_or(nu_default));
    });
}

McmcChain run_mcmc_stage(const PosteriorSpec& spec, const SabrParams& init, std::int64_t samples,
                         std::uint64_t seed) {
    return in_stage(Stage::Mcmc, [&] { return adaptive_mcmc_run(spec, init, samples, seed); });
}

void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    in_stage(Stage::Output, [&] {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        auto tmp = path;
        tmp += ".tmp";
        try {
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) throw Error("cannot write '" + tmp.string() + "'");
                body(out);
                out.flush();
                if (!out) throw Error("write failed for '" + tmp.string() + "'");
            }
            std::filesystem::rename(tmp, path);
        } catch (...) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw;
        }
    });
}

void write_forward_json(std::ostream& out, const ForwardEstimate& fe, const ChainSlice& chain) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["forward"] = fe.forward;
    j["carry_yield"] = fe.carry_yield;
    j["iterations"] = fe.iterations;
    j["converged"] = fe.converged;
    j["spot"] = chain.spot;
    j["rate"] = chain.rate;
    j["maturity"] = chain.maturity;
    j["valuation"] = format_date(chain.valuation_date);
    j["expiry"] = format_date(chain.expiry_date);
    out << j.dump(2) << '\n';
}

void write_map_json(std::ostream& out, const MapResult& map) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["alpha"] = map.params.alpha;
    j["rho"] = map.params.rho;
    j["nu"] = map.params.nu;
    j["log_posterior"] = map.log_posterior;
    j["evaluations"] = map.evaluations;
    out << j.dump(2) << '\n';
}

SabrParams read_map_json(const std::filesystem::path& file) {
    return in_stage(Stage::Parse, [&] {
        std::ifstream in(file);
        if (!in) throw Error("cannot open MAP file '" + file.string() + "'");
        const auto j = nlohmann::json::parse(in);
        SabrParams p{j.at("alpha").get<double>(), j.at("nu").get<double>(), j.at("rho").get<double>()};
        p.validate();
        return p;
    });
}

void write_dropped_csv(std::ostream& out, const VolObservationSet& vols) {
    out << "strike,side,reason\n";
    for (const auto& d : vols.dropped) {
        std::string reason = d.reason;
        std::replace(reason.begin(), reason.end(), ',', ';');
        out << fmt::format("{},{},{}\n", d.strike, to_string(d.side), reason);
    }
}

void write_posterior_artifacts(const std::filesystem::path& dir, const PosteriorSpec& spec,
                               const SabrParams& fit, const McmcChain& chain,
                               const PosteriorSummary& summary) {
    write_file_atomic(dir / "chain.csv", [&](std::ostream& o) { write_mcmc_trace_csv(o, chain); });
    write_file_atomic(dir / "cumulative_average.csv",
                      [&](std::ostream& o) { write_cumulative_average_csv(o, chain); });
    write_file_atomic(dir / "kde.csv", [&](std::ostream& o) { write_kde_csv(o, summary); });
    write_file_atomic(dir / "smile_fit.csv", [&](std::ostream& o) { write_smile_fit_csv(o, spec, fit); });
    write_file_atomic(dir / "summary.json", [&](std::ostream& o) { write_summary_json(o, summary, chain); });
}

PipelineResult analyze_pipeline(const RunConfig& config) {
    in_stage(Stage::Usage, [&] { config.validate(); });
    const auto& dir = config.output_dir;
    PipelineResult result;

    const ChainSlice chain = load_chain(config.chain_file, config.rate);
    result.forward = run_forward_stage(chain, config.grid, config.allow_unconverged);
    write_file_atomic(dir / "forward.json", [&](std::ostream& o) { write_forward_json(o, result.forward, chain); });

    result.filtered = run_filter_stage(chain, result.forward.forward);
    write_file_atomic(dir / "filtered_chain.csv", [&](std::ostream& o) { write_chain_csv(o, result.filtered); });

    result.vols = run_vols_stage(result.filtered, result.forward, config.grid, config.spread_overrides);
    const VolObservationFile vol_file{result.forward.forward, chain.maturity, result.vols.observations};
    write_file_atomic(dir / "vols.csv", [&](std::ostream& o) { write_vol_observations_csv(o, vol_file); });
    write_file_atomic(dir / "dropped_quotes.csv", [&](std::ostream& o) { write_dropped_csv(o, result.vols); });

    const PosteriorSpec spec = in_stage(Stage::Map, [&] {
        PosteriorSpec s{vol_file.observations, vol_file.forward, vol_file.maturity, config.obs_sigma};
        s.validate();
        return s;
    });
    result.map = run_map_stage(spec, config.rho0, config.nu0);
    write_file_atomic(dir / "map.json", [&](std::ostream& o) { write_map_json(o, result.map); });

    result.chain = run_mcmc_stage(spec, result.map.params, config.samples, config.seed);
    result.summary = in_stage(Stage::Mcmc, [&] { return summarize_posterior(result.chain, config.burn_in); });
    write_posterior_artifacts(dir, spec, result.map.params, result.chain, result.summary);
    return result;
}

}  // namespace defectscope
