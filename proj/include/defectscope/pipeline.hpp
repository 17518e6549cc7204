#pragma once

/**
 * @file pipeline.hpp
 * @brief End-to-end run: chain file to posterior summary, with every stage
 * artifact written atomically into an output directory.
 */

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "defectscope/bayes_engine.hpp"
#include "defectscope/errors.hpp"
#include "defectscope/market_data.hpp"

namespace defectscope {

/// Failure stages; the value is the process exit code.
enum class Stage : int {
    Usage = 1,
    Parse = 2,
    Forward = 3,
    Filter = 4,
    Vols = 5,
    Map = 6,
    Mcmc = 7,
    Output = 8,
};

std::string_view stage_name(Stage stage) noexcept;

class StageError : public Error {
public:
    StageError(Stage stage, const std::string& what)
        : Error(std::string(stage_name(stage)) + ": " + what), stage_(stage) {}
    Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr const char* kSeedEnvVar = "DEFECTSCOPE_SEED";

/// Explicit seed if given, else $DEFECTSCOPE_SEED, else kDefaultSeed.
/// Throws InvalidArgument when the variable is set but not an integer.
std::uint64_t resolve_seed(std::optional<std::uint64_t> explicit_seed);

struct RunConfig {
    std::filesystem::path chain_file;
    std::optional<double> rate;  ///< overrides #rate in the chain file
    std::int64_t samples = 100000;
    double burn_in = 0.25;
    std::uint64_t seed = kDefaultSeed;
    double obs_sigma = 1.0;
    std::map<double, double> spread_overrides;
    std::filesystem::path output_dir = "defectscope_out";
    std::int64_t mc_paths = 1000000;
    std::optional<double> rho0;
    std::optional<double> nu0;
    bool allow_unconverged = false;
    FdGrid grid;

    void validate() const;
};

struct PipelineResult {
    ChainSlice filtered;
    ForwardEstimate forward;
    VolObservationSet vols;
    MapResult map;
    McmcChain chain;
    PosteriorSummary summary;
};

// Stage helpers shared by `analyze` and the single-stage subcommands. Each
// rethrows module errors as StageError.
ChainSlice load_chain(const std::filesystem::path& file, std::optional<double> rate_override);
ForwardEstimate run_forward_stage(const ChainSlice& chain, const FdGrid& grid, bool allow_unconverged);
ChainSlice run_filter_stage(const ChainSlice& chain, double forward);
VolObservationSet run_vols_stage(const ChainSlice& filtered, const ForwardEstimate& fe, const FdGrid& grid,
                                 const std::map<double, double>& spread_overrides);
PosteriorSpec load_posterior_spec(const std::filesystem::path& vols_file, double obs_sigma);
MapResult run_map_stage(const PosteriorSpec& spec, std::optional<double> rho0, std::optional<double> nu0);
McmcChain run_mcmc_stage(const PosteriorSpec& spec, const SabrParams& init, std::int64_t samples,
                         std::uint64_t seed);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

void write_forward_json(std::ostream& out, const ForwardEstimate& fe, const ChainSlice& chain);
void write_map_json(std::ostream& out, const MapResult& map);
SabrParams read_map_json(const std::filesystem::path& file);
void write_dropped_csv(std::ostream& out, const VolObservationSet& vols);

/// Writes the MCMC outputs (chain.csv, summary.json, kde.csv,
/// cumulative_average.csv, smile_fit.csv) for an already summarized chain.
void write_posterior_artifacts(const std::filesystem::path& dir, const PosteriorSpec& spec,
                               const SabrParams& fit, const McmcChain& chain,
                               const PosteriorSummary& summary);

/// parse, forward, filter, vols, MAP, MCMC, summary. Artifacts go to
/// config.output_dir. Throws StageError.
PipelineResult analyze_pipeline(const RunConfig& config);

}  // namespace defectscope
