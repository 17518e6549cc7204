#pragma once

/**
 * @file market_data.hpp
 * @brief Single-maturity option chains: parsing, liquidity filtering,
 * implied forward and carry, and conversion to implied-vol observations.
 *
 * Chain CSV layout:
 *
 *   #spot=<float>
 *   #rate=<float>
 *   #valuation=<YYYY-MM-DD>
 *   #expiry=<YYYY-MM-DD>
 *   strike,side,bid,ask,volume,exercise
 *   100,C,4.10,4.25,37,A
 *
 * side is C or P, exercise is A (American) or E (European).
 */

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "defectscope/num_kernel.hpp"

namespace defectscope {

enum class Exercise { American, European };

struct OptionQuote {
    double strike = 0.0;
    OptionSide side = OptionSide::Call;
    double bid = 0.0;
    double ask = 0.0;
    std::int64_t volume = 0;
    Exercise exercise = Exercise::American;

    double mid() const noexcept { return 0.5 * (bid + ask); }
};

struct ChainSlice {
    double spot = 0.0;
    std::chrono::year_month_day valuation_date{};
    std::chrono::year_month_day expiry_date{};
    double maturity = 0.0;  ///< ACT/365 year fraction
    double rate = 0.0;
    std::vector<OptionQuote> quotes;
};

struct ForwardEstimate {
    double forward = 0.0;
    double carry_yield = 0.0;  ///< dividend yield plus borrow cost
    int iterations = 0;
    bool converged = false;
};

/// One strike of the calibration data: mid implied vol and the bid-ask
/// spread expressed in vol units.
struct VolObservation {
    double strike = 0.0;
    double mid_vol = 0.0;
    double spread_vol = 0.0;
    OptionSide side = OptionSide::Call;
};

/// A quote that could not be turned into an observation.
struct DroppedQuote {
    double strike = 0.0;
    OptionSide side = OptionSide::Call;
    std::string reason;
};

struct VolObservationSet {
    std::vector<VolObservation> observations;
    std::vector<DroppedQuote> dropped;
};

/// Vol observations together with the forward and maturity they refer to.
struct VolObservationFile {
    double forward = 0.0;
    double maturity = 0.0;
    std::vector<VolObservation> observations;
};

double act365(std::chrono::year_month_day from, std::chrono::year_month_day to);

ChainSlice parse_chain_csv(std::istream& in);
void write_chain_csv(std::ostream& out, const ChainSlice& chain);

/// Removes quotes with no traded volume.
ChainSlice drop_zero_volume(const ChainSlice& chain);

/// Liquidity filters, in order: zero volume; in-the-money relative to
/// forward_guess; mid below 0.03; longest monotone subsequence of mids per
/// side (calls non-increasing, puts non-decreasing in strike).
/// Throws EmptyAfterFilter when nothing survives.
ChainSlice filter_liquidity(const ChainSlice& chain, double forward_guess);

/// Indices of a longest monotone subsequence of `values`.
///
/// Ties between equally long subsequences are broken by preferring, in order
/// of increasing `distance`, to keep each element.
std::vector<std::size_t> longest_monotone_subsequence(std::span<const double> values,
                                                      bool non_increasing,
                                                      std::span<const double> distance);

/// Fixed-point estimate of the implied forward and carry yield from
/// call/put pairs at the strikes bracketing the running forward.
ForwardEstimate estimate_forward_and_carry(const ChainSlice& chain, double q_init = 0.0,
                                           const FdGrid& grid = {});

/// Model value of a quote under a flat vol with the given carry yield.
double quote_model_price(const OptionQuote& quote, const ChainSlice& chain, double carry_yield,
                         double vol, const FdGrid& grid = {});

/// Implied vol of `price` for the contract described by `quote`.
double quote_implied_vol(double price, const OptionQuote& quote, const ChainSlice& chain,
                         double carry_yield, const FdGrid& grid = {});

/// Bid and ask implied vols per quote. spread_overrides maps a strike to a
/// multiplier on its vol spread.
VolObservationSet quotes_to_vol_observations(const ChainSlice& chain, const ForwardEstimate& fe,
                                             const FdGrid& grid = {},
                                             const std::map<double, double>& spread_overrides = {});

void write_vol_observations_csv(std::ostream& out, const VolObservationFile& file);
VolObservationFile read_vol_observations_csv(std::istream& in);

}  // namespace defectscope
