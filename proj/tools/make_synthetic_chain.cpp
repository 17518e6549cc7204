// Writes a European option chain whose mid implied vols follow the Hagan
// smile of the given SABR parameters, with bid and ask at +/- half_spread in
// vol. Used to build the end-to-end fixtures under tests/data.

#include <chrono>
#include <cmath>
#include <iostream>

#include <CLI11.hpp>

#include "defectscope/market_data.hpp"
#include "defectscope/sabr_model.hpp"

namespace ds = defectscope;
using namespace std::chrono;

int main(int argc, char** argv) {
    CLI::App app{"synthetic SABR option chain"};
    double alpha = 0.4, nu = 0.8, rho = 0.5;
    double spot = 100.0, rate = 0.01, carry = 0.02;
    double k_min = 50.0, k_max = 200.0, k_step = 5.0;
    double half_spread = 0.005;
    int days = 182;
    app.add_option("--alpha", alpha);
    app.add_option("--nu", nu);
    app.add_option("--rho", rho);
    app.add_option("--spot", spot);
    app.add_option("--rate", rate);
    app.add_option("--carry", carry);
    app.add_option("--k-min", k_min);
    app.add_option("--k-max", k_max);
    app.add_option("--k-step", k_step);
    app.add_option("--half-spread", half_spread, "half the bid-ask spread in vol");
    app.add_option("--days", days, "calendar days to expiry");
    CLI11_PARSE(app, argc, argv);

    ds::ChainSlice chain;
    chain.spot = spot;
    chain.rate = rate;
    chain.valuation_date = year{2018} / February / 8;
    chain.expiry_date = year_month_day{sys_days{chain.valuation_date} + ::days{days}};
    chain.maturity = ds::act365(chain.valuation_date, chain.expiry_date);
    const double T = chain.maturity;
    const double forward = spot * std::exp((rate - carry) * T);
    const double df = std::exp(-rate * T);
    const ds::SabrParams params{alpha, nu, rho};

    for (double k = k_min; k <= k_max + 1e-9; k += k_step) {
        const double vol = ds::hagan_implied_vol(params, forward, k, T);
        for (auto side : {ds::OptionSide::Call, ds::OptionSide::Put}) {
            ds::OptionQuote q;
            q.strike = k;
            q.side = side;
            q.exercise = ds::Exercise::European;
            q.volume = 100;
            q.bid = ds::black_price(forward, k, T, std::max(vol - half_spread, 1e-4), df, side);
            q.ask = ds::black_price(forward, k, T, vol + half_spread, df, side);
            chain.quotes.push_back(q);
        }
    }
    ds::write_chain_csv(std::cout, chain);
    return 0;
}
