// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "defectscope/defect_indicator.hpp"
#include "defectscope/market_data.hpp"
#include "defectscope/num_kernel.hpp"
#include "defectscope/pipeline.hpp"
#include "defectscope/sabr_model.hpp"
#include "oracles.hpp"

using namespace defectscope;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kPaths = 1'000'000;
constexpr double kSigmas = 3.0;
constexpr double kPointSeconds = 60.0;
constexpr double kIndicatorTol = 1e-3;
constexpr double kExpansionRelTol = 0.20;
constexpr double kSmileTol = 0.005;
constexpr double kAmericanRelTol = 1e-3;
constexpr double kZeroCarryRelTol = 1e-3;
constexpr double kCarryTol = 1e-4;
constexpr int kMaxForwardIterations = 50;
constexpr std::int64_t kChainLength = 100'000;
constexpr double kTrueIndicator = 0.3935;
constexpr double kIndicatorMeanTol = 0.05;
constexpr double kMinBubbleProb = 0.99;
constexpr double kMaxNoBubbleProb = 0.05;
constexpr double kEndToEndSeconds = 600.0;
constexpr double kKdeMassTol = 1e-3;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("defectscope_acceptance_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig fixture(const std::string& file, const fs::path& out) {
    RunConfig cfg;
    cfg.chain_file = fs::path(DEFECTSCOPE_TEST_DATA) / file;
    cfg.output_dir = out;
    cfg.samples = kChainLength;
    cfg.seed = 42;
    return cfg;
}

// Shared by criteria 8, 10 and 11.
struct BubbleRun {
    PipelineResult result;
    fs::path dir;
    double seconds = 0.0;
};

const BubbleRun& bubble_run() {
    static const BubbleRun run = [] {
        BubbleRun r;
        r.dir = scratch("bubble_a");
        const auto t0 = std::chrono::steady_clock::now();
        r.result = analyze_pipeline(fixture("bubble_chain.csv", r.dir));
        r.seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

void criterion_1(Outcome& o) {
    const SabrParams p{0.4, 0.8, 0.5};
    for (double T : {0.5, 1.0, 2.0}) {
        const auto t0 = std::chrono::steady_clock::now();
        const double d = defect_finite_T(p, T);
        const double tau = p.nu * p.nu * T;
        const int steps = absorption_default_steps(tau, AbsorptionScheme::IntegratingFactor);
        const auto mc = absorption_mc_oracle(p.gamma(), tau, {kPaths, steps, 100 + static_cast<std::uint64_t>(T * 10)});
        const double secs = seconds_since(t0);
        o.check(std::abs(d - mc.value) <= kSigmas * mc.std_error && secs < kPointSeconds,
                fmt("T=%g d=%.3e mc=%.3e se=%.1e", T, d, mc.value, mc.std_error) + fmt(" %.0fs", secs));
    }
}

void criterion_2(Outcome& o) {
    const double nu = 0.8;
    for (double g : {0.05, 0.25, 1.0, 2.0}) {
        const SabrParams p{g * nu, nu, 1.0};
        const double diff = std::abs(defect_finite_T(p, 200.0 / (nu * nu)) - indicator(p));
        o.check(diff <= kIndicatorTol, fmt("gamma=%g |d-A|=%.1e", g, diff));
    }
}

void criterion_3(Outcome& o) {
    const double g = 0.25;
    const SabrParams p{g, 1.0, 1.0};
    double last = INFINITY;
    for (double tau : {50.0, 100.0, 200.0}) {
        const double quad = a_c(g, tau);
        const double expansion = indicator(p) - defect_asymptotic_large_T(p, tau);
        const double rel = std::abs(expansion - quad) / quad;
        o.check(rel < last && (tau != 200.0 || rel <= kExpansionRelTol), fmt("tau=%g rel=%.3f", tau, rel));
        last = rel;
    }
}

void criterion_4(Outcome& o) {
    for (double rho : {-0.5, 0.0, 0.5}) {
        const SabrParams p{0.4, 0.8, rho};
        const auto f = sabr_simulate_forward(p, 1.0, {kPaths, sabr_default_steps(1.0), 400 + static_cast<std::uint64_t>(10 * (rho + 1))});
        const double n = static_cast<double>(f.size());
        const double mean = std::accumulate(f.begin(), f.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : f) ss += (x - mean) * (x - mean);
        const double se = std::sqrt(ss / (n - 1.0) / n);
        const double expected = rho > 0.0 ? 1.0 - defect_finite_T(p, 1.0) : 1.0;
        o.check(std::abs(mean - expected) <= kSigmas * se,
                fmt("rho=%g mean=%.5f expected=%.5f se=%.1e", rho, mean, expected, se));
    }
}

void criterion_5(Outcome& o) {
    const SabrParams p{0.2, 0.3, -0.3};
    std::vector<double> strikes;
    for (double k = 70.0; k <= 140.0; k += 10.0) strikes.push_back(k);
    const McConfig mc{kPaths, sabr_default_steps(1.0), 501};
    const auto terminals = sabr_simulate_forward(p, 1.0, mc);
    double worst = 0.0;
    for (double k : strikes) {
        const auto side = k < 100.0 ? OptionSide::Put : OptionSide::Call;
        const auto price = price_from_terminals(terminals, 100.0, k, side, 1.0);
        const double mc_vol = implied_vol(price.value, 100.0, k, 1.0, 1.0, side);
        worst = std::max(worst, std::abs(hagan_implied_vol(p, 100.0, k, 1.0) - mc_vol));
    }
    o.check(worst <= kSmileTol, fmt("max |hagan-mc| over K=70..140 = %.4f", worst));
}

void criterion_6(Outcome& o) {
    const double T = 1.0, r = 0.05;
    double worst = 0.0;
    for (double k : {90.0, 100.0, 110.0}) {
        for (double vol : {0.2, 0.4, 0.6}) {
            const double fd = american_fd_price(100.0, k, T, vol, r, 0.0, OptionSide::Put);
            const double tree = oracle::crr_american(100.0, k, T, vol, r, 0.0, true, 1000);
            worst = std::max(worst, std::abs(fd / tree - 1.0));
        }
    }
    o.check(worst <= kAmericanRelTol, fmt("put grid max rel %.2e", worst));
    double worst_call = 0.0;
    for (double k : {90.0, 100.0, 110.0}) {
        const double eu = black_price(100.0 * std::exp(r * T), k, T, 0.3, std::exp(-r * T), OptionSide::Call);
        const double am = american_fd_price(100.0, k, T, 0.3, r, 0.0, OptionSide::Call);
        worst_call = std::max(worst_call, std::abs(am / eu - 1.0));
    }
    o.check(worst_call <= kZeroCarryRelTol, fmt("zero-carry call max rel %.2e", worst_call));
}

void criterion_7(Outcome& o) {
    using namespace std::chrono;
    const double spot = 100.0, rate = 0.03, carry = 0.025, vol = 0.35;
    ChainSlice c;
    c.spot = spot;
    c.rate = rate;
    c.valuation_date = year{2018} / February / 8;
    c.expiry_date = year{2018} / August / 9;
    c.maturity = act365(c.valuation_date, c.expiry_date);
    const double fwd = spot * std::exp((rate - carry) * c.maturity);
    const double df = std::exp(-rate * c.maturity);
    for (double k = 60.0; k <= 150.0; k += 5.0) {
        for (auto side : {OptionSide::Call, OptionSide::Put}) {
            OptionQuote q;
            q.strike = k;
            q.side = side;
            q.exercise = Exercise::European;
            q.volume = 10;
            q.bid = black_price(fwd, k, c.maturity, vol - 0.002, df, side);
            q.ask = black_price(fwd, k, c.maturity, vol + 0.002, df, side);
            c.quotes.push_back(q);
        }
    }
    const auto fe = estimate_forward_and_carry(c);
    o.check(fe.converged && fe.iterations <= kMaxForwardIterations &&
                std::abs(fe.carry_yield - carry) <= kCarryTol,
            fmt("q=%.6f (true %.3f) after %g iterations", fe.carry_yield, carry, fe.iterations));
}

void criterion_8(Outcome& o) {
    const auto& run = bubble_run();
    const auto& s = run.result.summary;
    o.check(std::abs(s.quantities[3].mean - kTrueIndicator) <= kIndicatorMeanTol,
            fmt("mean A %.4f", s.quantities[3].mean));
    o.check(s.prob_bubble >= kMinBubbleProb, fmt("P(A>0) %.4f", s.prob_bubble));
    o.check(run.seconds <= kEndToEndSeconds, fmt("%.0fs", run.seconds));
}

void criterion_9(Outcome& o) {
    const auto dir = scratch("no_bubble");
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = analyze_pipeline(fixture("no_bubble_chain.csv", dir));
    const double secs = seconds_since(t0);
    o.check(r.summary.prob_bubble <= kMaxNoBubbleProb,
            fmt("P(A>0) %.4f, mean A %.4f", r.summary.prob_bubble, r.summary.quantities[3].mean));
    o.check(secs <= kEndToEndSeconds, fmt("%.0fs", secs));
}

void criterion_10(Outcome& o) {
    const auto& r = bubble_run().result;
    const auto& s = r.summary;
    o.check(s.burn_in == kChainLength / 4 && s.retained == kChainLength - kChainLength / 4,
            fmt("burn-in %g of %g, retained %g", static_cast<double>(s.burn_in),
                static_cast<double>(r.chain.length), static_cast<double>(s.retained)));
    for (std::size_t q = 0; q < 4; ++q) {
        std::vector<double> x;
        for (std::size_t j = static_cast<std::size_t>(s.burn_in); j < r.chain.samples.size(); ++j) {
            const auto& smp = r.chain.samples[j];
            x.push_back(q == 0 ? smp.params.alpha : q == 1 ? smp.params.rho : q == 2 ? smp.params.nu : smp.indicator);
        }
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        const auto& kde = s.quantities[q].kde;
        if (!kde) {
            o.check(false, s.quantities[q].name + " has no KDE");
            continue;
        }
        const double mass = oracle::trapezoid(kde->grid, kde->density);
        const bool h_ok = std::abs(kde->bandwidth - (*hi - *lo) / 15.0) <= 1e-12 * std::max(1.0, *hi - *lo);
        o.check(std::abs(mass - 1.0) <= kKdeMassTol && h_ok,
                s.quantities[q].name + fmt(" mass %.6f", mass));
    }
}

void criterion_11(Outcome& o) {
    const auto& first = bubble_run();
    const auto dir = scratch("bubble_b");
    analyze_pipeline(fixture("bubble_chain.csv", dir));
    const bool trace = slurp(first.dir / "chain.csv") == slurp(dir / "chain.csv");
    const bool summary = slurp(first.dir / "summary.json") == slurp(dir / "summary.json");
    o.check(trace, "chain.csv identical");
    o.check(summary, "summary.json identical");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"closed-form defect vs absorption oracle", criterion_1},
        {"indicator limit at nu^2 T = 200", criterion_2},
        {"large-T expansion accuracy", criterion_3},
        {"martingale property by simulation", criterion_4},
        {"Hagan smile vs Monte Carlo", criterion_5},
        {"American pricer vs binomial tree", criterion_6},
        {"forward and carry estimation", criterion_7},
        {"end-to-end bubble detection", criterion_8},
        {"end-to-end no-bubble case", criterion_9},
        {"summary conventions", criterion_10},
        {"reproducibility", criterion_11},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.check(false, std::string("threw: ") + e.what());
        }
        if (!o.pass) ++failures;
        std::printf("criterion %2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    fs::remove_all(fs::temp_directory_path() / ("defectscope_acceptance_" + std::to_string(::getpid())));
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
