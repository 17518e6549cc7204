#include "defectscope/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "defectscope/errors.hpp"

namespace defectscope {

namespace {

constexpr double kMinMidPrice = 0.03;
constexpr double kVolAgreement = 1e-3;
constexpr int kForwardIterationCap = 50;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::int64_t> to_int(const std::string& s) {
    std::int64_t v = 0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec == std::errc() && ptr == end) return v;
    // Volumes occasionally arrive as "12.0".
    if (auto d = to_double(s); d && *d == std::floor(*d)) return static_cast<std::int64_t>(*d);
    return std::nullopt;
}

std::optional<std::chrono::year_month_day> to_date(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream ss(s);
    if (!(ss >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-' || !ss.eof()) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

std::string format_date(std::chrono::year_month_day d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                       static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

bool in_the_money(const OptionQuote& q, double forward) {
    return q.side == OptionSide::Call ? q.strike < forward : q.strike > forward;
}

double growth(const ChainSlice& chain, double carry_yield) {
    return std::exp((chain.rate - carry_yield) * chain.maturity);
}

struct QuotePair {
    double strike;
    const OptionQuote* call;
    const OptionQuote* put;
};

std::vector<QuotePair> call_put_pairs(const ChainSlice& chain) {
    std::map<double, QuotePair> by_strike;
    for (const auto& q : chain.quotes) {
        if (!(q.mid() > 0.0)) continue;
        auto& slot = by_strike.try_emplace(q.strike, QuotePair{q.strike, nullptr, nullptr}).first->second;
        auto*& target = q.side == OptionSide::Call ? slot.call : slot.put;
        // Prefer the tighter market when a strike is listed twice.
        if (target == nullptr || (q.ask - q.bid) < (target->ask - target->bid)) target = &q;
    }
    std::vector<QuotePair> pairs;
    for (const auto& [k, p] : by_strike) {
        if (p.call != nullptr && p.put != nullptr) pairs.push_back(p);
    }
    return pairs;
}

// Nearest paired strikes with K_l <= forward < K_u.
std::pair<const QuotePair*, const QuotePair*> bracket(const std::vector<QuotePair>& pairs,
                                                      double forward) {
    const QuotePair* lo = nullptr;
    const QuotePair* hi = nullptr;
    for (const auto& p : pairs) {
        if (p.strike <= forward) lo = &p;
        if (p.strike > forward && hi == nullptr) hi = &p;
    }
    if (lo == nullptr || hi == nullptr) {
        throw NoBracketingStrikes(fmt::format(
            "no call/put strike pair on both sides of the forward {:.6g}", forward));
    }
    return {lo, hi};
}

}  // namespace

double act365(std::chrono::year_month_day from, std::chrono::year_month_day to) {
    const auto days = (std::chrono::sys_days{to} - std::chrono::sys_days{from}).count();
    return static_cast<double>(days) / 365.0;
}

ChainSlice parse_chain_csv(std::istream& in) {
    ChainSlice chain;
    std::optional<double> spot, rate;
    std::optional<std::chrono::year_month_day> valuation, expiry;
    std::vector<std::string> header;
    // Column positions for strike, side, bid, ask, volume, exercise.
    static const std::array<std::string, 6> kColumns = {"strike", "side",   "bid",
                                                        "ask",    "volume", "exercise"};
    std::array<std::size_t, 6> col{};

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const auto eq = text.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = lower(trim(text.substr(1, eq - 1)));
            const std::string value = trim(text.substr(eq + 1));
            if (key == "spot" || key == "rate") {
                const auto v = to_double(value);
                if (!v) throw ParseError(row, key, "not a number: '" + value + "'");
                (key == "spot" ? spot : rate) = *v;
            } else if (key == "valuation" || key == "expiry") {
                const auto d = to_date(value);
                if (!d) throw ParseError(row, key, "expected YYYY-MM-DD, got '" + value + "'");
                (key == "valuation" ? valuation : expiry) = *d;
            }
            continue;
        }

        auto cells = split(text);
        if (header.empty()) {
            for (auto& c : cells) header.push_back(lower(c));
            for (std::size_t i = 0; i < kColumns.size(); ++i) {
                const auto it = std::find(header.begin(), header.end(), kColumns[i]);
                if (it == header.end()) throw ParseError(row, kColumns[i], "missing header column");
                col[i] = static_cast<std::size_t>(it - header.begin());
            }
            continue;
        }
        if (cells.size() != header.size()) {
            throw ParseError(row, "", fmt::format("expected {} fields, found {}", header.size(),
                                                  cells.size()));
        }

        OptionQuote q;
        auto number = [&](std::size_t idx) {
            const auto v = to_double(cells[col[idx]]);
            if (!v) throw ParseError(row, kColumns[idx], "not a number: '" + cells[col[idx]] + "'");
            return *v;
        };
        q.strike = number(0);
        q.bid = number(2);
        q.ask = number(3);
        const auto vol = to_int(cells[col[4]]);
        if (!vol) throw ParseError(row, "volume", "not an integer: '" + cells[col[4]] + "'");
        q.volume = *vol;

        const std::string side = lower(cells[col[1]]);
        if (side == "c") {
            q.side = OptionSide::Call;
        } else if (side == "p") {
            q.side = OptionSide::Put;
        } else {
            throw ParseError(row, "side", "expected C or P, got '" + cells[col[1]] + "'");
        }
        const std::string ex = lower(cells[col[5]]);
        if (ex == "a") {
            q.exercise = Exercise::American;
        } else if (ex == "e") {
            q.exercise = Exercise::European;
        } else {
            throw ParseError(row, "exercise", "expected A or E, got '" + cells[col[5]] + "'");
        }

        if (!(q.strike > 0.0)) throw ParseError(row, "strike", "strike must be positive");
        if (q.bid < 0.0) throw ParseError(row, "bid", "bid must be non-negative");
        if (q.bid > q.ask) throw ParseError(row, "ask", "bid exceeds ask");
        if (q.volume < 0) throw ParseError(row, "volume", "volume must be non-negative");
        chain.quotes.push_back(q);
    }

    if (!spot) throw MissingMetadata("chain file lacks #spot");
    if (!rate) throw MissingMetadata("chain file lacks #rate");
    if (!valuation) throw MissingMetadata("chain file lacks #valuation");
    if (!expiry) throw MissingMetadata("chain file lacks #expiry");
    if (header.empty()) throw ParseError(row, "", "missing header row");
    if (!(*spot > 0.0)) throw ParseError(0, "spot", "spot must be positive");

    chain.spot = *spot;
    chain.rate = *rate;
    chain.valuation_date = *valuation;
    chain.expiry_date = *expiry;
    chain.maturity = act365(*valuation, *expiry);
    if (!(chain.maturity > 0.0)) throw ParseError(0, "expiry", "expiry must follow valuation date");
    if (chain.quotes.empty()) throw ParseError(row, "", "chain has no quotes");
    return chain;
}

void write_chain_csv(std::ostream& out, const ChainSlice& chain) {
    out << fmt::format("#spot={}\n#rate={}\n#valuation={}\n#expiry={}\n", chain.spot, chain.rate,
                       format_date(chain.valuation_date), format_date(chain.expiry_date));
    out << "strike,side,bid,ask,volume,exercise\n";
    for (const auto& q : chain.quotes) {
        out << fmt::format("{},{},{},{},{},{}\n", q.strike, to_string(q.side), q.bid, q.ask,
                           q.volume, q.exercise == Exercise::American ? "A" : "E");
    }
}

ChainSlice drop_zero_volume(const ChainSlice& chain) {
    ChainSlice out = chain;
    std::erase_if(out.quotes, [](const OptionQuote& q) { return q.volume <= 0; });
    return out;
}

std::vector<std::size_t> longest_monotone_subsequence(std::span<const double> values,
                                                      bool non_increasing,
                                                      std::span<const double> distance) {
    const std::size_t n = values.size();
    if (distance.size() != n) throw InvalidArgument("longest_monotone_subsequence: size mismatch");
    if (n == 0) return {};

    auto fits = [&](std::size_t i, std::size_t j) {  // j may follow i
        return non_increasing ? values[j] <= values[i] : values[j] >= values[i];
    };
    enum class Mark { Free, Required, Forbidden };
    std::vector<Mark> mark(n, Mark::Free);

    // Longest admissible chain that contains every Required element; fills
    // `pred` for reconstruction and returns (length, last index).
    std::vector<std::ptrdiff_t> pred(n);
    auto solve = [&]() -> std::pair<std::size_t, std::ptrdiff_t> {
        std::vector<std::size_t> best(n, 0);
        std::size_t first_required = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (mark[i] == Mark::Required) {
                first_required = i;
                break;
            }
        }
        std::size_t top = 0;
        std::ptrdiff_t top_end = -1;
        std::size_t last_required_seen = n;  // latest required index < i
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = -1;
            if (mark[i] != Mark::Forbidden) {
                if (i <= first_required) best[i] = 1;
                for (std::size_t j = 0; j < i; ++j) {
                    if (best[j] == 0 || !fits(j, i)) continue;
                    // No required element may be skipped between j and i.
                    if (last_required_seen != n && last_required_seen > j) continue;
                    if (best[j] + 1 > best[i]) {
                        best[i] = best[j] + 1;
                        pred[i] = static_cast<std::ptrdiff_t>(j);
                    }
                }
            }
            if (mark[i] == Mark::Required) last_required_seen = i;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (best[i] == 0) continue;
            const bool covers_tail = last_required_seen == n || i >= last_required_seen;
            if (covers_tail && best[i] > top) {
                top = best[i];
                top_end = static_cast<std::ptrdiff_t>(i);
            }
        }
        return {top, top_end};
    };

    const std::size_t target = solve().first;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distance[a] < distance[b]; });
    for (std::size_t idx : order) {
        mark[idx] = Mark::Required;
        if (solve().first != target) mark[idx] = Mark::Forbidden;
    }

    auto [len, end] = solve();
    std::vector<std::size_t> picked;
    picked.reserve(len);
    for (std::ptrdiff_t i = end; i >= 0; i = pred[static_cast<std::size_t>(i)]) {
        picked.push_back(static_cast<std::size_t>(i));
    }
    std::reverse(picked.begin(), picked.end());
    return picked;
}

ChainSlice filter_liquidity(const ChainSlice& chain, double forward_guess) {
    if (!(forward_guess > 0.0)) throw InvalidArgument("filter_liquidity: forward_guess must be positive");
    ChainSlice out = drop_zero_volume(chain);
    std::erase_if(out.quotes, [&](const OptionQuote& q) { return in_the_money(q, forward_guess); });
    std::erase_if(out.quotes, [](const OptionQuote& q) { return q.mid() < kMinMidPrice; });

    std::vector<OptionQuote> kept;
    for (OptionSide side : {OptionSide::Call, OptionSide::Put}) {
        std::vector<OptionQuote> leg;
        for (const auto& q : out.quotes) {
            if (q.side == side) leg.push_back(q);
        }
        std::stable_sort(leg.begin(), leg.end(),
                         [](const OptionQuote& a, const OptionQuote& b) { return a.strike < b.strike; });
        std::vector<double> mids, dist;
        for (const auto& q : leg) {
            mids.push_back(q.mid());
            dist.push_back(std::abs(q.strike - forward_guess));
        }
        for (std::size_t i : longest_monotone_subsequence(mids, side == OptionSide::Call, dist)) {
            kept.push_back(leg[i]);
        }
    }
    std::stable_sort(kept.begin(), kept.end(), [](const OptionQuote& a, const OptionQuote& b) {
        return a.strike < b.strike || (a.strike == b.strike && a.side < b.side);
    });
    if (kept.empty()) throw EmptyAfterFilter("no quotes survive the liquidity filters");
    out.quotes = std::move(kept);
    return out;
}

double quote_model_price(const OptionQuote& quote, const ChainSlice& chain, double carry_yield,
                         double vol, const FdGrid& grid) {
    if (quote.exercise == Exercise::European) {
        return black_price(chain.spot * growth(chain, carry_yield), quote.strike, chain.maturity, vol,
                           std::exp(-chain.rate * chain.maturity), quote.side);
    }
    return american_fd_price(chain.spot, quote.strike, chain.maturity, vol, chain.rate, carry_yield,
                             quote.side, grid);
}

double quote_implied_vol(double price, const OptionQuote& quote, const ChainSlice& chain,
                         double carry_yield, const FdGrid& grid) {
    if (quote.exercise == Exercise::European) {
        return implied_vol(price, chain.spot * growth(chain, carry_yield), quote.strike,
                           chain.maturity, std::exp(-chain.rate * chain.maturity), quote.side);
    }
    return american_implied_vol(price, chain.spot, quote.strike, chain.maturity, chain.rate,
                                carry_yield, quote.side, grid);
}

ForwardEstimate estimate_forward_and_carry(const ChainSlice& chain, double q_init,
                                           const FdGrid& grid) {
    const auto pairs = call_put_pairs(chain);
    const double T = chain.maturity;
    const double discount = std::exp(-chain.rate * T);

    struct Leg {
        const QuotePair* pair;
        std::optional<double> call_vol;
        std::optional<double> put_vol;
    };
    auto vols_at = [&](double q) {
        const auto [lo, hi] = bracket(pairs, chain.spot * growth(chain, q));
        std::array<Leg, 2> legs{Leg{lo, {}, {}}, Leg{hi, {}, {}}};
        for (auto& leg : legs) {
            try {
                leg.call_vol = quote_implied_vol(leg.pair->call->mid(), *leg.pair->call, chain, q, grid);
                leg.put_vol = quote_implied_vol(leg.pair->put->mid(), *leg.pair->put, chain, q, grid);
            } catch (const OutOfBounds&) {
                // Mid outside the bounds implied by the current carry guess.
                leg.call_vol.reset();
                leg.put_vol.reset();
            }
        }
        return legs;
    };
    auto disagreement = [](const std::array<Leg, 2>& legs) {
        double worst = 0.0;
        for (const auto& leg : legs) {
            if (!leg.call_vol || !leg.put_vol) return std::numeric_limits<double>::infinity();
            worst = std::max(worst, std::abs(*leg.call_vol - *leg.put_vol));
        }
        return worst;
    };

    ForwardEstimate fe;
    ForwardEstimate best;
    double best_gap = std::numeric_limits<double>::infinity();
    double q = q_init;
    auto legs = vols_at(q);
    for (int it = 1; it <= kForwardIterationCap; ++it) {
        const double f_q = chain.spot * growth(chain, q);
        double sum = 0.0;
        for (const auto& leg : legs) {
            const double k = leg.pair->strike;
            double call_e = 0.0;
            double put_e = 0.0;
            if (leg.call_vol && leg.put_vol) {
                call_e = black_price(f_q, k, T, *leg.call_vol, discount, OptionSide::Call);
                put_e = black_price(f_q, k, T, *leg.put_vol, discount, OptionSide::Put);
            } else {
                // Fall back to parity on the raw mids for this iteration.
                call_e = leg.pair->call->mid();
                put_e = leg.pair->put->mid();
            }
            sum += (call_e - put_e) / discount + k;
        }
        const double forward = 0.5 * sum;
        if (!(forward > 0.0)) throw NoConvergence("estimate_forward_and_carry: non-positive forward");
        q = std::log(chain.spot / (forward * discount)) / T;

        fe.forward = forward;
        fe.carry_yield = q;
        fe.iterations = it;
        legs = vols_at(q);
        const double gap = disagreement(legs);
        if (gap < kVolAgreement) {
            fe.converged = true;
            return fe;
        }
        if (gap < best_gap || best.iterations == 0) {
            best_gap = gap;
            best = fe;
        }
    }
    // Not converged: report the iterate with the closest call/put vols.
    best.iterations = fe.iterations;
    return best;
}

VolObservationSet quotes_to_vol_observations(const ChainSlice& chain, const ForwardEstimate& fe,
                                             const FdGrid& grid,
                                             const std::map<double, double>& spread_overrides) {
    VolObservationSet result;
    for (const auto& q : chain.quotes) {
        double bid_vol = 0.0;
        double ask_vol = 0.0;
        try {
            bid_vol = quote_implied_vol(q.bid, q, chain, fe.carry_yield, grid);
            ask_vol = quote_implied_vol(q.ask, q, chain, fe.carry_yield, grid);
        } catch (const Error& e) {
            result.dropped.push_back({q.strike, q.side, e.what()});
            continue;
        }
        double multiplier = 1.0;
        for (const auto& [k, m] : spread_overrides) {
            if (std::abs(k - q.strike) <= 1e-9 * std::max(1.0, std::abs(k))) multiplier = m;
        }
        result.observations.push_back(
            {q.strike, 0.5 * (bid_vol + ask_vol), (ask_vol - bid_vol) * multiplier, q.side});
    }
    std::stable_sort(result.observations.begin(), result.observations.end(),
                     [](const VolObservation& a, const VolObservation& b) { return a.strike < b.strike; });
    // One observation per strike: a call and a put survive together only at
    // K == forward guess. Keep the tighter market.
    std::vector<VolObservation> unique;
    for (const auto& o : result.observations) {
        if (!unique.empty() && unique.back().strike == o.strike) {
            VolObservation& kept = unique.back();
            const VolObservation& loser = o.spread_vol < kept.spread_vol ? kept : o;
            result.dropped.push_back({loser.strike, loser.side, "duplicate strike"});
            if (o.spread_vol < kept.spread_vol) kept = o;
            continue;
        }
        unique.push_back(o);
    }
    result.observations = std::move(unique);
    return result;
}

void write_vol_observations_csv(std::ostream& out, const VolObservationFile& file) {
    out << fmt::format("#forward={}\n#maturity={}\n", file.forward, file.maturity);
    out << "strike,side,mid_vol,spread_vol\n";
    for (const auto& o : file.observations) {
        out << fmt::format("{},{},{},{}\n", o.strike, to_string(o.side), o.mid_vol, o.spread_vol);
    }
}

VolObservationFile read_vol_observations_csv(std::istream& in) {
    VolObservationFile file;
    std::optional<double> forward, maturity;
    bool header_seen = false;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const auto eq = text.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = lower(trim(text.substr(1, eq - 1)));
            const auto v = to_double(trim(text.substr(eq + 1)));
            if ((key == "forward" || key == "maturity") && !v) throw ParseError(row, key, "not a number");
            if (key == "forward") forward = v;
            if (key == "maturity") maturity = v;
            continue;
        }
        const auto cells = split(text);
        if (!header_seen) {
            if (cells.size() != 4 || lower(cells[0]) != "strike") {
                throw ParseError(row, "", "expected header strike,side,mid_vol,spread_vol");
            }
            header_seen = true;
            continue;
        }
        if (cells.size() != 4) throw ParseError(row, "", "expected 4 fields");
        VolObservation o;
        const auto k = to_double(cells[0]);
        const auto m = to_double(cells[2]);
        const auto s = to_double(cells[3]);
        if (!k) throw ParseError(row, "strike", "not a number");
        if (!m || !(*m > 0.0)) throw ParseError(row, "mid_vol", "must be a positive number");
        if (!s || *s < 0.0) throw ParseError(row, "spread_vol", "must be a non-negative number");
        const std::string side = lower(cells[1]);
        if (side != "c" && side != "p") throw ParseError(row, "side", "expected C or P");
        o.strike = *k;
        o.side = side == "c" ? OptionSide::Call : OptionSide::Put;
        o.mid_vol = *m;
        o.spread_vol = *s;
        file.observations.push_back(o);
    }
    if (!forward) throw MissingMetadata("vol file lacks #forward");
    if (!maturity) throw MissingMetadata("vol file lacks #maturity");
    if (file.observations.empty()) throw ParseError(row, "", "vol file has no observations");
    file.forward = *forward;
    file.maturity = *maturity;
    return file;
}

}  // namespace defectscope
