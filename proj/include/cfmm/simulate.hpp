#pragma once

// ---------------------------------------------------------------------------
// Reserve dynamics driven by an external price path.
//
// At every grid time the pool is exposed to optimal arbitrage against the
// external price, and optionally to taker orders; each taker order is
// followed immediately by its own restoring arbitrage.  The per-event
// Stieltjes integrals of the external price against reserve flow (sdx) and
// against fee accrual (sdxf) are booked so that valuation and hedging
// metrics can be reconstructed exactly from the trace.
//
// Two booking modes:
//   Continuous - the price is interpreted as moving continuously between
//     grid points, so an arbitrage triggered by a price move rides the
//     marginal quote; the integrals have closed forms in the curve value.
//   Jump - the price jumps to its new value first and the whole trade is
//     executed at that price; integrals are price * increment.
// Taker orders and their restoring arbitrages are always atomic events.
// ---------------------------------------------------------------------------

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cfmm/arbitrage.hpp"
#include "cfmm/curve.hpp"
#include "cfmm/errors.hpp"
#include "cfmm/price_path.hpp"
#include "cfmm/reflection.hpp"
#include "cfmm/swap.hpp"

namespace cfmm {

enum class StepMode {
    Continuous,  // price moves through the band; arbitrage rides the quote
    Jump,        // price jumps; arbitrage executes wholly at the new price
};

enum class EventSource {
    IntervalArb,  // arbitrage triggered by the price move over the interval
    Taker,        // exogenous taker order
    RestoreArb,   // arbitrage restoring the band right after a taker order
};

struct TakerOrder {
    double time = 0.0;  // must land on a grid time
    double xi = 0.0;    // order size in the first currency, taker convention
};

struct TradeEvent {
    EventSource source = EventSource::IntervalArb;
    ArbKind kind = ArbKind::NoTrade;  // NoTrade for taker events
    double xi = 0.0;                  // order size, taker convention
    double eta = 0.0;                 // second-currency counterpart
    double delta_x = 0.0;             // reserve changes
    double delta_y = 0.0;
    double fee_x = 0.0;
    double fee_y = 0.0;
    double sdx = 0.0;   // booked integral of external price against d(reserve x)
    double sdxf = 0.0;  // booked integral of external price against d(fee x)
};

// Split of the cumulative first-currency reserve flow by counterparty; the
// reserve satisfies x = x0 + x_taker + x_arb at every grid time.
struct FlowDecomposition {
    double x_taker = 0.0;  // cumulative reserve-x flow from taker events
    double x_arb = 0.0;    // cumulative reserve-x flow from arbitrage events
};

struct StepRecord {
    double time = 0.0;
    double s_ext = 0.0;     // external price at this grid time
    PoolState state;        // pool state after all events of the step
    double ask = 0.0;       // post-step quotes
    double bid = 0.0;
    bool at_boundary = false;   // reserve pinned at 0 or at the domain cap
    SkorokhodState skorokhod;   // log-band coordinates of the reflection picture
    FlowDecomposition flow;     // cumulative taker/arbitrage reserve flows
    std::vector<TradeEvent> events;
};

struct SimulationTrace {
    PoolSpec spec;
    CurveGeometry geom;
    StepMode mode = StepMode::Continuous;
    double band = 0.0;  // -2 log(1 - tau), width of the log no-trade band
    std::vector<StepRecord> steps;
};

namespace detail {

// Book the Stieltjes integrals for one arbitrage event.  On a continuous
// ride the external price follows the pool quote, so the integrals reduce
// to differences of the curve value; on an atomic event the whole increment
// trades at the quoted external price.
inline void book_arbitrage(const PoolSpec& spec, const CurveGeometry& geom, double s_ext,
                           double x_pre, const SwapReceipt& receipt, bool ride, TradeEvent& ev) {
    ev.delta_x = receipt.delta_x;
    ev.delta_y = receipt.delta_y;
    ev.fee_x = receipt.fee_x;
    ev.fee_y = receipt.fee_y;
    if (!ride) {
        ev.sdx = s_ext * receipt.delta_x;
        ev.sdxf = s_ext * receipt.fee_x;
        return;
    }
    const double x_post = x_pre + receipt.delta_x;
    const double gap = curve_value(spec, geom, x_pre) - curve_value(spec, geom, x_post);
    if (receipt.delta_x < 0.0) {
        // price rose: ride the ask, no fee accrues in the first currency
        ev.sdx = gap / (1.0 - spec.tau);
        ev.sdxf = 0.0;
    } else {
        // price fell: ride the bid while fees accrue in the first currency
        ev.sdx = (1.0 - spec.tau) * gap;
        ev.sdxf = spec.tau * gap;
    }
}

inline std::size_t grid_index(const std::vector<double>& times, double t) {
    // takers must land on the simulation grid; binary search with a relative
    // tolerance absorbs decimal-to-binary noise in configuration files
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    auto it = std::lower_bound(times.begin(), times.end(), t - tol);
    if (it == times.end() || std::abs(*it - t) > tol)
        throw ConfigError("taker order at t=" + std::to_string(t) + " is off the time grid");
    return static_cast<std::size_t>(it - times.begin());
}

}  // namespace detail

inline SimulationTrace simulate_reserves(const PoolSpec& spec, const CurveGeometry& geom,
                                         const PricePath& path,
                                         std::span<const TakerOrder> taker_flow = {},
                                         StepMode mode = StepMode::Continuous) {
    if (path.times.size() != path.prices.size() || path.times.empty())
        throw ConfigError("simulate_reserves: malformed price path");
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        if (!(path.prices[i] > 0.0)) throw ConfigError("simulate_reserves: nonpositive price");
        if (i > 0 && !(path.times[i] > path.times[i - 1]))
            throw ConfigError("simulate_reserves: times must increase strictly");
    }
    // map takers onto grid steps
    std::vector<std::vector<double>> taker_at(path.times.size());
    double prev_time = -std::numeric_limits<double>::infinity();
    for (const TakerOrder& o : taker_flow) {
        if (o.time < prev_time) throw ConfigError("simulate_reserves: taker orders must be sorted by time");
        prev_time = o.time;
        if (!std::isfinite(o.xi) || o.xi == 0.0)
            throw ConfigError("simulate_reserves: taker size must be finite and nonzero");
        taker_at[detail::grid_index(path.times, o.time)].push_back(o.xi);
    }

    SimulationTrace trace;
    trace.spec = spec;
    trace.geom = geom;
    trace.mode = mode;
    trace.band = -2.0 * std::log1p(-spec.tau);

    PoolState st = initial_state(spec);
    PoolSpec work = spec;  // reserves updated in place so geometry stays shared
    double x_taker_cum = 0.0, x_arb_cum = 0.0;
    double s_anchor = 0.0;  // marginal price after the opening alignment

    const bool ride = (mode == StepMode::Continuous);
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        const double s_ext = path.prices[i];
        StepRecord rec;
        rec.time = path.times[i];
        rec.s_ext = s_ext;

        auto run_arb = [&](EventSource src, bool as_ride) {
            work.x0 = st.x;
            work.y0 = st.y;
            const ArbitrageDecision dec = optimal_arbitrage(work, geom, st, s_ext);
            if (dec.kind == ArbKind::NoTrade) return;
            TradeEvent ev;
            ev.source = src;
            ev.kind = dec.kind;
            ev.xi = dec.xi_star;
            ev.eta = dec.eta_star;
            const SwapReceipt receipt = apply_arbitrage(work, geom, st, dec);
            detail::book_arbitrage(work, geom, s_ext, st.x, receipt, as_ride, ev);
            x_arb_cum += receipt.delta_x;
            st = receipt.post_state;
            rec.events.push_back(ev);
        };

        // the opening step aligns the pool with the initial price; afterwards
        // each step starts with the arbitrage caused by the interval's move
        run_arb(EventSource::IntervalArb, i > 0 && ride);

        for (double xi : taker_at[i]) {
            work.x0 = st.x;
            work.y0 = st.y;
            const SwapReceipt receipt = execute_swap(work, geom, st, xi);
            TradeEvent ev;
            ev.source = EventSource::Taker;
            ev.xi = receipt.xi;
            ev.eta = receipt.eta;
            ev.delta_x = receipt.delta_x;
            ev.delta_y = receipt.delta_y;
            ev.fee_x = receipt.fee_x;
            ev.fee_y = receipt.fee_y;
            ev.sdx = s_ext * receipt.delta_x;
            ev.sdxf = s_ext * receipt.fee_x;
            x_taker_cum += receipt.delta_x;
            st = receipt.post_state;
            rec.events.push_back(ev);
            run_arb(EventSource::RestoreArb, false);
        }

        if (i == 0) s_anchor = marginal_price(spec, geom, st.x);

        const double s_pool = marginal_price(spec, geom, st.x);
        rec.state = st;
        const auto quotes = ask_bid(spec, geom, st.x);
        rec.ask = quotes.first;
        rec.bid = quotes.second;
        rec.at_boundary = (st.x == 0.0) || (geom.x_dagger && st.x == *geom.x_dagger);
        rec.skorokhod.psi = std::log(s_ext) - std::log(s_anchor) - std::log1p(-spec.tau);
        rec.skorokhod.phi = std::log(s_ext) - std::log(s_pool) - std::log1p(-spec.tau);
        rec.skorokhod.eta_reg = std::log(s_anchor) - std::log(s_pool);
        rec.skorokhod.band_width = trace.band;
        rec.flow.x_taker = x_taker_cum;
        rec.flow.x_arb = x_arb_cum;
        trace.steps.push_back(std::move(rec));
    }
    return trace;
}

}  // namespace cfmm
