#pragma once

// ---------------------------------------------------------------------------
// Valuation, hedging and loss metrics over simulation traces.
//
// The pool's mark-to-market value uses the external price for the first
// currency and counts accrued fees. The conjugate (Legendre) value of the
// curve gives the fee-free pool value as a function of price alone; a
// fee-free pool tracks it exactly.  Hedging metrics reconstruct the PnL of
// shorting the pool's first-currency exposure from the Stieltjes integrals
// booked in the trace.
// ---------------------------------------------------------------------------

#include <cmath>
#include <optional>
#include <vector>

#include "cfmm/curve.hpp"
#include "cfmm/errors.hpp"
#include "cfmm/simulate.hpp"
#include "cfmm/swap.hpp"

namespace cfmm {

inline double pool_value(const PoolState& st, double s_ext) {
    if (!(s_ext > 0.0) || !std::isfinite(s_ext)) throw DomainError("pool_value: price must be positive");
    return st.y + st.y_fee + (st.x + st.x_fee) * s_ext;
}

inline double buyhold_value(const PoolSpec& spec, double s_ext) {
    if (!(s_ext > 0.0) || !std::isfinite(s_ext)) throw DomainError("buyhold_value: price must be positive");
    return spec.y0 + spec.x0 * s_ext;
}

// shortfall of the pool against holding the initial deposit; positive means
// the pool is worth less than the unmanaged portfolio
inline double impermanent_loss(const PoolSpec& spec, const PoolState& st, double s_ext) {
    return buyhold_value(spec, s_ext) - pool_value(st, s_ext);
}

inline double impermanent_loss(const SimulationTrace& trace, std::size_t i) {
    if (i >= trace.steps.size()) throw ConfigError("impermanent_loss: step index out of range");
    const StepRecord& rec = trace.steps[i];
    return impermanent_loss(trace.spec, rec.state, rec.s_ext);
}

struct LegendrePoint {
    double value = 0.0;  // inf over reserves of x * p + curve value
    double x_opt = 0.0;  // minimizing reserve (an endpoint when p is out of range)
};

inline LegendrePoint legendre_value(const PoolSpec& spec, const CurveGeometry& geom, double p) {
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("legendre_value: price must be positive");
    if (geom.s_upper && p >= *geom.s_upper)
        return {curve_value(spec, geom, 0.0), 0.0};  // finite top of range implies x_star > 0
    if (geom.x_dagger && p <= geom.s_lower)
        return {p * *geom.x_dagger, *geom.x_dagger};
    const double x = inverse_marginal_price(spec, geom, p);
    return {x * p + curve_value(spec, geom, x), x};
}

// Cumulative Stieltjes integral of the reserve-plus-fee quantity against the
// external price, in integration-by-parts form,
//   H_i = Q_i S_i - Q_pre S_0 - sum(sdx + sdxf),
// with Q_pre the deposited first-currency amount and the sums taken over the
// booked per-event integrals.  Exact for piecewise-constant integrands.
inline std::vector<double> stieltjes_hedge_pnl(const SimulationTrace& trace) {
    std::vector<double> out;
    out.reserve(trace.steps.size());
    const double s0 = trace.steps.empty() ? 0.0 : trace.steps.front().s_ext;
    double booked = 0.0;
    for (const auto& rec : trace.steps) {
        for (const auto& ev : rec.events) booked += ev.sdx + ev.sdxf;
        const double q = rec.state.x + rec.state.x_fee;
        out.push_back(q * rec.s_ext - trace.spec.x0 * s0 - booked);
    }
    return out;
}

// Hedged account V - H.  With continuous booking and no takers this series
// is constant; taker fees push it up; jump booking pulls it down by each
// arbitrageur's profit.
inline std::vector<double> hedged_value_series(const SimulationTrace& trace) {
    std::vector<double> out = stieltjes_hedge_pnl(trace);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& rec = trace.steps[i];
        out[i] = pool_value(rec.state, rec.s_ext) - out[i];
    }
    return out;
}

// Quadratic loss-versus-rebalancing decomposition of a fee-free trace:
//   rebalancing_wealth_i = V_0 + sum X_k dS_k   (left endpoints),
//   lvr_i = sum 0.5 f''(X_k) (dX_k)^2,
// and rebalancing_wealth_i - V_i approaches lvr_i under grid refinement
// (the gap collects third-order terms and shrinks linearly).
struct LvrDecomposition {
    std::vector<double> rebalancing_wealth;  // self-financing replication wealth
    std::vector<double> lvr;                 // cumulative quadratic loss term
};

inline LvrDecomposition lvr_decomposition(const SimulationTrace& trace) {
    if (trace.spec.tau != 0.0)
        throw ModeError("lvr_decomposition: defined for fee-free pools only");
    LvrDecomposition d;
    const std::size_t n = trace.steps.size();
    d.rebalancing_wealth.assign(n, 0.0);
    d.lvr.assign(n, 0.0);
    if (n == 0) return d;
    d.rebalancing_wealth[0] = pool_value(trace.steps[0].state, trace.steps[0].s_ext);
    for (std::size_t i = 1; i < n; ++i) {
        const auto& prev = trace.steps[i - 1];
        const auto& cur = trace.steps[i];
        const double dx = cur.state.x - prev.state.x;
        d.rebalancing_wealth[i] =
            d.rebalancing_wealth[i - 1] + prev.state.x * (cur.s_ext - prev.s_ext);
        d.lvr[i] = d.lvr[i - 1] +
                   0.5 * curve_convexity(trace.spec, trace.geom, prev.state.x) * dx * dx;
    }
    return d;
}

struct ValuationPoint {
    double time = 0.0;
    double value = 0.0;          // pool holdings plus fees at the external price
    double value_buyhold = 0.0;  // unmanaged initial deposit at the external price
    double il = 0.0;             // value_buyhold - value
    double hedge_pnl = 0.0;      // PnL of the short first-currency hedge
    double hedged_value = 0.0;   // value + hedge_pnl
    std::optional<double> lvr;   // cumulative quadratic loss, fee-free traces only
};

inline std::vector<ValuationPoint> valuation_series(const SimulationTrace& trace) {
    std::optional<LvrDecomposition> dec;
    if (trace.spec.tau == 0.0) dec = lvr_decomposition(trace);
    const std::vector<double> hedged = hedged_value_series(trace);
    std::vector<ValuationPoint> out;
    out.reserve(trace.steps.size());
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& rec = trace.steps[i];
        ValuationPoint p;
        p.time = rec.time;
        p.value = pool_value(rec.state, rec.s_ext);
        p.value_buyhold = buyhold_value(trace.spec, rec.s_ext);
        p.il = p.value_buyhold - p.value;
        p.hedged_value = hedged[i];
        p.hedge_pnl = p.hedged_value - p.value;
        if (dec) p.lvr = dec->lvr[i];
        out.push_back(p);
    }
    return out;
}

}  // namespace cfmm
