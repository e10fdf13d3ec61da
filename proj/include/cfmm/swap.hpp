#pragma once

// ---------------------------------------------------------------------------
// Swap engine: quoting and executing single orders against one pool.
//
// Order sign convention is the taker's first-currency flow: xi > 0 means the
// taker pays xi of the first currency into the pool; xi < 0 means the taker
// withdraws -xi of it. The quoted second-currency flow eta has the same
// convention (eta < 0: pool pays the taker). Fees are charged on the incoming
// side only: for xi > 0 the pool books tau*xi into the first-currency fee
// account and only (1-tau)*xi reaches the reserves; for xi < 0 the taker must
// pay eta = (f*(x+xi) - f*(x))/(1-tau) of which tau*eta is booked as fee.
//
// Feasibility is exactly domain membership of the post-trade reserve
// argument; nothing is partially filled (undersized orders are the caller's
// concern, oversized ones are rejected).
// ---------------------------------------------------------------------------

#include <cmath>
#include <string>

#include "cfmm/curve.hpp"
#include "cfmm/errors.hpp"

namespace cfmm {

struct PoolState {
    double x = 0.0;      // first-currency reserve on the curve
    double y = 0.0;      // second-currency reserve on the curve
    double x_fee = 0.0;  // accumulated first-currency fees (outside the curve)
    double y_fee = 0.0;  // accumulated second-currency fees
};

inline PoolState initial_state(const PoolSpec& spec) { return {spec.x0, spec.y0, 0.0, 0.0}; }

// a taker order together with its quoted counter-flow
struct SwapOrder {
    double xi = 0.0;   // signed first-currency flow, taker's perspective
    double eta = 0.0;  // signed second-currency flow implied by the curve
};

struct SwapReceipt {
    double xi = 0.0;       // order as accepted
    double eta = 0.0;      // quoted second-currency flow
    double delta_x = 0.0;  // reserve change of x (fee excluded)
    double delta_y = 0.0;  // reserve change of y (fee excluded)
    double fee_x = 0.0;    // fee booked in the first currency
    double fee_y = 0.0;    // fee booked in the second currency
    PoolState post_state;
};

namespace detail {

// post-trade reserve argument for an order of size xi (fee-discounted on the way in)
inline double post_reserve(const PoolSpec& spec, const CurveGeometry& geom, const PoolState& st, double xi) {
    const double scale = xi >= 0.0 ? (1.0 - spec.tau) : 1.0;
    return snap_reserve(spec, geom, st.x + scale * xi);
}

}  // namespace detail

// Second-currency flow for an order of size xi against the current state.
// Throws RejectedOrder when the post-trade reserve leaves the domain.
inline double quote(const PoolSpec& spec, const CurveGeometry& geom, const PoolState& st, double xi) {
    if (!std::isfinite(xi)) throw RejectedOrder("quote: order size must be finite");
    if (xi == 0.0) return 0.0;
    const double x_new = detail::post_reserve(spec, geom, st, xi);
    if (!in_domain(spec, geom, x_new))
        throw RejectedOrder("quote: order of size " + std::to_string(xi) +
                            " drives reserves outside the feasible domain");
    const double df = curve_value(spec, geom, x_new) - curve_value(spec, geom, st.x);
    return xi > 0.0 ? df : df / (1.0 - spec.tau);
}

// Executes the order and returns the receipt. The second reserve moves by the
// curve difference, preserving (not re-projecting) any accumulated floating-
// point drift in the invariant.
inline SwapReceipt execute_swap(const PoolSpec& spec, const CurveGeometry& geom, const PoolState& st, double xi) {
    SwapReceipt r;
    r.xi = xi;
    r.eta = quote(spec, geom, st, xi);
    r.post_state = st;
    if (xi == 0.0) return r;

    const double x_new = detail::post_reserve(spec, geom, st, xi);
    const double df = curve_value(spec, geom, x_new) - curve_value(spec, geom, st.x);
    r.delta_x = x_new - st.x;
    if (xi > 0.0) {
        r.delta_y = df;  // = eta (pool pays out the quoted amount)
        r.fee_x = spec.tau * xi;
    } else {
        r.delta_y = df;  // = (1-tau) * eta (fee share of the inflow stays out of reserves)
        r.fee_y = spec.tau * r.eta;
    }
    r.post_state.x = x_new;
    r.post_state.y = st.y + r.delta_y;
    r.post_state.x_fee = st.x_fee + r.fee_x;
    r.post_state.y_fee = st.y_fee + r.fee_y;
    return r;
}

// Second-currency loss of swapping xi and then swapping back to restore the
// taker's first-currency position. Nonnegative; zero exactly when tau = 0.
inline double round_trip_cost(const PoolSpec& spec, const CurveGeometry& geom, const PoolState& st, double xi) {
    const SwapReceipt leg1 = execute_swap(spec, geom, st, xi);
    const double eta2 = quote(spec, geom, leg1.post_state, -xi);
    return leg1.eta + eta2;
}

}  // namespace cfmm
