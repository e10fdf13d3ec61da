#pragma once

// ---------------------------------------------------------------------------
// Trading curve of a two-currency pool with concentrated liquidity.
//
// A pool is described by a homogeneous utility u over virtual balances, a
// concentration offset (x*, y*), a proportional fee tau, and initial real
// reserves (x0, y0). The level set of u through the shifted initial point
// defines the implicit curve y = f*(x): the second-currency reserve the pool
// holds when the first-currency reserve is x. All quoting, arbitrage and
// valuation logic reduces to f*, its slope s(x) = -f*'(x) (the marginal
// price of the first currency in units of the second), and the inverse of s.
//
// Reserve domain: x ranges over (-x*, inf) intersected with [0, x_dagger],
// where x_dagger is the reserve at which the second currency runs out.
// Boundary membership: 0 belongs to the domain iff x* > 0, and x_dagger
// belongs iff y* > 0 (otherwise the endpoint is a one-sided limit).
// Unbounded endpoints (x_dagger with y* = 0, the top of the price range with
// x* = 0) are represented by an empty optional, never by a sentinel value.
// ---------------------------------------------------------------------------

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "cfmm/errors.hpp"

namespace cfmm {

// ----------------------------- pool description ---------------------------

enum class UtilityKind {
    ConstantProduct,  // u(x, y) = x * y
    GeometricMean,    // u(x, y) = x^alpha * y^(1 - alpha)
};

struct UtilityFamily {
    UtilityKind kind = UtilityKind::ConstantProduct;
    double alpha = 0.5;  // first-currency weight, GeometricMean only

    static UtilityFamily constant_product() { return {UtilityKind::ConstantProduct, 0.5}; }
    static UtilityFamily geometric_mean(double alpha) { return {UtilityKind::GeometricMean, alpha}; }
};

struct PoolSpec {
    UtilityFamily utility;
    double x_star = 0.0;  // first-currency concentration offset, >= 0
    double y_star = 0.0;  // second-currency concentration offset, >= 0
    double tau = 0.0;     // proportional fee in [0, 1)
    double x0 = 0.0;      // initial first-currency reserve, >= 0
    double y0 = 0.0;      // initial second-currency reserve, >= 0
};

// Derived, immutable facts about the curve. Computed once per spec.
struct CurveGeometry {
    double invariant_const = 0.0;       // u at the shifted initial point (L^2 for ConstantProduct)
    std::optional<double> x_dagger;     // right end of the reserve domain; empty = unbounded (y* = 0)
    double s_lower = 0.0;               // inf of the marginal price over the domain (0 when y* = 0)
    std::optional<double> s_upper;      // sup of the marginal price; empty = unbounded (x* = 0)
};

// ----------------------------- internal helpers ---------------------------

namespace detail {

// u evaluated at virtual balances (both strictly positive)
inline double utility_at(const UtilityFamily& u, double vx, double vy) {
    switch (u.kind) {
        case UtilityKind::ConstantProduct: return vx * vy;
        case UtilityKind::GeometricMean: return std::exp(u.alpha * std::log(vx) + (1.0 - u.alpha) * std::log(vy));
    }
    return 0.0;  // unreachable
}

// second virtual balance solving u(z, f) = c for the given first balance z > 0
inline double level_set(const UtilityFamily& u, double c, double z) {
    switch (u.kind) {
        case UtilityKind::ConstantProduct: return c / z;
        case UtilityKind::GeometricMean: return std::exp((std::log(c) - u.alpha * std::log(z)) / (1.0 - u.alpha));
    }
    return 0.0;  // unreachable
}

// -d(level_set)/dz at z: slope magnitude of the unshifted curve
inline double level_set_slope(const UtilityFamily& u, double c, double z) {
    switch (u.kind) {
        case UtilityKind::ConstantProduct: return c / (z * z);
        case UtilityKind::GeometricMean: {
            const double beta = u.alpha / (1.0 - u.alpha);
            return beta * level_set(u, c, z) / z;
        }
    }
    return 0.0;  // unreachable
}

// d^2(level_set)/dz^2 at z (positive: the curve is convex)
inline double level_set_convexity(const UtilityFamily& u, double c, double z) {
    switch (u.kind) {
        case UtilityKind::ConstantProduct: return 2.0 * c / (z * z * z);
        case UtilityKind::GeometricMean: {
            const double beta = u.alpha / (1.0 - u.alpha);
            return beta * (beta + 1.0) * level_set(u, c, z) / (z * z);
        }
    }
    return 0.0;  // unreachable
}

}  // namespace detail

// ----------------------------- geometry -----------------------------------

// Validates the spec and derives the curve geometry. Throws ConfigError on
// structurally invalid parameters (including the degenerate empty pool
// x0 = y0 = 0, whose price range collapses to a point).
inline CurveGeometry make_geometry(const PoolSpec& spec) {
    const auto bad = [](const std::string& msg) { throw ConfigError("pool spec: " + msg); };
    if (spec.utility.kind == UtilityKind::GeometricMean &&
        !(spec.utility.alpha > 0.0 && spec.utility.alpha < 1.0))
        bad("geometric-mean alpha must lie in (0, 1)");
    if (!(spec.x_star >= 0.0) || !std::isfinite(spec.x_star)) bad("x_star must be >= 0");
    if (!(spec.y_star >= 0.0) || !std::isfinite(spec.y_star)) bad("y_star must be >= 0");
    if (!(spec.tau >= 0.0 && spec.tau < 1.0)) bad("tau must lie in [0, 1)");
    if (!(spec.x0 >= 0.0) || !std::isfinite(spec.x0)) bad("x0 must be >= 0");
    if (!(spec.y0 >= 0.0) || !std::isfinite(spec.y0)) bad("y0 must be >= 0");
    if (!(spec.x0 + spec.x_star > 0.0)) bad("x0 + x_star must be positive");
    if (!(spec.y0 + spec.y_star > 0.0)) bad("y0 + y_star must be positive");
    if (spec.x0 == 0.0 && spec.y0 == 0.0) bad("pool holds no reserves: price range is degenerate");

    CurveGeometry g;
    const UtilityFamily& u = spec.utility;
    g.invariant_const = detail::utility_at(u, spec.x0 + spec.x_star, spec.y0 + spec.y_star);

    if (spec.y_star > 0.0) {
        // z solving level_set(z) = y*: where the second currency runs out
        double z_dag;
        switch (u.kind) {
            case UtilityKind::ConstantProduct: z_dag = g.invariant_const / spec.y_star; break;
            case UtilityKind::GeometricMean:
                z_dag = std::exp((std::log(g.invariant_const) - (1.0 - u.alpha) * std::log(spec.y_star)) / u.alpha);
                break;
            default: z_dag = 0.0;
        }
        g.x_dagger = z_dag - spec.x_star;
        g.s_lower = detail::level_set_slope(u, g.invariant_const, z_dag);
    } else {
        g.x_dagger = std::nullopt;  // reserves never exhaust the second currency
        g.s_lower = 0.0;
    }

    if (spec.x_star > 0.0) {
        g.s_upper = detail::level_set_slope(u, g.invariant_const, spec.x_star);
    } else {
        g.s_upper = std::nullopt;  // marginal price is unbounded as x -> 0+
    }

    if (g.x_dagger && !(*g.x_dagger > 0.0) && spec.x0 == 0.0) {
        // can only happen for degenerate inputs already rejected above; keep as a guard
        bad("reserve domain is empty");
    }
    return g;
}

// ----------------------------- domain & range -----------------------------

// membership of x in the reserve domain, honoring half-open boundary rules
inline bool in_domain(const PoolSpec& spec, const CurveGeometry& geom, double x) {
    if (!std::isfinite(x)) return false;
    if (spec.x_star > 0.0) {
        if (x < 0.0) return false;
    } else {
        if (x <= 0.0) return false;  // 0 excluded: the curve diverges there
    }
    if (geom.x_dagger && x > *geom.x_dagger) return false;
    return true;
}

// membership of p in the attainable marginal-price range s(domain)
inline bool price_in_range(const PoolSpec& spec, const CurveGeometry& geom, double p) {
    if (!std::isfinite(p) || p <= 0.0) return false;
    if (spec.y_star > 0.0) {
        if (p < geom.s_lower) return false;  // attained at x_dagger
    }                                        // y* = 0: inf 0 not attained, any p > 0 passes below
    if (geom.s_upper && p > *geom.s_upper) return false;
    return true;
}

// Projects rounding noise onto the domain boundaries: values within a hair of
// 0 or x_dagger are snapped exactly, everything else is returned unchanged.
// Needed because fee-scaled round trips like x + (1-tau)*((xd - x)/(1-tau))
// land within a few ulp of the boundary rather than on it.
inline double snap_reserve(const PoolSpec& spec, const CurveGeometry& geom, double x) {
    constexpr double kSnap = 1e-12;
    if (spec.x_star > 0.0 && x != 0.0 && std::abs(x) <= kSnap * std::max(1.0, spec.x_star)) return 0.0;
    if (geom.x_dagger) {
        const double xd = *geom.x_dagger;
        if (x != xd && std::abs(x - xd) <= kSnap * std::max(1.0, std::abs(xd))) return xd;
    }
    return x;
}

// ----------------------------- curve evaluation ---------------------------

// f*(x): second-currency reserve on the curve. Throws DomainError outside the domain.
inline double curve_value(const PoolSpec& spec, const CurveGeometry& geom, double x) {
    if (!in_domain(spec, geom, x))
        throw DomainError("curve_value: reserve " + std::to_string(x) + " outside the domain");
    const double y = detail::level_set(spec.utility, geom.invariant_const, x + spec.x_star) - spec.y_star;
    return y > 0.0 ? y : 0.0;  // negative only by rounding at x ~ x_dagger; exact value is >= 0
}

// s(x) = -f*'(x): marginal price of the first currency
inline double marginal_price(const PoolSpec& spec, const CurveGeometry& geom, double x) {
    if (!in_domain(spec, geom, x))
        throw DomainError("marginal_price: reserve " + std::to_string(x) + " outside the domain");
    return detail::level_set_slope(spec.utility, geom.invariant_const, x + spec.x_star);
}

// f*''(x): curve convexity, positive on the whole domain
inline double curve_convexity(const PoolSpec& spec, const CurveGeometry& geom, double x) {
    if (!in_domain(spec, geom, x))
        throw DomainError("curve_convexity: reserve " + std::to_string(x) + " outside the domain");
    return detail::level_set_convexity(spec.utility, geom.invariant_const, x + spec.x_star);
}

// quoted prices after the fee wedge: ask = s/(1-tau), bid = (1-tau)*s
inline std::pair<double, double> ask_bid(const PoolSpec& spec, const CurveGeometry& geom, double x) {
    const double s = marginal_price(spec, geom, x);
    return {s / (1.0 - spec.tau), (1.0 - spec.tau) * s};
}

// u applied to shifted reserves: the swap invariant preserved by fee-free trades
inline double shifted_utility(const PoolSpec& spec, double x, double y) {
    return detail::utility_at(spec.utility, x + spec.x_star, y + spec.y_star);
}

// ----------------------------- price inversion ----------------------------

// s^{-1}(p): reserve at which the marginal price equals p. Requires p in the
// attainable range (RangeError otherwise). ConstantProduct inverts in closed
// form; GeometricMean uses safeguarded bisection (monotone s, unconditional
// convergence) followed by two Newton polish steps to land within ulps.
inline double inverse_marginal_price(const PoolSpec& spec, const CurveGeometry& geom, double p) {
    if (!price_in_range(spec, geom, p))
        throw RangeError("inverse_marginal_price: price " + std::to_string(p) + " outside the attainable range");

    if (spec.utility.kind == UtilityKind::ConstantProduct) {
        const double L = std::sqrt(geom.invariant_const);
        double x = L / std::sqrt(p) - spec.x_star;
        if (spec.x_star > 0.0 && x < 0.0) x = 0.0;                      // p == s_upper up to rounding
        if (geom.x_dagger && x > *geom.x_dagger) x = *geom.x_dagger;    // p == s_lower up to rounding
        return x;
    }

    // GeometricMean: bracket the root, bisect, polish.
    double lo, hi;  // s(lo) >= p >= s(hi)
    if (spec.x_star > 0.0) {
        lo = 0.0;
    } else {
        lo = std::max(spec.x0, 1.0);
        while (marginal_price(spec, geom, lo) < p) lo *= 0.5;  // s -> inf as x -> 0+, terminates
    }
    if (geom.x_dagger) {
        hi = *geom.x_dagger;
    } else {
        hi = std::max(spec.x0, 1.0);
        while (marginal_price(spec, geom, hi) > p) hi *= 2.0;  // s -> 0 as x -> inf, terminates
    }

    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // interval exhausted in floating point
        if (marginal_price(spec, geom, mid) >= p) lo = mid; else hi = mid;
        if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) break;
    }
    double x = 0.5 * (lo + hi);

    // Newton on s(x) - p with analytic slope s'(x) = -f*''(x)
    for (int it = 0; it < 3; ++it) {
        const double fpp = curve_convexity(spec, geom, x);
        double step = (marginal_price(spec, geom, x) - p) / fpp;
        double xn = x + step;
        if (!in_domain(spec, geom, xn)) break;
        x = xn;
    }
    if (spec.x_star > 0.0 && x < 0.0) x = 0.0;
    if (geom.x_dagger && x > *geom.x_dagger) x = *geom.x_dagger;
    return x;
}

}  // namespace cfmm
