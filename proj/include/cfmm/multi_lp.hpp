#pragma once

// ---------------------------------------------------------------------------
// Order routing across several pools quoting the same pair.
//
// A taker order is split so that the total second-currency cost is minimal.
// The split is characterized by a uniform marginal execution rate lambda:
// every pool either trades until its quote reaches lambda, stops at a
// reserve cap, or sits parked because lambda falls inside its bid/ask band.
// The per-pool response is monotone in lambda, so the budget equation is
// solved by bisection.  Incoherent quotes across pools are exploited
// automatically (one pool may be bought from while another is sold to).
//
// For constant-product pools sharing one price range, the whole set is
// equivalent to a single pool whose scale is the sum of the subpool scales;
// aggregate_cpmm builds that pool and the allocator splits orders across the
// subpools in proportion to scale.
// ---------------------------------------------------------------------------

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cfmm/arbitrage.hpp"
#include "cfmm/curve.hpp"
#include "cfmm/errors.hpp"
#include "cfmm/simulate.hpp"
#include "cfmm/swap.hpp"

namespace cfmm {

struct Subpool {
    PoolSpec spec;
    CurveGeometry geom;
    PoolState state;
};

inline Subpool make_subpool(const PoolSpec& spec) {
    return Subpool{spec, make_geometry(spec), initial_state(spec)};
}

struct SubpoolSet {
    std::vector<Subpool> pools;
};

// Mixed fee tiers are allowed; order allocation prices each pool with its
// own fee.  The aggregation helpers below additionally require one shared
// fee rate.
inline SubpoolSet make_subpool_set(std::span<const PoolSpec> specs) {
    if (specs.empty()) throw ConfigError("subpool set needs at least one pool");
    SubpoolSet set;
    for (const PoolSpec& s : specs) set.pools.push_back(make_subpool(s));
    return set;
}

struct AllocationResult {
    double xi = 0.0;         // requested order
    double eta_total = 0.0;  // taker's total second-currency flow
    double lambda = 0.0;     // uniform marginal execution rate (0 for brute force)
    std::vector<double> xi_parts;                    // split of the order, one per pool
    std::vector<SwapReceipt> per_subpool_receipts;   // aligned with xi_parts
};

namespace detail {

// Reserve the pool moves to when trading until its quote meets lambda.
inline double response_reserve(const Subpool& p, double lambda) {
    const double tau = p.spec.tau;
    const auto [ask, bid] = ask_bid(p.spec, p.geom, p.state.x);
    if (lambda < bid) {  // taker sells x to this pool until the bid falls to lambda
        const double target = lambda / (1.0 - tau);
        if (p.geom.x_dagger && target <= p.geom.s_lower) return *p.geom.x_dagger;
        return inverse_marginal_price(p.spec, p.geom, target);
    }
    if (lambda > ask) {  // taker buys x from this pool until the ask rises to lambda
        const double target = (1.0 - tau) * lambda;
        if (p.geom.s_upper && target >= *p.geom.s_upper) return 0.0;
        return inverse_marginal_price(p.spec, p.geom, target);
    }
    return p.state.x;  // parked: lambda sits inside the pool's quote band
}

// Order size that produces the response reserve (fee-scaled on the sell side).
inline double response_part(const Subpool& p, double lambda) {
    const double x1 = response_reserve(p, lambda);
    const double dx = x1 - p.state.x;
    return dx > 0.0 ? dx / (1.0 - p.spec.tau) : dx;
}

inline double total_response(const SubpoolSet& set, double lambda) {
    double sum = 0.0;
    for (const Subpool& p : set.pools) sum += response_part(p, lambda);
    return sum;
}

}  // namespace detail

// Splits the order, executes every nonzero part, and commits the post states.
inline AllocationResult allocate_order(SubpoolSet& set, double xi) {
    if (set.pools.empty()) throw ConfigError("allocate_order: empty pool set");
    if (!std::isfinite(xi) || xi == 0.0) throw ConfigError("allocate_order: order must be finite and nonzero");

    // capacity screen: a bounded set cannot absorb more than its caps
    if (xi > 0.0) {
        bool bounded = true;
        double cap = 0.0;
        for (const Subpool& p : set.pools) {
            if (!p.geom.x_dagger) { bounded = false; break; }
            cap += (*p.geom.x_dagger - p.state.x) / (1.0 - p.spec.tau);
        }
        if (bounded && xi > cap)
            throw RejectedOrder("allocate_order: order exceeds the joint capacity");
    } else {
        double cap = 0.0;
        for (const Subpool& p : set.pools) cap -= p.state.x;
        bool reachable = true;
        for (const Subpool& p : set.pools) reachable = reachable && p.spec.x_star > 0.0;
        if (xi < cap || (xi == cap && !reachable))
            throw RejectedOrder("allocate_order: order exceeds the joint reserves");
    }

    // bracket the rate: the total response falls as lambda rises
    double lo = std::numeric_limits<double>::infinity();   // small lambda: response >= xi
    double hi = 0.0;                                       // large lambda: response <= xi
    for (const Subpool& p : set.pools) {
        const auto [ask, bid] = ask_bid(p.spec, p.geom, p.state.x);
        lo = std::min(lo, bid);
        hi = std::max(hi, ask);
    }
    while (detail::total_response(set, lo) < xi) {
        lo *= 0.5;
        if (lo < 1e-300) break;  // capacity screen above makes this unreachable
    }
    while (detail::total_response(set, hi) > xi) {
        hi *= 2.0;
        if (hi > 1e300) break;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (detail::total_response(set, mid) >= xi) lo = mid; else hi = mid;
        if (hi - lo <= 1e-14 * hi) break;
    }
    const double lambda = 0.5 * (lo + hi);

    AllocationResult res;
    res.xi = xi;
    res.lambda = lambda;
    res.xi_parts.resize(set.pools.size());
    for (std::size_t i = 0; i < set.pools.size(); ++i)
        res.xi_parts[i] = detail::response_part(set.pools[i], lambda);

    // absorb the bisection residual in the largest part so the split sums
    // exactly to the order; prefer a part that is not pinned at a reserve cap
    double residual = xi;
    for (double part : res.xi_parts) residual -= part;
    std::size_t host = 0;
    bool host_free = false;
    for (std::size_t i = 0; i < res.xi_parts.size(); ++i) {
        const double x1 = detail::response_reserve(set.pools[i], lambda);
        const bool free = x1 > 0.0 && (!set.pools[i].geom.x_dagger || x1 < *set.pools[i].geom.x_dagger);
        if ((free && !host_free) ||
            (free == host_free && std::abs(res.xi_parts[i]) > std::abs(res.xi_parts[host]))) {
            host = i;
            host_free = free;
        }
    }
    res.xi_parts[host] += residual;

    // quote every part first, then commit: either all legs land or none do
    res.per_subpool_receipts.resize(set.pools.size());
    for (std::size_t i = 0; i < set.pools.size(); ++i) {
        const Subpool& p = set.pools[i];
        if (res.xi_parts[i] == 0.0) {
            res.per_subpool_receipts[i].post_state = p.state;
            continue;
        }
        res.per_subpool_receipts[i] = execute_swap(p.spec, p.geom, p.state, res.xi_parts[i]);
        res.eta_total += res.per_subpool_receipts[i].eta;
    }
    for (std::size_t i = 0; i < set.pools.size(); ++i)
        set.pools[i].state = res.per_subpool_receipts[i].post_state;
    return res;
}

// Exhaustive-search oracle for small sets: the split with the least total
// second-currency flow over a grid of feasible allocations.  Read-only; the
// receipts are quotes against the current states.
inline AllocationResult allocate_bruteforce(const SubpoolSet& set, double xi, int grid = 400) {
    const std::size_t n = set.pools.size();
    if (n == 0 || n > 3) throw ConfigError("allocate_bruteforce: supports one to three pools");
    if (grid < 1) throw ConfigError("allocate_bruteforce: grid must be positive");
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Subpool& p = set.pools[i];
        lo[i] = -p.state.x;
        hi[i] = p.geom.x_dagger
                    ? (*p.geom.x_dagger - p.state.x) / (1.0 - p.spec.tau)
                    : std::max(1.0, std::abs(xi)) * 8.0;
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_parts;
    auto cost_of = [&](const Subpool& p, double part) {
        if (part == 0.0) return 0.0;
        return quote(p.spec, p.geom, p.state, part);
    };
    auto try_split = [&](std::span<const double> parts) {
        for (std::size_t i = 0; i < n; ++i)
            if (parts[i] < lo[i] || parts[i] > hi[i]) return;
        double total = 0.0;
        try {
            for (std::size_t i = 0; i < n; ++i) total += cost_of(set.pools[i], parts[i]);
        } catch (const RejectedOrder&) {
            return;  // a grid point can sit a rounding step outside a pool's domain
        }
        if (total < best) {
            best = total;
            best_parts.assign(parts.begin(), parts.end());
        }
    };
    if (n == 1) {
        const double parts[1] = {xi};
        try_split(parts);
    } else if (n == 2) {
        const double a = std::max(lo[0], xi - hi[1]);
        const double b = std::min(hi[0], xi - lo[1]);
        for (int k = 0; k <= grid; ++k) {
            const double p0 = a + (b - a) * k / grid;
            const double parts[2] = {p0, xi - p0};
            try_split(parts);
        }
    } else {
        for (int k0 = 0; k0 <= grid; ++k0) {
            const double p0 = lo[0] + (hi[0] - lo[0]) * k0 / grid;
            const double a = std::max(lo[1], xi - p0 - hi[2]);
            const double b = std::min(hi[1], xi - p0 - lo[2]);
            if (a > b) continue;
            for (int k1 = 0; k1 <= grid; ++k1) {
                const double p1 = a + (b - a) * k1 / grid;
                const double parts[3] = {p0, p1, xi - p0 - p1};
                try_split(parts);
            }
        }
    }
    if (best_parts.empty()) throw RejectedOrder("allocate_bruteforce: no feasible split on the grid");
    AllocationResult res;
    res.xi = xi;
    res.eta_total = best;
    res.xi_parts = best_parts;
    res.per_subpool_receipts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Subpool& p = set.pools[i];
        if (best_parts[i] == 0.0) res.per_subpool_receipts[i].post_state = p.state;
        else res.per_subpool_receipts[i] = execute_swap(p.spec, p.geom, p.state, best_parts[i]);
    }
    return res;
}

// A set of constant-product pools with one shared price range and coherent
// marginal prices collapses into a single constant-product pool whose scale
// (square root of the invariant) adds across subpools.
inline double cpmm_scale(const Subpool& p) {
    if (p.spec.utility.kind != UtilityKind::ConstantProduct)
        throw ConfigError("cpmm_scale: constant-product pools only");
    return std::sqrt(p.geom.invariant_const);
}

inline Subpool aggregate_cpmm(const SubpoolSet& set) {
    if (set.pools.empty()) throw ConfigError("aggregate_cpmm: empty pool set");
    PoolSpec agg;
    agg.utility = UtilityFamily::constant_product();
    agg.tau = set.pools[0].spec.tau;
    const double s_ref = marginal_price(set.pools[0].spec, set.pools[0].geom, set.pools[0].state.x);
    const double up_ref = set.pools[0].geom.s_upper ? *set.pools[0].geom.s_upper
                                                    : std::numeric_limits<double>::infinity();
    const double low_ref = set.pools[0].geom.s_lower;
    auto match = [](double a, double b) {
        return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}) ||
               (std::isinf(a) && std::isinf(b));
    };
    PoolState sum;
    for (const Subpool& p : set.pools) {
        if (p.spec.utility.kind != UtilityKind::ConstantProduct)
            throw ModeError("aggregate_cpmm: constant-product pools only");
        if (p.spec.tau != agg.tau)
            throw ModeError("aggregate_cpmm: subpools must share one fee rate");
        const double up = p.geom.s_upper ? *p.geom.s_upper : std::numeric_limits<double>::infinity();
        if (!match(up, up_ref) || !match(p.geom.s_lower, low_ref))
            throw ConfigError("aggregate_cpmm: subpools must share one price range");
        if (!match(marginal_price(p.spec, p.geom, p.state.x), s_ref))
            throw ConfigError("aggregate_cpmm: subpool prices are not coherent");
        agg.x_star += p.spec.x_star;
        agg.y_star += p.spec.y_star;
        agg.x0 += p.state.x;
        agg.y0 += p.state.y;
        sum.x += p.state.x;
        sum.y += p.state.y;
        sum.x_fee += p.state.x_fee;
        sum.y_fee += p.state.y_fee;
    }
    return Subpool{agg, make_geometry(agg), sum};
}

// Per-subpool share of the fee income booked in a set of swap receipts.
// Proportional-to-scale attribution; only meaningful in the aggregated
// constant-product setting, where it reproduces each pool's actual accrual.
struct FeeDelta {
    double fee_x = 0.0;
    double fee_y = 0.0;
};

inline std::vector<FeeDelta> fee_attribution(const SubpoolSet& set,
                                             std::span<const SwapReceipt> receipts) {
    if (set.pools.empty()) throw ConfigError("fee_attribution: empty pool set");
    if (receipts.size() != set.pools.size())
        throw ConfigError("fee_attribution: one receipt per subpool required");
    double k_total = 0.0;
    for (const Subpool& p : set.pools) {
        if (p.spec.utility.kind != UtilityKind::ConstantProduct)
            throw ModeError("fee_attribution: constant-product pools only");
        if (p.spec.tau != set.pools[0].spec.tau)
            throw ModeError("fee_attribution: subpools must share one fee rate");
        k_total += cpmm_scale(p);
    }
    FeeDelta total;
    for (const SwapReceipt& r : receipts) {
        total.fee_x += r.fee_x;
        total.fee_y += r.fee_y;
    }
    std::vector<FeeDelta> out(set.pools.size());
    for (std::size_t i = 0; i < set.pools.size(); ++i) {
        const double w = cpmm_scale(set.pools[i]) / k_total;
        out[i] = {w * total.fee_x, w * total.fee_y};
    }
    return out;
}

// Multi-pool dynamics: each pool is arbitraged against the external price on
// its own, while taker orders are routed through the optimal split (each
// followed by restoring arbitrages).  Returns one trace per subpool, on the
// shared time grid.
inline std::vector<SimulationTrace> simulate_subpools(std::span<const PoolSpec> specs,
                                                      const PricePath& path,
                                                      std::span<const TakerOrder> takers,
                                                      StepMode mode = StepMode::Continuous) {
    SubpoolSet set = make_subpool_set(specs);
    const std::size_t n = set.pools.size();
    if (path.times.size() != path.prices.size() || path.times.empty())
        throw ConfigError("simulate_subpools: malformed price path");
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        if (!(path.prices[i] > 0.0)) throw ConfigError("simulate_subpools: nonpositive price");
        if (i > 0 && !(path.times[i] > path.times[i - 1]))
            throw ConfigError("simulate_subpools: times must increase strictly");
    }
    std::vector<std::vector<double>> taker_at(path.times.size());
    double prev_time = -std::numeric_limits<double>::infinity();
    for (const TakerOrder& o : takers) {
        if (o.time < prev_time) throw ConfigError("simulate_subpools: taker orders must be sorted by time");
        prev_time = o.time;
        if (!std::isfinite(o.xi) || o.xi == 0.0)
            throw ConfigError("simulate_subpools: taker size must be finite and nonzero");
        taker_at[detail::grid_index(path.times, o.time)].push_back(o.xi);
    }

    std::vector<SimulationTrace> traces(n);
    std::vector<double> x_taker_cum(n, 0.0), x_arb_cum(n, 0.0), s_anchor(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        traces[j].spec = set.pools[j].spec;
        traces[j].geom = set.pools[j].geom;
        traces[j].mode = mode;
        traces[j].band = -2.0 * std::log1p(-set.pools[j].spec.tau);
    }

    const bool ride = (mode == StepMode::Continuous);
    std::vector<StepRecord> recs(n);
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        const double s_ext = path.prices[i];
        for (std::size_t j = 0; j < n; ++j) {
            recs[j] = StepRecord{};
            recs[j].time = path.times[i];
            recs[j].s_ext = s_ext;
        }

        auto run_arb = [&](std::size_t j, EventSource src, bool as_ride) {
            Subpool& p = set.pools[j];
            const ArbitrageDecision dec = optimal_arbitrage(p.spec, p.geom, p.state, s_ext);
            if (dec.kind == ArbKind::NoTrade) return;
            TradeEvent ev;
            ev.source = src;
            ev.kind = dec.kind;
            ev.xi = dec.xi_star;
            ev.eta = dec.eta_star;
            const SwapReceipt receipt = apply_arbitrage(p.spec, p.geom, p.state, dec);
            detail::book_arbitrage(p.spec, p.geom, s_ext, p.state.x, receipt, as_ride, ev);
            x_arb_cum[j] += receipt.delta_x;
            p.state = receipt.post_state;
            recs[j].events.push_back(ev);
        };

        for (std::size_t j = 0; j < n; ++j) run_arb(j, EventSource::IntervalArb, i > 0 && ride);

        for (double xi : taker_at[i]) {
            const AllocationResult alloc = allocate_order(set, xi);
            for (std::size_t j = 0; j < n; ++j) {
                if (alloc.xi_parts[j] == 0.0) continue;
                const SwapReceipt& receipt = alloc.per_subpool_receipts[j];
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
                x_taker_cum[j] += receipt.delta_x;
                recs[j].events.push_back(ev);
            }
            for (std::size_t j = 0; j < n; ++j) run_arb(j, EventSource::RestoreArb, false);
        }

        for (std::size_t j = 0; j < n; ++j) {
            Subpool& p = set.pools[j];
            if (i == 0) s_anchor[j] = marginal_price(p.spec, p.geom, p.state.x);
            const double s_pool = marginal_price(p.spec, p.geom, p.state.x);
            StepRecord& rec = recs[j];
            rec.state = p.state;
            const auto quotes = ask_bid(p.spec, p.geom, p.state.x);
            rec.ask = quotes.first;
            rec.bid = quotes.second;
            rec.at_boundary = (p.state.x == 0.0) || (p.geom.x_dagger && p.state.x == *p.geom.x_dagger);
            rec.skorokhod.psi = std::log(s_ext) - std::log(s_anchor[j]) - std::log1p(-p.spec.tau);
            rec.skorokhod.phi = std::log(s_ext) - std::log(s_pool) - std::log1p(-p.spec.tau);
            rec.skorokhod.eta_reg = std::log(s_anchor[j]) - std::log(s_pool);
            rec.skorokhod.band_width = traces[j].band;
            rec.flow.x_taker = x_taker_cum[j];
            rec.flow.x_arb = x_arb_cum[j];
            traces[j].steps.push_back(std::move(rec));
        }
    }
    return traces;
}

}  // namespace cfmm
