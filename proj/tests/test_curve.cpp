#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "cfmm/curve.hpp"

using namespace cfmm;

namespace {

// standard fixtures used across the suite
PoolSpec unconcentrated_cp() {
    PoolSpec s;
    s.utility = UtilityFamily::constant_product();
    s.x0 = 100.0;
    s.y0 = 100.0;  // L^2 = 10000
    return s;
}

PoolSpec concentrated_cp() {
    PoolSpec s;
    s.utility = UtilityFamily::constant_product();
    s.x_star = 5.0;
    s.y_star = 5.0;
    s.x0 = 5.0;
    s.y0 = 5.0;  // L^2 = (5+5)(5+5) = 100
    return s;
}

bool close(double a, double b, double rel = 1e-12, double abs = 1e-12) {
    return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_CASE("geometry of an unconcentrated constant-product pool") {
    const auto spec = unconcentrated_cp();
    const auto geom = make_geometry(spec);
    CHECK(geom.invariant_const == 10000.0);
    CHECK(!geom.x_dagger.has_value());  // y* = 0: second currency never runs out
    CHECK(!geom.s_upper.has_value());   // x* = 0: price unbounded near empty reserves
    CHECK(geom.s_lower == 0.0);
}

TEST_CASE("geometry of a concentrated constant-product pool") {
    const auto spec = concentrated_cp();
    const auto geom = make_geometry(spec);
    const double L2 = 100.0;
    CHECK(geom.invariant_const == L2);
    REQUIRE(geom.x_dagger.has_value());
    REQUIRE(geom.s_upper.has_value());
    // closed forms: x_dagger = L^2/y* - x*, s_upper = L^2/x*^2, s_lower = y*^2/L^2
    CHECK(close(*geom.x_dagger, L2 / 5.0 - 5.0));  // 15
    CHECK(close(*geom.s_upper, L2 / 25.0));        // 4
    CHECK(close(geom.s_lower, 25.0 / L2));         // 0.25
    // cross-identity: s_lower * s_upper = (y*/x*)^2
    CHECK(close(geom.s_lower * *geom.s_upper, 1.0));
}

TEST_CASE("spec validation rejects structurally invalid pools") {
    PoolSpec s = concentrated_cp();
    s.tau = 1.0;
    CHECK_THROWS_AS(make_geometry(s), ConfigError);
    s = concentrated_cp();
    s.tau = -0.1;
    CHECK_THROWS_AS(make_geometry(s), ConfigError);
    s = concentrated_cp();
    s.x_star = -1.0;
    CHECK_THROWS_AS(make_geometry(s), ConfigError);
    s = concentrated_cp();
    s.x0 = 0.0;
    s.y0 = 0.0;  // empty pool: price range degenerates to a point
    CHECK_THROWS_AS(make_geometry(s), ConfigError);
    s = PoolSpec{};
    s.utility = UtilityFamily::geometric_mean(1.0);
    s.x0 = 1.0;
    s.y0 = 1.0;
    CHECK_THROWS_AS(make_geometry(s), ConfigError);
    s = PoolSpec{};
    s.x0 = 0.0;
    s.y0 = 1.0;  // x0 + x* = 0
    CHECK_THROWS_AS(make_geometry(s), ConfigError);
}

TEST_CASE("domain membership follows the half-open boundary rules") {
    const auto cspec = concentrated_cp();
    const auto cgeom = make_geometry(cspec);
    // x* > 0 and y* > 0: both endpoints belong
    CHECK(in_domain(cspec, cgeom, 0.0));
    CHECK(in_domain(cspec, cgeom, 15.0));
    CHECK(!in_domain(cspec, cgeom, -1e-9));
    CHECK(!in_domain(cspec, cgeom, 15.0 + 1e-9));

    const auto uspec = unconcentrated_cp();
    const auto ugeom = make_geometry(uspec);
    // x* = 0: zero excluded; y* = 0: no right endpoint
    CHECK(!in_domain(uspec, ugeom, 0.0));
    CHECK(in_domain(uspec, ugeom, 1e-9));
    CHECK(in_domain(uspec, ugeom, 1e12));
}

TEST_CASE("price range membership mirrors the domain conventions") {
    const auto cspec = concentrated_cp();
    const auto cgeom = make_geometry(cspec);
    CHECK(price_in_range(cspec, cgeom, 0.25));
    CHECK(price_in_range(cspec, cgeom, 4.0));
    CHECK(price_in_range(cspec, cgeom, 1.0));
    CHECK(!price_in_range(cspec, cgeom, 0.25 - 1e-9));
    CHECK(!price_in_range(cspec, cgeom, 4.0 + 1e-9));

    const auto uspec = unconcentrated_cp();
    const auto ugeom = make_geometry(uspec);
    CHECK(price_in_range(uspec, ugeom, 1e-12));
    CHECK(price_in_range(uspec, ugeom, 1e12));
    CHECK(!price_in_range(uspec, ugeom, 0.0));
}

TEST_CASE("curve evaluation matches the constant-product closed form") {
    const auto uspec = unconcentrated_cp();
    const auto ugeom = make_geometry(uspec);
    CHECK(close(curve_value(uspec, ugeom, 100.0), 100.0));  // f(x) = L^2/x
    CHECK(close(curve_value(uspec, ugeom, 50.0), 200.0));
    CHECK(close(curve_value(uspec, ugeom, 200.0), 50.0));

    const auto cspec = concentrated_cp();
    const auto cgeom = make_geometry(cspec);
    CHECK(close(curve_value(cspec, cgeom, 5.0), 5.0));    // initial point is on the curve
    CHECK(curve_value(cspec, cgeom, 15.0) == 0.0);        // exhausted at x_dagger
    CHECK(close(curve_value(cspec, cgeom, 0.0), 15.0));   // f*(0) = L^2/x* - y*
    CHECK_THROWS_AS(curve_value(cspec, cgeom, 15.5), DomainError);
    CHECK_THROWS_AS(curve_value(cspec, cgeom, -0.5), DomainError);
}

TEST_CASE("marginal price matches the constant-product closed form") {
    const auto uspec = unconcentrated_cp();
    const auto ugeom = make_geometry(uspec);
    CHECK(close(marginal_price(uspec, ugeom, 100.0), 1.0));  // s(x) = L^2/x^2
    CHECK(close(marginal_price(uspec, ugeom, 50.0), 4.0));

    const auto cspec = concentrated_cp();
    const auto cgeom = make_geometry(cspec);
    CHECK(close(marginal_price(cspec, cgeom, 0.0), 4.0));    // s(0) = s_upper
    CHECK(close(marginal_price(cspec, cgeom, 15.0), 0.25));  // s(x_dagger) = s_lower
    CHECK(close(marginal_price(cspec, cgeom, 5.0), 1.0));
}

TEST_CASE("marginal price equals the negated curve slope to second order") {
    const auto spec = concentrated_cp();
    const auto geom = make_geometry(spec);
    for (double x : {1.0, 5.0, 9.0, 13.0}) {
        const double s = marginal_price(spec, geom, x);
        auto err = [&](double h) {
            const double fd = (curve_value(spec, geom, x - h) - curve_value(spec, geom, x + h)) / (2.0 * h);
            return std::abs(fd - s);
        };
        const double e1 = err(1e-3), e2 = err(5e-4);
        CHECK(e1 < 1e-5);
        CHECK(e2 <= e1 / 3.0 + 1e-12);  // halving h quarters the error: second-order stencil
    }
}

TEST_CASE("curve is strictly decreasing and strictly convex") {
    const auto spec = concentrated_cp();
    const auto geom = make_geometry(spec);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 15.0);
    for (int it = 0; it < 200; ++it) {
        double a = u(rng), b = u(rng), t = 0.5;
        if (a > b) std::swap(a, b);
        if (b - a < 1e-6) continue;
        const double fa = curve_value(spec, geom, a);
        const double fb = curve_value(spec, geom, b);
        CHECK(fa > fb);  // decreasing
        const double mid = curve_value(spec, geom, t * a + (1.0 - t) * b);
        CHECK(mid < t * fa + (1.0 - t) * fb);  // strict chord inequality
        CHECK(curve_convexity(spec, geom, 0.5 * (a + b)) > 0.0);
    }
}

TEST_CASE("convexity matches second differences") {
    const auto spec = concentrated_cp();
    const auto geom = make_geometry(spec);
    const double h = 1e-3;
    for (double x : {2.0, 5.0, 11.0}) {
        const double fd = (curve_value(spec, geom, x + h) - 2.0 * curve_value(spec, geom, x) +
                           curve_value(spec, geom, x - h)) /
                          (h * h);
        CHECK(close(fd, curve_convexity(spec, geom, x), 1e-5, 1e-5));
    }
}

TEST_CASE("ask and bid bracket the marginal price by the fee wedge") {
    auto spec = unconcentrated_cp();
    spec.tau = 0.003;
    const auto geom = make_geometry(spec);
    auto [ask, bid] = ask_bid(spec, geom, 100.0);  // s = 1
    CHECK(close(ask, 1.0 / 0.997));
    CHECK(close(bid, 0.997));

    auto spec2 = concentrated_cp();
    spec2.tau = 0.5;
    const auto geom2 = make_geometry(spec2);
    auto [ask2, bid2] = ask_bid(spec2, geom2, 0.0);  // s = 4
    CHECK(close(ask2, 8.0));
    CHECK(close(bid2, 2.0));
    // ask * bid = s^2 regardless of tau
    CHECK(close(ask2 * bid2, 16.0));
}

TEST_CASE("price inversion round-trips across the range") {
    const auto cspec = concentrated_cp();
    const auto cgeom = make_geometry(cspec);
    CHECK(close(inverse_marginal_price(cspec, cgeom, 1.0), 5.0));   // L/sqrt(p) - x*
    CHECK(inverse_marginal_price(cspec, cgeom, 4.0) == 0.0);       // top of the range
    CHECK(close(inverse_marginal_price(cspec, cgeom, 0.25), 15.0));
    CHECK_THROWS_AS(inverse_marginal_price(cspec, cgeom, 5.0), RangeError);
    CHECK_THROWS_AS(inverse_marginal_price(cspec, cgeom, 0.2), RangeError);

    const auto uspec = unconcentrated_cp();
    const auto ugeom = make_geometry(uspec);
    CHECK(close(inverse_marginal_price(uspec, ugeom, 4.0), 50.0));

    for (double x : {0.5, 2.0, 5.0, 9.5, 14.0}) {
        const double p = marginal_price(cspec, cgeom, x);
        const double xr = inverse_marginal_price(cspec, cgeom, p);
        CHECK(close(marginal_price(cspec, cgeom, xr), p, 1e-10));
        CHECK(close(xr, x, 1e-9));
    }
}

TEST_CASE("geometric mean with alpha one-half reproduces constant product") {
    PoolSpec gm;
    gm.utility = UtilityFamily::geometric_mean(0.5);
    gm.x_star = 5.0;
    gm.y_star = 5.0;
    gm.x0 = 5.0;
    gm.y0 = 5.0;
    const auto ggeom = make_geometry(gm);
    const auto cspec = concentrated_cp();
    const auto cgeom = make_geometry(cspec);

    // same level sets: alpha = 1/2 is the square root of the product
    REQUIRE(ggeom.x_dagger.has_value());
    CHECK(close(*ggeom.x_dagger, *cgeom.x_dagger, 1e-12));
    CHECK(close(*ggeom.s_upper, *cgeom.s_upper, 1e-12));
    CHECK(close(ggeom.s_lower, cgeom.s_lower, 1e-12));
    for (double x = 0.0; x <= 15.0; x += 0.75) {
        CHECK(close(curve_value(gm, ggeom, x), curve_value(cspec, cgeom, x), 1e-12, 1e-9));
        CHECK(close(marginal_price(gm, ggeom, x), marginal_price(cspec, cgeom, x), 1e-12));
        CHECK(close(curve_convexity(gm, ggeom, x), curve_convexity(cspec, cgeom, x), 1e-12));
    }
}

TEST_CASE("geometric mean curve is self-consistent for asymmetric weights") {
    PoolSpec gm;
    gm.utility = UtilityFamily::geometric_mean(0.3);
    gm.x_star = 1.0;
    gm.y_star = 0.5;
    gm.x0 = 8.0;
    gm.y0 = 3.0;
    const auto geom = make_geometry(gm);

    // the invariant is reproduced along the whole curve
    for (double x = 0.0; x <= *geom.x_dagger; x += *geom.x_dagger / 37.0) {
        const double y = curve_value(gm, geom, x);
        CHECK(close(shifted_utility(gm, x, y), geom.invariant_const, 1e-12));
    }
    // x_dagger solves f*(x) = 0
    CHECK(curve_value(gm, geom, *geom.x_dagger) <= 1e-12);
    // endpoint prices match the published bounds
    CHECK(close(marginal_price(gm, geom, 0.0), *geom.s_upper, 1e-12));
    CHECK(close(marginal_price(gm, geom, *geom.x_dagger), geom.s_lower, 1e-12));

    // derivative check against central differences
    for (double x : {1.0, 4.0, 9.0}) {
        const double h = 1e-4;
        const double fd = (curve_value(gm, geom, x - h) - curve_value(gm, geom, x + h)) / (2.0 * h);
        CHECK(close(fd, marginal_price(gm, geom, x), 1e-6));
    }

    // inversion round-trips through the bisection path
    for (double x : {0.25, 2.0, 7.5, 0.9 * *geom.x_dagger}) {
        const double p = marginal_price(gm, geom, x);
        const double xr = inverse_marginal_price(gm, geom, p);
        CHECK(close(marginal_price(gm, geom, xr), p, 1e-10));
    }
    CHECK(close(inverse_marginal_price(gm, geom, *geom.s_upper), 0.0, 1e-9, 1e-9));
}

TEST_CASE("geometric mean without concentration has an unbounded range") {
    PoolSpec gm;
    gm.utility = UtilityFamily::geometric_mean(0.7);
    gm.x0 = 10.0;
    gm.y0 = 20.0;
    const auto geom = make_geometry(gm);
    CHECK(!geom.x_dagger.has_value());
    CHECK(!geom.s_upper.has_value());
    // bracket growth paths in the inversion
    for (double p : {1e-3, 0.5, 7.0, 250.0}) {
        const double x = inverse_marginal_price(gm, geom, p);
        CHECK(close(marginal_price(gm, geom, x), p, 1e-10));
    }
}

TEST_CASE("reserve snapping projects only boundary rounding noise") {
    const auto spec = concentrated_cp();
    const auto geom = make_geometry(spec);
    CHECK(snap_reserve(spec, geom, 15.0 + 2e-13) == 15.0);
    CHECK(snap_reserve(spec, geom, 3e-13) == 0.0);
    CHECK(snap_reserve(spec, geom, 14.9) == 14.9);
    CHECK(snap_reserve(spec, geom, 0.1) == 0.1);
}
