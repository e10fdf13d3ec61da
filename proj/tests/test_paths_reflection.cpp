#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "cfmm/price_path.hpp"
#include "cfmm/reflection.hpp"

using namespace cfmm;

namespace {

bool close(double a, double b, double rel = 1e-12, double abs = 1e-12) {
    return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

// Independent oracle for the Skorokhod map on [0, a]: the explicit sup/inf
// representation, evaluated directly in O(n^2).
std::vector<double> reflect_oracle(const std::vector<double>& psi, double a) {
    std::vector<double> phi(psi.size());
    for (std::size_t t = 0; t < psi.size(); ++t) {
        double run_min = psi[t];
        double second = -std::numeric_limits<double>::infinity();
        // sweep s from t down to 0, maintaining min over [s, t]
        for (std::size_t s = t + 1; s-- > 0;) {
            run_min = std::min(run_min, psi[s]);
            second = std::max(second, std::min(psi[s] - a, run_min));
        }
        const double first = std::min(std::max(psi[0] - a, 0.0), run_min);
        phi[t] = psi[t] - std::max(first, second);
    }
    return phi;
}

// call the reflection with a full path (first element is the start value)
ReflectedPath reflect_full(const std::vector<double>& psi, double band) {
    return reflect_two_sided(std::span(psi).subspan(1), psi[0], band);
}

}  // namespace

TEST_CASE("paths inside the band are left untouched") {
    std::vector<double> psi{0.3, 0.5, 0.2, 0.9, 0.1};
    const auto r = reflect_full(psi, 1.0);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        CHECK(r.phi[i] == psi[i]);
        CHECK(r.eta[i] == 0.0);
    }
}

TEST_CASE("monotone overshoot pins the path at the band") {
    std::vector<double> psi{0.0, 0.4, 0.8, 1.2, 1.6};
    const auto r = reflect_full(psi, 1.0);
    CHECK(r.phi[3] == 1.0);
    CHECK(r.phi[4] == 1.0);
    CHECK(close(r.eta[3], 1.0 - 1.2));
    CHECK(close(r.eta[4], 1.0 - 1.6));  // eta = band - psi once pinned
}

TEST_CASE("a very large band reduces to one-sided reflection at zero") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> step(-1.0, 1.0);
    std::vector<double> psi{0.5};
    for (int i = 0; i < 400; ++i) psi.push_back(psi.back() + step(rng));
    const auto r = reflect_full(psi, 1e9);
    double run_min = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        run_min = std::min(run_min, psi[i]);
        CHECK(close(r.phi[i], psi[i] - run_min, 1e-12, 1e-12));
    }
}

TEST_CASE("clamp recursion agrees with the explicit sup-inf solution") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> step(-0.45, 0.45);
    for (int rep = 0; rep < 10; ++rep) {
        const double band = 0.4 + 0.3 * rep;
        std::vector<double> psi{0.5 * band};
        for (int i = 0; i < 250; ++i) psi.push_back(psi.back() + step(rng));
        const auto r = reflect_full(psi, band);
        const auto oracle = reflect_oracle(psi, band);
        for (std::size_t i = 0; i < psi.size(); ++i) {
            CHECK(close(r.phi[i], oracle[i], 1e-12, 1e-12));
            CHECK(r.phi[i] >= 0.0);
            CHECK(r.phi[i] <= band);
            CHECK(close(r.phi[i], psi[i] + r.eta[i], 1e-12, 1e-12));
        }
        // complementarity: the regulator moves only at boundary contact
        for (std::size_t i = 1; i < psi.size(); ++i) {
            if (r.eta[i] > r.eta[i - 1]) CHECK(r.phi[i] == 0.0);
            if (r.eta[i] < r.eta[i - 1]) CHECK(r.phi[i] == band);
        }
    }
}

TEST_CASE("reflection rejects bad arguments and projects rounding noise") {
    const std::vector<double> tail{0.2};
    CHECK_THROWS_AS(reflect_two_sided(tail, 0.5, 0.0), ConfigError);   // band must be positive
    CHECK_THROWS_AS(reflect_two_sided(tail, -0.1, 1.0), ConfigError);  // start below the band
    CHECK_THROWS_AS(reflect_two_sided(tail, 1.1, 1.0), ConfigError);   // start above the band
    const auto lo = reflect_two_sided(tail, -5e-13, 1.0);
    CHECK(lo.phi[0] == 0.0);
    const auto hi = reflect_two_sided(tail, 1.0 + 5e-13, 1.0);
    CHECK(hi.phi[0] == 1.0);
    const auto just_start = reflect_two_sided({}, 0.3, 1.0);  // a one-point path is fine
    CHECK(just_start.phi.size() == 1);
    CHECK(just_start.eta[0] == 0.0);
}

TEST_CASE("gbm sampling is seed-deterministic") {
    const auto a = generate_gbm_path(0.05, 0.4, 2.0, 1.0, 500, 42);
    const auto b = generate_gbm_path(0.05, 0.4, 2.0, 1.0, 500, 42);
    const auto c = generate_gbm_path(0.05, 0.4, 2.0, 1.0, 500, 43);
    CHECK(a.prices == b.prices);
    CHECK(a.times == b.times);
    CHECK(a.prices != c.prices);
}

TEST_CASE("gbm grid and positivity") {
    const auto p = generate_gbm_path(0.0, 0.5, 1.0, 2.0, 100, 7);
    REQUIRE(p.times.size() == 101);
    CHECK(p.times[0] == 0.0);
    CHECK(close(p.times[100], 2.0));
    CHECK(close(p.times[37], 37 * 0.02));
    CHECK(p.prices[0] == 1.0);
    for (double s : p.prices) CHECK(s > 0.0);
}

TEST_CASE("gbm log-return moments match the scheme") {
    const double mu = 0.07, sigma = 0.3, T = 1.0;
    const int n_paths = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n_paths; ++i) {
        const auto p = generate_gbm_path(mu, sigma, 1.0, T, 1, 1000 + i);
        const double r = std::log(p.prices.back());
        sum += r;
        sum2 += r * r;
    }
    const double mean = sum / n_paths;
    const double var = sum2 / n_paths - mean * mean;
    const double expect = (mu - 0.5 * sigma * sigma) * T;
    const double se = sigma * std::sqrt(T) / std::sqrt(double(n_paths));
    CHECK(std::abs(mean - expect) <= 3.0 * se);
    CHECK(std::abs(var - sigma * sigma * T) <= 4.0 * sigma * sigma * T / std::sqrt(double(n_paths)) + 1e-3);
}

TEST_CASE("gbm validation") {
    CHECK_THROWS_AS(generate_gbm_path(0, 0.5, -1.0, 1.0, 10, 0), ConfigError);
    CHECK_THROWS_AS(generate_gbm_path(0, -0.5, 1.0, 1.0, 10, 0), ConfigError);
    CHECK_THROWS_AS(generate_gbm_path(0, 0.5, 1.0, 0.0, 10, 0), ConfigError);
    CHECK_THROWS_AS(generate_gbm_path(0, 0.5, 1.0, 1.0, 0, 0), ConfigError);
}

TEST_CASE("csv ingestion parses the documented format") {
    const auto p = ingest_csv_path("time,price\n0,1.0\n1,1.1\n");
    REQUIRE(p.times.size() == 2);
    CHECK(p.times[0] == 0.0);
    CHECK(p.times[1] == 1.0);
    CHECK(p.prices[1] == 1.1);
    // CR tolerated, trailing blank line tolerated, no trailing newline tolerated
    const auto q = ingest_csv_path("time,price\r\n0,2\r\n0.5,2.5");
    REQUIRE(q.times.size() == 2);
    CHECK(q.prices[0] == 2.0);
}

TEST_CASE("csv ingestion reports precise failures") {
    CHECK_THROWS_AS(ingest_csv_path("t,p\n0,1\n"), ParseError);
    CHECK_THROWS_AS(ingest_csv_path("time,price\n0;1\n"), ParseError);
    CHECK_THROWS_AS(ingest_csv_path("time,price\n0,abc\n"), ParseError);
    CHECK_THROWS_AS(ingest_csv_path("time,price\n"), ConfigError);              // no rows
    CHECK_THROWS_AS(ingest_csv_path("time,price\n0,1\n0,2\n"), ConfigError);    // stalled clock
    CHECK_THROWS_AS(ingest_csv_path("time,price\n1,1\n0.5,2\n"), ConfigError);  // reversed clock
    CHECK_THROWS_AS(ingest_csv_path("time,price\n0,0\n"), ConfigError);         // nonpositive price
    CHECK_THROWS_AS(ingest_csv_path("time,price\n-1,1\n"), ConfigError);        // negative time
    try {
        ingest_csv_path("time,price\n0,1\n1,oops\n", "prices.csv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("prices.csv:3") != std::string::npos);
    }
}
