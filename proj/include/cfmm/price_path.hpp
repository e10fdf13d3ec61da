#pragma once

// ---------------------------------------------------------------------------
// External market price paths.
//
// Paths are discrete grids (t_i, S_i) with strictly increasing nonnegative
// times and strictly positive prices. Two sources exist: an exact log-Euler
// geometric Brownian motion sampler and CSV ingestion.
//
// Determinism: normals come from an explicit Box-Muller transform driven by
// std::mt19937_64 (fully specified by the standard), so a seed pins the path
// bit-for-bit on a given platform. std::normal_distribution is deliberately
// avoided (its algorithm is implementation-defined).
// ---------------------------------------------------------------------------

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cfmm/errors.hpp"

namespace cfmm {

struct GbmSource {
    double mu = 0.0;
    double sigma = 0.0;
    double s0 = 1.0;
    double horizon = 1.0;
    std::int64_t steps = 0;
    std::uint64_t seed = 0;
};

struct CsvSource {
    std::string origin;  // file name or description, for reports
};

struct PricePath {
    std::vector<double> times;
    std::vector<double> prices;
    std::variant<GbmSource, CsvSource> source;
};

namespace detail {

// uniform draw in (0, 1]: 53-bit mantissa, never zero (safe under log)
inline double uniform_open0(std::mt19937_64& rng) {
    return 1.0 - (rng() >> 11) * 0x1.0p-53;
}

// one standard normal per call; two uniforms, cosine branch of Box-Muller
inline double standard_normal(std::mt19937_64& rng) {
    const double u1 = uniform_open0(rng);
    const double u2 = uniform_open0(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace detail

// Exact log-Euler GBM: S_{i+1} = S_i * exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z_i).
// The grid is t_i = i * horizon / steps, i = 0..steps.
inline PricePath generate_gbm_path(double mu, double sigma, double s0, double horizon, std::int64_t steps,
                                   std::uint64_t seed) {
    if (!(s0 > 0.0) || !std::isfinite(s0)) throw ConfigError("gbm: s0 must be positive");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("gbm: sigma must be >= 0");
    if (!std::isfinite(mu)) throw ConfigError("gbm: mu must be finite");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("gbm: horizon must be positive");
    if (steps < 1) throw ConfigError("gbm: steps must be >= 1");

    PricePath path;
    path.source = GbmSource{mu, sigma, s0, horizon, steps, seed};
    path.times.resize(steps + 1);
    path.prices.resize(steps + 1);
    const double dt = horizon / static_cast<double>(steps);
    const double drift = (mu - 0.5 * sigma * sigma) * dt;
    const double vol = sigma * std::sqrt(dt);
    std::mt19937_64 rng(seed);
    path.times[0] = 0.0;
    path.prices[0] = s0;
    double log_s = std::log(s0);
    for (std::int64_t i = 1; i <= steps; ++i) {
        log_s += drift + vol * detail::standard_normal(rng);
        path.times[i] = static_cast<double>(i) * dt;
        path.prices[i] = std::exp(log_s);
    }
    return path;
}

// Parses "time,price" CSV bytes (UTF-8, LF; a trailing CR per line is
// tolerated). Header row required. Throws ParseError with a line number on
// malformed input and ConfigError on non-monotone times or nonpositive prices.
inline PricePath ingest_csv_path(std::string_view bytes, std::string origin = "csv") {
    PricePath path;
    path.source = CsvSource{origin};

    std::size_t pos = 0, line_no = 0;
    auto next_line = [&]() -> std::string_view {
        if (pos >= bytes.size()) return {};
        const std::size_t nl = bytes.find('\n', pos);
        std::string_view line = bytes.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? bytes.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        return line;
    };
    auto fail = [&](const std::string& msg) {
        throw ParseError(origin + ":" + std::to_string(line_no) + ": " + msg);
    };
    auto parse_field = [&](std::string_view f) {
        double v = 0.0;
        const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
        if (res.ec != std::errc() || res.ptr != f.data() + f.size()) fail("malformed number '" + std::string(f) + "'");
        return v;
    };

    const std::string_view header = next_line();
    if (header != "time,price") throw ParseError(origin + ":1: expected header 'time,price'");

    while (pos < bytes.size()) {
        const std::string_view line = next_line();
        if (line.empty()) continue;  // tolerate trailing blank line
        const std::size_t comma = line.find(',');
        if (comma == std::string_view::npos) fail("expected 'time,price'");
        const double t = parse_field(line.substr(0, comma));
        const double p = parse_field(line.substr(comma + 1));
        if (!(p > 0.0) || !std::isfinite(p))
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": price must be positive");
        if (!(t >= 0.0) || !std::isfinite(t))
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": time must be >= 0");
        if (!path.times.empty() && !(t > path.times.back()))
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": times must be strictly increasing");
        path.times.push_back(t);
        path.prices.push_back(p);
    }
    if (path.times.empty()) throw ConfigError(origin + ": no data rows");
    return path;
}

}  // namespace cfmm
