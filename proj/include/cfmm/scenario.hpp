#pragma once

// ---------------------------------------------------------------------------
// Scenario configuration, execution, and artifact emission.
//
// A scenario is a JSON document (schema "cfmm-lab/1") naming one pool or a
// set of subpools, a price source (seeded GBM or a CSV file), the stepping
// mode, optional taker orders, and the reports to produce.  Parsing is
// strict: unknown fields and precondition violations are collected with
// dotted field paths and reported together.
//
// Artifacts are plain files, written with 17-significant-digit numeric
// formatting so identical scenarios produce byte-identical outputs:
//   trace.jsonl    one JSON record per step (per pool for subpool runs)
//   metrics.csv    per-step valuation columns
//   summary.json   terminal figures
//   band.csv, value.csv, regulator.csv   tidy (time,series,value) plot data
//
// Multi-seed batches fan the seed list out over a worker pool capped by the
// CFMM_LAB_THREADS environment variable (absent = sequential); each run
// writes files suffixed by its seed, and the batch summary orders runs by
// seed so aggregation is independent of completion order.
// ---------------------------------------------------------------------------

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cfmm/curve.hpp"
#include "cfmm/errors.hpp"
#include "cfmm/metrics.hpp"
#include "cfmm/multi_lp.hpp"
#include "cfmm/price_path.hpp"
#include "cfmm/simulate.hpp"

namespace cfmm {

// ----------------------------- configuration ------------------------------

inline constexpr const char* kScenarioSchema = "cfmm-lab/1";

enum class ReportKind { Trace, Metrics, Summary, Plot };

struct ScenarioConfig {
    std::string schema = kScenarioSchema;
    std::vector<PoolSpec> pools;   // size 1 unless subpools was given
    bool multi = false;            // true when configured through "subpools"
    bool price_is_gbm = false;
    GbmSource gbm;                 // seed field filled per run
    std::string csv_file;          // resolved path of the price file
    StepMode mode = StepMode::Continuous;
    std::vector<TakerOrder> takers;
    std::vector<ReportKind> outputs;      // deduplicated, canonical order
    std::vector<std::uint64_t> seeds;     // nonempty iff price_is_gbm
};

namespace detail {

// %.17g: shortest fixed rule that round-trips every binary64 value
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    return out;
}

// collects field-level violations during one validation pass
struct Checker {
    std::vector<Violation> violations;

    void add(std::string field, std::string message) {
        violations.push_back({std::move(field), std::move(message)});
    }
    void finish() {
        if (!violations.empty()) throw ValidationError(std::move(violations));
    }
};

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

using Json = nlohmann::json;

inline void check_keys(Checker& c, const Json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known) c.add(join_path(path, item.key()), "unknown field");
    }
}

inline const Json* find_field(Checker& c, const Json& obj, const std::string& path,
                              const char* key, bool required) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) c.add(join_path(path, key), "required field is missing");
        return nullptr;
    }
    return &*it;
}

inline std::optional<double> as_number(Checker& c, const Json& j, const std::string& path) {
    if (!j.is_number()) {
        c.add(path, "expected a number");
        return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        c.add(path, "must be finite");
        return std::nullopt;
    }
    return v;
}

inline std::optional<std::int64_t> as_integer(Checker& c, const Json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        c.add(path, "expected an integer");
        return std::nullopt;
    }
    return j.get<std::int64_t>();
}

inline std::optional<std::string> as_string(Checker& c, const Json& j, const std::string& path) {
    if (!j.is_string()) {
        c.add(path, "expected a string");
        return std::nullopt;
    }
    return j.get<std::string>();
}

inline PoolSpec parse_pool(Checker& c, const Json& j, const std::string& path) {
    PoolSpec spec;
    if (!j.is_object()) {
        c.add(path, "expected an object");
        return spec;
    }
    const std::size_t before = c.violations.size();
    check_keys(c, j, path, {"kind", "alpha", "x_star", "y_star", "tau", "x0", "y0"});

    if (const Json* f = find_field(c, j, path, "kind", true)) {
        if (const auto kind = as_string(c, *f, join_path(path, "kind"))) {
            if (*kind == "constant_product") {
                spec.utility = UtilityFamily::constant_product();
                if (j.contains("alpha"))
                    c.add(join_path(path, "alpha"), "only meaningful for kind 'geometric_mean'");
            } else if (*kind == "geometric_mean") {
                double alpha = 0.0;
                if (const Json* a = find_field(c, j, path, "alpha", true))
                    alpha = as_number(c, *a, join_path(path, "alpha")).value_or(0.0);
                spec.utility = UtilityFamily::geometric_mean(alpha);
            } else {
                c.add(join_path(path, "kind"), "must be 'constant_product' or 'geometric_mean'");
            }
        }
    }
    auto number_field = [&](const char* key, double& dst, bool required) {
        if (const Json* f = find_field(c, j, path, key, required))
            dst = as_number(c, *f, join_path(path, key)).value_or(dst);
    };
    number_field("x_star", spec.x_star, false);
    number_field("y_star", spec.y_star, false);
    number_field("tau", spec.tau, false);
    number_field("x0", spec.x0, true);
    number_field("y0", spec.y0, true);

    // semantic validation only once the fields themselves are well-formed
    if (c.violations.size() == before) {
        try {
            make_geometry(spec);
        } catch (const ConfigError& e) {
            c.add(path, e.what());
        }
    }
    return spec;
}

inline void parse_price(Checker& c, const Json& j, ScenarioConfig& cfg,
                        const std::filesystem::path& config_dir) {
    const std::string path = "price";
    if (!j.is_object()) {
        c.add(path, "expected an object");
        return;
    }
    check_keys(c, j, path, {"kind", "mu", "sigma", "s0", "horizon", "steps", "file"});
    const Json* f = find_field(c, j, path, "kind", true);
    if (!f) return;
    const auto kind = as_string(c, *f, "price.kind");
    if (!kind) return;

    if (*kind == "gbm") {
        cfg.price_is_gbm = true;
        if (j.contains("file")) c.add("price.file", "only meaningful for kind 'csv'");
        if (const Json* g = find_field(c, j, path, "mu", false))
            cfg.gbm.mu = as_number(c, *g, "price.mu").value_or(0.0);
        if (const Json* g = find_field(c, j, path, "sigma", true))
            if (const auto v = as_number(c, *g, "price.sigma")) {
                if (*v < 0.0) c.add("price.sigma", "must be >= 0");
                cfg.gbm.sigma = *v;
            }
        if (const Json* g = find_field(c, j, path, "s0", true))
            if (const auto v = as_number(c, *g, "price.s0")) {
                if (!(*v > 0.0)) c.add("price.s0", "must be positive");
                cfg.gbm.s0 = *v;
            }
        if (const Json* g = find_field(c, j, path, "horizon", true))
            if (const auto v = as_number(c, *g, "price.horizon")) {
                if (!(*v > 0.0)) c.add("price.horizon", "must be positive");
                cfg.gbm.horizon = *v;
            }
        if (const Json* g = find_field(c, j, path, "steps", true))
            if (const auto v = as_integer(c, *g, "price.steps")) {
                if (*v < 1) c.add("price.steps", "must be >= 1");
                cfg.gbm.steps = *v;
            }
    } else if (*kind == "csv") {
        cfg.price_is_gbm = false;
        for (const char* k : {"mu", "sigma", "s0", "horizon", "steps"})
            if (j.contains(k)) c.add(join_path(path, k), "only meaningful for kind 'gbm'");
        if (const Json* g = find_field(c, j, path, "file", true))
            if (const auto v = as_string(c, *g, "price.file")) {
                std::filesystem::path p = *v;
                if (p.is_relative()) p = config_dir / p;
                cfg.csv_file = p.lexically_normal().string();
                std::error_code ec;
                if (!std::filesystem::is_regular_file(cfg.csv_file, ec))
                    c.add("price.file", "file not found: " + cfg.csv_file);
            }
    } else {
        c.add("price.kind", "must be 'gbm' or 'csv'");
    }
}

inline void parse_seeds(Checker& c, const Json& top, ScenarioConfig& cfg) {
    const bool has_seed = top.contains("seed");
    const bool has_seeds = top.contains("seeds");
    if (!cfg.price_is_gbm) {
        if (has_seed) c.add("seed", "price source 'csv' takes no seed");
        if (has_seeds) c.add("seeds", "price source 'csv' takes no seeds");
        return;
    }
    if (has_seed && has_seeds) {
        c.add("seeds", "give either 'seed' or 'seeds', not both");
        return;
    }
    if (!has_seed && !has_seeds) {
        c.add("seed", "price source 'gbm' requires a seed (or a 'seeds' batch)");
        return;
    }
    auto one_seed = [&](const Json& j, const std::string& path) -> std::optional<std::uint64_t> {
        if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() &&
                                       j.get<std::int64_t>() < 0)) {
            c.add(path, "expected a nonnegative integer");
            return std::nullopt;
        }
        return j.get<std::uint64_t>();
    };
    if (has_seed) {
        if (const auto s = one_seed(top.at("seed"), "seed")) cfg.seeds.push_back(*s);
        return;
    }
    const Json& arr = top.at("seeds");
    if (!arr.is_array() || arr.empty()) {
        c.add("seeds", "expected a nonempty array of integers");
        return;
    }
    for (std::size_t i = 0; i < arr.size(); ++i)
        if (const auto s = one_seed(arr[i], "seeds[" + std::to_string(i) + "]")) {
            if (std::find(cfg.seeds.begin(), cfg.seeds.end(), *s) != cfg.seeds.end())
                c.add("seeds[" + std::to_string(i) + "]", "duplicate seed");
            else
                cfg.seeds.push_back(*s);
        }
}

inline void parse_takers(Checker& c, const Json& j, ScenarioConfig& cfg) {
    if (!j.is_array()) {
        c.add("takers", "expected an array");
        return;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string path = "takers[" + std::to_string(i) + "]";
        const Json& t = j[i];
        if (!t.is_object()) {
            c.add(path, "expected an object");
            continue;
        }
        check_keys(c, t, path, {"time", "xi"});
        TakerOrder order;
        if (const Json* f = find_field(c, t, path, "time", true))
            if (const auto v = as_number(c, *f, path + ".time")) {
                if (*v < 0.0) c.add(path + ".time", "must be >= 0");
                order.time = *v;
            }
        if (const Json* f = find_field(c, t, path, "xi", true))
            if (const auto v = as_number(c, *f, path + ".xi")) {
                if (*v == 0.0) c.add(path + ".xi", "must be nonzero");
                order.xi = *v;
            }
        if (!cfg.takers.empty() && order.time < cfg.takers.back().time)
            c.add(path + ".time", "taker orders must be sorted by time");
        cfg.takers.push_back(order);
    }
}

inline const char* report_name(ReportKind k) {
    switch (k) {
        case ReportKind::Trace: return "trace";
        case ReportKind::Metrics: return "metrics";
        case ReportKind::Summary: return "summary";
        case ReportKind::Plot: return "plot";
    }
    return "";
}

inline void parse_outputs(Checker& c, const Json& j, ScenarioConfig& cfg) {
    if (!j.is_array()) {
        c.add("outputs", "expected an array of report kinds");
        return;
    }
    std::vector<ReportKind> wanted;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string path = "outputs[" + std::to_string(i) + "]";
        const auto name = as_string(c, j[i], path);
        if (!name) continue;
        bool known = false;
        for (ReportKind k : {ReportKind::Trace, ReportKind::Metrics, ReportKind::Summary,
                             ReportKind::Plot})
            if (*name == report_name(k)) {
                wanted.push_back(k);
                known = true;
            }
        if (!known) c.add(path, "unknown report kind '" + *name + "'");
    }
    // canonical order, duplicates dropped
    cfg.outputs.clear();
    for (ReportKind k : {ReportKind::Trace, ReportKind::Metrics, ReportKind::Summary,
                         ReportKind::Plot})
        if (std::find(wanted.begin(), wanted.end(), k) != wanted.end()) cfg.outputs.push_back(k);
    if (cfg.outputs.empty() && !j.empty()) return;  // violations already recorded
    if (j.empty()) c.add("outputs", "must name at least one report kind");
}

}  // namespace detail

// Parses and fully validates a scenario document.  Relative CSV paths are
// resolved against config_dir.  Throws ParseError on malformed JSON and
// ValidationError (all violations at once) on a well-formed but invalid
// scenario.
inline ScenarioConfig parse_scenario(std::string_view json_text,
                                     const std::filesystem::path& config_dir = ".") {
    detail::Json doc;
    try {
        doc = detail::Json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }

    detail::Checker c;
    ScenarioConfig cfg;
    if (!doc.is_object()) {
        c.add("", "top-level value must be an object");
        c.finish();
    }
    detail::check_keys(c, doc, "",
                       {"schema", "pool", "subpools", "price", "mode", "seed", "seeds", "takers",
                        "outputs"});

    if (const detail::Json* f = detail::find_field(c, doc, "", "schema", true)) {
        const auto s = detail::as_string(c, *f, "schema");
        if (s && *s != kScenarioSchema)
            c.add("schema", "unsupported schema '" + *s + "', expected '" + kScenarioSchema + "'");
    }

    const bool has_pool = doc.contains("pool");
    const bool has_subpools = doc.contains("subpools");
    if (has_pool == has_subpools) {
        c.add(has_pool ? "subpools" : "pool", "give exactly one of 'pool' or 'subpools'");
    } else if (has_pool) {
        cfg.pools.push_back(detail::parse_pool(c, doc.at("pool"), "pool"));
    } else {
        const detail::Json& arr = doc.at("subpools");
        if (!arr.is_array() || arr.empty()) {
            c.add("subpools", "expected a nonempty array of pools");
        } else {
            cfg.multi = true;
            for (std::size_t i = 0; i < arr.size(); ++i)
                cfg.pools.push_back(
                    detail::parse_pool(c, arr[i], "subpools[" + std::to_string(i) + "]"));
        }
    }

    if (const detail::Json* f = detail::find_field(c, doc, "", "price", true))
        detail::parse_price(c, *f, cfg, config_dir);

    if (const detail::Json* f = detail::find_field(c, doc, "", "mode", false)) {
        if (const auto m = detail::as_string(c, *f, "mode")) {
            if (*m == "continuous") cfg.mode = StepMode::Continuous;
            else if (*m == "jump") cfg.mode = StepMode::Jump;
            else c.add("mode", "must be 'continuous' or 'jump'");
        }
    }

    detail::parse_seeds(c, doc, cfg);

    if (const detail::Json* f = detail::find_field(c, doc, "", "takers", false))
        detail::parse_takers(c, *f, cfg);

    if (const detail::Json* f = detail::find_field(c, doc, "", "outputs", false))
        detail::parse_outputs(c, *f, cfg);
    else
        cfg.outputs = {ReportKind::Trace, ReportKind::Metrics, ReportKind::Summary,
                       ReportKind::Plot};

    std::sort(cfg.seeds.begin(), cfg.seeds.end());
    c.finish();
    return cfg;
}

// Canonical serialization: fixed key order, %.17g numbers, sorted seeds,
// resolved file paths.  Loading the output reproduces the same scenario, and
// canonicalizing twice is byte-stable.
inline std::string canonical_config_json(const ScenarioConfig& cfg) {
    using detail::fmt17;
    using detail::json_escape;
    std::string out = "{\n  \"schema\": \"" + json_escape(cfg.schema) + "\",\n";

    auto pool_json = [&](const PoolSpec& p, const char* indent) {
        std::string s = "{\n";
        const bool gm = p.utility.kind == UtilityKind::GeometricMean;
        s += std::string(indent) + "  \"kind\": \"" +
             (gm ? "geometric_mean" : "constant_product") + "\",\n";
        if (gm) s += std::string(indent) + "  \"alpha\": " + fmt17(p.utility.alpha) + ",\n";
        s += std::string(indent) + "  \"x_star\": " + fmt17(p.x_star) + ",\n";
        s += std::string(indent) + "  \"y_star\": " + fmt17(p.y_star) + ",\n";
        s += std::string(indent) + "  \"tau\": " + fmt17(p.tau) + ",\n";
        s += std::string(indent) + "  \"x0\": " + fmt17(p.x0) + ",\n";
        s += std::string(indent) + "  \"y0\": " + fmt17(p.y0) + "\n";
        s += std::string(indent) + "}";
        return s;
    };

    if (!cfg.multi) {
        out += "  \"pool\": " + pool_json(cfg.pools[0], "  ") + ",\n";
    } else {
        out += "  \"subpools\": [\n";
        for (std::size_t i = 0; i < cfg.pools.size(); ++i)
            out += "    " + pool_json(cfg.pools[i], "    ") +
                   (i + 1 < cfg.pools.size() ? ",\n" : "\n");
        out += "  ],\n";
    }

    if (cfg.price_is_gbm) {
        out += "  \"price\": {\n    \"kind\": \"gbm\",\n";
        out += "    \"mu\": " + fmt17(cfg.gbm.mu) + ",\n";
        out += "    \"sigma\": " + fmt17(cfg.gbm.sigma) + ",\n";
        out += "    \"s0\": " + fmt17(cfg.gbm.s0) + ",\n";
        out += "    \"horizon\": " + fmt17(cfg.gbm.horizon) + ",\n";
        out += "    \"steps\": " + std::to_string(cfg.gbm.steps) + "\n  },\n";
    } else {
        out += "  \"price\": {\n    \"kind\": \"csv\",\n";
        out += "    \"file\": \"" + json_escape(cfg.csv_file) + "\"\n  },\n";
    }

    out += std::string("  \"mode\": \"") +
           (cfg.mode == StepMode::Continuous ? "continuous" : "jump") + "\"";

    if (cfg.seeds.size() == 1) {
        out += ",\n  \"seed\": " + std::to_string(cfg.seeds[0]);
    } else if (cfg.seeds.size() > 1) {
        out += ",\n  \"seeds\": [";
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            out += (i ? ", " : "") + std::to_string(cfg.seeds[i]);
        out += "]";
    }

    if (!cfg.takers.empty()) {
        out += ",\n  \"takers\": [\n";
        for (std::size_t i = 0; i < cfg.takers.size(); ++i)
            out += "    {\"time\": " + fmt17(cfg.takers[i].time) +
                   ", \"xi\": " + fmt17(cfg.takers[i].xi) + "}" +
                   (i + 1 < cfg.takers.size() ? ",\n" : "\n");
        out += "  ]";
    }

    out += ",\n  \"outputs\": [";
    for (std::size_t i = 0; i < cfg.outputs.size(); ++i)
        out += std::string(i ? ", " : "") + "\"" + detail::report_name(cfg.outputs[i]) + "\"";
    out += "]\n}\n";
    return out;
}

// ----------------------------- summaries ----------------------------------

struct ScenarioSummary {
    double terminal_price = 0.0;
    double terminal_value = 0.0;
    double terminal_buyhold = 0.0;
    double impermanent_loss = 0.0;
    double total_fee_x = 0.0;
    double total_fee_y = 0.0;
    double hedged_shortfall = 0.0;  // hedged account at start minus at the end
    std::optional<double> lvr;                      // fee-free runs only
    std::optional<double> rebalancing_minus_pool;   // fee-free runs only
    std::int64_t arb_trades = 0;
    std::int64_t taker_trades = 0;
    std::int64_t steps = 0;
};

inline ScenarioSummary summarize_trace(const SimulationTrace& trace) {
    ScenarioSummary s;
    if (trace.steps.empty()) return s;
    const StepRecord& last = trace.steps.back();
    s.terminal_price = last.s_ext;
    s.terminal_value = pool_value(last.state, last.s_ext);
    s.terminal_buyhold = buyhold_value(trace.spec, last.s_ext);
    s.impermanent_loss = s.terminal_buyhold - s.terminal_value;
    s.total_fee_x = last.state.x_fee;
    s.total_fee_y = last.state.y_fee;
    s.steps = static_cast<std::int64_t>(trace.steps.size());
    for (const auto& rec : trace.steps)
        for (const auto& ev : rec.events)
            (ev.source == EventSource::Taker ? s.taker_trades : s.arb_trades) += 1;
    const auto hedged = hedged_value_series(trace);
    s.hedged_shortfall = hedged.front() - hedged.back();
    if (trace.spec.tau == 0.0) {
        const auto dec = lvr_decomposition(trace);
        s.lvr = dec.lvr.back();
        s.rebalancing_minus_pool = dec.rebalancing_wealth.back() - s.terminal_value;
    }
    return s;
}

// ----------------------------- artifact writers ---------------------------

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IOError("cannot open for writing: " + p.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw IOError("write failed: " + p.string());
}

inline const char* source_name(EventSource s) {
    switch (s) {
        case EventSource::IntervalArb: return "interval_arb";
        case EventSource::Taker: return "taker";
        case EventSource::RestoreArb: return "restore_arb";
    }
    return "";
}

inline const char* kind_name(ArbKind k) {
    switch (k) {
        case ArbKind::NoTrade: return "no_trade";
        case ArbKind::BuyFromPool: return "buy_from_pool";
        case ArbKind::SellToPool: return "sell_to_pool";
        case ArbKind::ClampToEmpty: return "clamp_to_empty";
        case ArbKind::ClampToFull: return "clamp_to_full";
    }
    return "";
}

// one JSONL record per step; multi-pool traces tag records with the pool index
inline void append_trace_jsonl(std::string& out, const SimulationTrace& trace, int pool_index) {
    for (const auto& rec : trace.steps) {
        out += "{";
        if (pool_index >= 0) out += "\"pool\": " + std::to_string(pool_index) + ", ";
        out += "\"time\": " + fmt17(rec.time);
        out += ", \"s_ext\": " + fmt17(rec.s_ext);
        out += ", \"x\": " + fmt17(rec.state.x);
        out += ", \"y\": " + fmt17(rec.state.y);
        out += ", \"x_fee\": " + fmt17(rec.state.x_fee);
        out += ", \"y_fee\": " + fmt17(rec.state.y_fee);
        out += ", \"ask\": " + fmt17(rec.ask);
        out += ", \"bid\": " + fmt17(rec.bid);
        out += std::string(", \"at_boundary\": ") + (rec.at_boundary ? "true" : "false");
        out += ", \"psi\": " + fmt17(rec.skorokhod.psi);
        out += ", \"phi\": " + fmt17(rec.skorokhod.phi);
        out += ", \"eta_reg\": " + fmt17(rec.skorokhod.eta_reg);
        out += ", \"x_taker\": " + fmt17(rec.flow.x_taker);
        out += ", \"x_arb\": " + fmt17(rec.flow.x_arb);
        out += ", \"events\": [";
        for (std::size_t e = 0; e < rec.events.size(); ++e) {
            const TradeEvent& ev = rec.events[e];
            out += e ? ", {" : "{";
            out += std::string("\"source\": \"") + source_name(ev.source) + "\"";
            out += std::string(", \"kind\": \"") + kind_name(ev.kind) + "\"";
            out += ", \"xi\": " + fmt17(ev.xi);
            out += ", \"eta\": " + fmt17(ev.eta);
            out += ", \"delta_x\": " + fmt17(ev.delta_x);
            out += ", \"delta_y\": " + fmt17(ev.delta_y);
            out += ", \"fee_x\": " + fmt17(ev.fee_x);
            out += ", \"fee_y\": " + fmt17(ev.fee_y);
            out += ", \"sdx\": " + fmt17(ev.sdx);
            out += ", \"sdxf\": " + fmt17(ev.sdxf);
            out += "}";
        }
        out += "]}\n";
    }
}

inline void append_metrics_csv(std::string& out, const SimulationTrace& trace, int pool_index) {
    const auto series = valuation_series(trace);
    for (const auto& p : series) {
        if (pool_index >= 0) out += std::to_string(pool_index) + ",";
        out += fmt17(p.time) + "," + fmt17(p.value) + "," + fmt17(p.value_buyhold) + "," +
               fmt17(p.il) + "," + fmt17(p.hedge_pnl) + "," + fmt17(p.hedged_value) + ",";
        if (p.lvr) out += fmt17(*p.lvr);
        out += "\n";
    }
}

inline std::string summary_json_body(const ScenarioSummary& s, const char* indent) {
    const std::string in(indent);
    std::string out;
    out += in + "\"steps\": " + std::to_string(s.steps) + ",\n";
    out += in + "\"terminal_price\": " + fmt17(s.terminal_price) + ",\n";
    out += in + "\"terminal_value\": " + fmt17(s.terminal_value) + ",\n";
    out += in + "\"terminal_buyhold_value\": " + fmt17(s.terminal_buyhold) + ",\n";
    out += in + "\"impermanent_loss\": " + fmt17(s.impermanent_loss) + ",\n";
    out += in + "\"total_fees_x\": " + fmt17(s.total_fee_x) + ",\n";
    out += in + "\"total_fees_y\": " + fmt17(s.total_fee_y) + ",\n";
    out += in + "\"hedged_shortfall\": " + fmt17(s.hedged_shortfall) + ",\n";
    if (s.lvr) out += in + "\"lvr\": " + fmt17(*s.lvr) + ",\n";
    if (s.rebalancing_minus_pool)
        out += in + "\"rebalancing_minus_pool\": " + fmt17(*s.rebalancing_minus_pool) + ",\n";
    out += in + "\"arb_trade_count\": " + std::to_string(s.arb_trades) + ",\n";
    out += in + "\"taker_trade_count\": " + std::to_string(s.taker_trades) + "\n";
    return out;
}

}  // namespace detail

// Tidy long-format plot data: band (external price vs quotes), value curves,
// and the regulator path.  The regulator file carries no rows for fee-free
// pools (no band, no regulator).  File names take an optional suffix so
// batch and multi-pool runs stay side by side.
inline void emit_plot_data(const SimulationTrace& trace, const std::filesystem::path& out_dir,
                           const std::string& suffix = "") {
    using detail::fmt17;
    std::string band = "time,series,value\n";
    std::string value = "time,series,value\n";
    std::string regulator = "time,series,value\n";
    const auto series = valuation_series(trace);
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& rec = trace.steps[i];
        const std::string t = fmt17(rec.time);
        band += t + ",s_ext," + fmt17(rec.s_ext) + "\n";
        band += t + ",ask," + fmt17(rec.ask) + "\n";
        band += t + ",bid," + fmt17(rec.bid) + "\n";
        value += t + ",v," + fmt17(series[i].value) + "\n";
        value += t + ",v_buyhold," + fmt17(series[i].value_buyhold) + "\n";
        value += t + ",hedge_pnl," + fmt17(series[i].hedge_pnl) + "\n";
        if (trace.spec.tau != 0.0)
            regulator += t + ",eta_reg," + fmt17(rec.skorokhod.eta_reg) + "\n";
    }
    detail::write_file(out_dir / ("band" + suffix + ".csv"), band);
    detail::write_file(out_dir / ("value" + suffix + ".csv"), value);
    detail::write_file(out_dir / ("regulator" + suffix + ".csv"), regulator);
}

namespace detail {

// runs one seed (or the CSV path) and writes the requested artifacts
inline std::vector<ScenarioSummary> run_one(const ScenarioConfig& cfg, const PricePath& path,
                                            const std::filesystem::path& out_dir,
                                            const std::string& run_suffix,
                                            std::optional<std::uint64_t> seed) {
    std::vector<SimulationTrace> traces;
    if (cfg.multi) {
        traces = simulate_subpools(cfg.pools, path, cfg.takers, cfg.mode);
    } else {
        const CurveGeometry geom = make_geometry(cfg.pools[0]);
        traces.push_back(simulate_reserves(cfg.pools[0], geom, path, cfg.takers, cfg.mode));
    }

    const auto wants = [&](ReportKind k) {
        return std::find(cfg.outputs.begin(), cfg.outputs.end(), k) != cfg.outputs.end();
    };

    if (wants(ReportKind::Trace)) {
        std::string out;
        for (std::size_t j = 0; j < traces.size(); ++j)
            append_trace_jsonl(out, traces[j], cfg.multi ? static_cast<int>(j) : -1);
        write_file(out_dir / ("trace" + run_suffix + ".jsonl"), out);
    }
    if (wants(ReportKind::Metrics)) {
        std::string out = cfg.multi ? "pool,time,value,value_buyhold,il,hedge_pnl,hedged_value,lvr\n"
                                    : "time,value,value_buyhold,il,hedge_pnl,hedged_value,lvr\n";
        for (std::size_t j = 0; j < traces.size(); ++j)
            append_metrics_csv(out, traces[j], cfg.multi ? static_cast<int>(j) : -1);
        write_file(out_dir / ("metrics" + run_suffix + ".csv"), out);
    }

    std::vector<ScenarioSummary> summaries;
    summaries.reserve(traces.size());
    for (const auto& tr : traces) summaries.push_back(summarize_trace(tr));

    if (wants(ReportKind::Summary)) {
        std::string out = "{\n  \"schema\": \"cfmm-lab/summary/1\",\n";
        if (seed) out += "  \"seed\": " + std::to_string(*seed) + ",\n";
        out += std::string("  \"mode\": \"") +
               (cfg.mode == StepMode::Continuous ? "continuous" : "jump") + "\",\n";
        if (!cfg.multi) {
            out += summary_json_body(summaries[0], "  ");
        } else {
            ScenarioSummary combined;
            combined.terminal_price = summaries[0].terminal_price;
            combined.steps = summaries[0].steps;
            for (const auto& s : summaries) {
                combined.terminal_value += s.terminal_value;
                combined.terminal_buyhold += s.terminal_buyhold;
                combined.impermanent_loss += s.impermanent_loss;
                combined.total_fee_x += s.total_fee_x;
                combined.total_fee_y += s.total_fee_y;
                combined.hedged_shortfall += s.hedged_shortfall;
                combined.arb_trades += s.arb_trades;
                combined.taker_trades += s.taker_trades;
            }
            out += "  \"pools\": [\n";
            for (std::size_t j = 0; j < summaries.size(); ++j) {
                out += "    {\n" + summary_json_body(summaries[j], "      ") + "    }";
                out += (j + 1 < summaries.size()) ? ",\n" : "\n";
            }
            out += "  ],\n";
            out += summary_json_body(combined, "  ");
        }
        out += "}\n";
        write_file(out_dir / ("summary" + run_suffix + ".json"), out);
    }
    if (wants(ReportKind::Plot)) {
        for (std::size_t j = 0; j < traces.size(); ++j) {
            const std::string pool_suffix = cfg.multi ? "_pool" + std::to_string(j) : "";
            emit_plot_data(traces[j], out_dir, pool_suffix + run_suffix);
        }
    }
    return summaries;
}

inline unsigned batch_thread_cap() {
    const char* env = std::getenv("CFMM_LAB_THREADS");
    if (!env || !*env) return 1;  // absent means sequential
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
        throw ConfigError("CFMM_LAB_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
}

}  // namespace detail

// Executes the scenario and writes all requested artifacts into out_dir
// (created if missing).  Batch runs suffix file names with the seed and add
// a seed-ordered batch summary; per-run work may execute in parallel under
// CFMM_LAB_THREADS.  Returns the list of files written.
inline std::vector<std::filesystem::path> run_scenario(const ScenarioConfig& cfg,
                                                       const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IOError("cannot create output directory: " + out_dir.string());

    const auto wants = [&](ReportKind k) {
        return std::find(cfg.outputs.begin(), cfg.outputs.end(), k) != cfg.outputs.end();
    };
    auto artifact_names = [&](const std::string& run_suffix) {
        std::vector<std::filesystem::path> fs;
        if (wants(ReportKind::Trace)) fs.push_back(out_dir / ("trace" + run_suffix + ".jsonl"));
        if (wants(ReportKind::Metrics)) fs.push_back(out_dir / ("metrics" + run_suffix + ".csv"));
        if (wants(ReportKind::Summary)) fs.push_back(out_dir / ("summary" + run_suffix + ".json"));
        if (wants(ReportKind::Plot))
            for (std::size_t j = 0; j < (cfg.multi ? cfg.pools.size() : 1); ++j) {
                const std::string pool_suffix = cfg.multi ? "_pool" + std::to_string(j) : "";
                fs.push_back(out_dir / ("band" + pool_suffix + run_suffix + ".csv"));
                fs.push_back(out_dir / ("value" + pool_suffix + run_suffix + ".csv"));
                fs.push_back(out_dir / ("regulator" + pool_suffix + run_suffix + ".csv"));
            }
        return fs;
    };

    std::vector<std::filesystem::path> written;

    if (!cfg.price_is_gbm) {
        std::ifstream f(cfg.csv_file, std::ios::binary);
        if (!f) throw IOError("cannot read price file: " + cfg.csv_file);
        std::stringstream buf;
        buf << f.rdbuf();
        const PricePath path = ingest_csv_path(buf.str(), cfg.csv_file);
        detail::run_one(cfg, path, out_dir, "", std::nullopt);
        return artifact_names("");
    }

    const bool batch = cfg.seeds.size() > 1;
    if (!batch) {
        GbmSource g = cfg.gbm;
        g.seed = cfg.seeds[0];
        const PricePath path =
            generate_gbm_path(g.mu, g.sigma, g.s0, g.horizon, g.steps, g.seed);
        detail::run_one(cfg, path, out_dir, "", cfg.seeds[0]);
        return artifact_names("");
    }

    // batch: one run per seed, files named by seed, optional parallel fan-out
    std::vector<std::vector<ScenarioSummary>> results(cfg.seeds.size());
    std::vector<std::string> failures(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) return;
            try {
                const std::uint64_t seed = cfg.seeds[i];
                const PricePath path = generate_gbm_path(cfg.gbm.mu, cfg.gbm.sigma, cfg.gbm.s0,
                                                         cfg.gbm.horizon, cfg.gbm.steps, seed);
                results[i] = detail::run_one(cfg, path, out_dir, "_" + std::to_string(seed), seed);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const unsigned cap = std::min<std::size_t>(detail::batch_thread_cap(), cfg.seeds.size());
    if (cap <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (unsigned t = 0; t < cap; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        if (!failures[i].empty())
            throw ConfigError("seed " + std::to_string(cfg.seeds[i]) + ": " + failures[i]);

    for (const auto& seed : cfg.seeds) {
        const auto fs = artifact_names("_" + std::to_string(seed));
        written.insert(written.end(), fs.begin(), fs.end());
    }

    // seed-ordered batch roll-up (seeds are stored sorted, so aggregation is
    // independent of which worker finished first)
    if (wants(ReportKind::Summary)) {
        using detail::fmt17;
        std::string out = "{\n  \"schema\": \"cfmm-lab/batch-summary/1\",\n";
        out += std::string("  \"mode\": \"") +
               (cfg.mode == StepMode::Continuous ? "continuous" : "jump") + "\",\n";
        out += "  \"runs\": [\n";
        double mean_value = 0.0, mean_il = 0.0, mean_shortfall = 0.0;
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
            ScenarioSummary total;  // multi-pool runs roll their pools together
            for (const auto& s : results[i]) {
                total.terminal_value += s.terminal_value;
                total.impermanent_loss += s.impermanent_loss;
                total.hedged_shortfall += s.hedged_shortfall;
                total.arb_trades += s.arb_trades;
                total.taker_trades += s.taker_trades;
            }
            mean_value += total.terminal_value;
            mean_il += total.impermanent_loss;
            mean_shortfall += total.hedged_shortfall;
            out += "    {\"seed\": " + std::to_string(cfg.seeds[i]) +
                   ", \"terminal_value\": " + fmt17(total.terminal_value) +
                   ", \"impermanent_loss\": " + fmt17(total.impermanent_loss) +
                   ", \"hedged_shortfall\": " + fmt17(total.hedged_shortfall) +
                   ", \"arb_trade_count\": " + std::to_string(total.arb_trades) +
                   ", \"taker_trade_count\": " + std::to_string(total.taker_trades) + "}";
            out += (i + 1 < cfg.seeds.size()) ? ",\n" : "\n";
        }
        const double n = static_cast<double>(cfg.seeds.size());
        out += "  ],\n  \"aggregate\": {\n";
        out += "    \"runs\": " + std::to_string(cfg.seeds.size()) + ",\n";
        out += "    \"mean_terminal_value\": " + fmt17(mean_value / n) + ",\n";
        out += "    \"mean_impermanent_loss\": " + fmt17(mean_il / n) + ",\n";
        out += "    \"mean_hedged_shortfall\": " + fmt17(mean_shortfall / n) + "\n  }\n}\n";
        detail::write_file(out_dir / "summary.json", out);
        written.push_back(out_dir / "summary.json");
    }
    return written;
}

}  // namespace cfmm
