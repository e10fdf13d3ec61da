// ---------------------------------------------------------------------------
// cfmm-lab: scenario runner for the cfmm simulation library.
//
//   cfmm-lab run       --config cfg.json --out dir [--seed N] [--mode M]
//   cfmm-lab validate  --config cfg.json
//   cfmm-lab plot-data --config cfg.json --out dir [--seed N] [--mode M]
//   cfmm-lab bench
//
// Failures print a machine-readable error document on stdout, mirror it to
// <out>/error.json when an output directory is known, and exit nonzero.
// ---------------------------------------------------------------------------

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cfmm/scenario.hpp"

namespace {

using namespace cfmm;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IOError("cannot read config file: " + p.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::string error_json(const std::string& type, const std::string& message,
                       const std::vector<Violation>& violations) {
    using detail::json_escape;
    std::string out = "{\n  \"error\": {\n";
    out += "    \"type\": \"" + json_escape(type) + "\",\n";
    out += "    \"message\": \"" + json_escape(message) + "\",\n";
    out += "    \"violations\": [";
    for (std::size_t i = 0; i < violations.size(); ++i) {
        out += i ? ",\n      {" : "\n      {";
        out += "\"field\": \"" + json_escape(violations[i].field) + "\", ";
        out += "\"message\": \"" + json_escape(violations[i].message) + "\"}";
    }
    out += violations.empty() ? "]\n" : "\n    ]\n";
    out += "  }\n}\n";
    return out;
}

// prints the error document and mirrors it next to the other artifacts
int fail(const std::string& type, const std::string& message,
         const std::vector<Violation>& violations, const std::optional<std::string>& out_dir) {
    const std::string doc = error_json(type, message, violations);
    std::fputs(doc.c_str(), stdout);
    if (out_dir) {
        std::error_code ec;
        std::filesystem::create_directories(*out_dir, ec);
        if (!ec) {
            std::ofstream f(std::filesystem::path(*out_dir) / "error.json",
                            std::ios::binary | std::ios::trunc);
            f << doc;
        }
    }
    return 1;
}

struct CommonOpts {
    std::string config;
    std::optional<std::string> out_dir;
    std::optional<std::int64_t> seed;
    std::optional<std::string> mode;
};

ScenarioConfig load_config(const CommonOpts& opts) {
    const std::filesystem::path cfg_path = opts.config;
    ScenarioConfig cfg = parse_scenario(slurp(cfg_path),
                                        cfg_path.has_parent_path() ? cfg_path.parent_path()
                                                                   : std::filesystem::path("."));
    if (opts.seed) {
        if (!cfg.price_is_gbm)
            throw ConfigError("--seed applies only to scenarios with a gbm price source");
        if (*opts.seed < 0) throw ConfigError("--seed must be nonnegative");
        cfg.seeds = {static_cast<std::uint64_t>(*opts.seed)};
    }
    if (opts.mode) {
        if (*opts.mode == "continuous") cfg.mode = StepMode::Continuous;
        else if (*opts.mode == "jump") cfg.mode = StepMode::Jump;
        else throw ConfigError("--mode must be 'continuous' or 'jump'");
    }
    return cfg;
}

int dispatch(const std::string& verb, const CommonOpts& opts) {
    try {
        if (verb == "validate") {
            const ScenarioConfig cfg = load_config(opts);
            std::fputs(canonical_config_json(cfg).c_str(), stdout);
            return 0;
        }
        ScenarioConfig cfg = load_config(opts);
        if (verb == "plot-data") cfg.outputs = {ReportKind::Plot};
        const auto files = run_scenario(cfg, *opts.out_dir);
        std::string listing = "{\n  \"written\": [";
        for (std::size_t i = 0; i < files.size(); ++i)
            listing += std::string(i ? ",\n    \"" : "\n    \"") +
                       detail::json_escape(files[i].string()) + "\"";
        listing += "\n  ]\n}\n";
        std::fputs(listing.c_str(), stdout);
        return 0;
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), e.violations(), opts.out_dir);
    } catch (const ParseError& e) {
        return fail("parse", e.what(), {}, opts.out_dir);
    } catch (const ConfigError& e) {
        return fail("config", e.what(), {}, opts.out_dir);
    } catch (const ModeError& e) {
        return fail("mode", e.what(), {}, opts.out_dir);
    } catch (const IOError& e) {
        return fail("io", e.what(), {}, opts.out_dir);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), {}, opts.out_dir);
    }
}

// fixed-size workloads so timings are comparable across hosts and runs
int run_bench() {
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    PoolSpec spec;
    spec.x_star = 5.0;
    spec.y_star = 5.0;
    spec.tau = 0.003;
    spec.x0 = 10.0;
    spec.y0 = 10.0;
    const CurveGeometry geom = make_geometry(spec);

    auto t0 = clock::now();
    const PricePath path = generate_gbm_path(0.0, 0.5, 1.0, 1.0, 100000, 42);
    const double gen_ms = ms_since(t0);

    t0 = clock::now();
    const SimulationTrace trace = simulate_reserves(spec, geom, path);
    const double sim_ms = ms_since(t0);

    t0 = clock::now();
    const auto hedged = hedged_value_series(trace);
    const auto series = valuation_series(trace);
    const double metrics_ms = ms_since(t0);

    t0 = clock::now();
    PoolState st = initial_state(spec);
    double acc = 0.0;
    for (int i = 0; i < 200000; ++i) {
        const double xi = (i % 2 == 0) ? 0.01 : -0.01;
        const SwapReceipt r = execute_swap(spec, geom, st, xi);
        st = r.post_state;
        acc += r.eta;
    }
    const double swap_ms = ms_since(t0);

    std::string out = "{\n";
    out += "  \"gbm_path_100k_ms\": " + detail::fmt17(gen_ms) + ",\n";
    out += "  \"simulate_100k_steps_ms\": " + detail::fmt17(sim_ms) + ",\n";
    out += "  \"metrics_100k_steps_ms\": " + detail::fmt17(metrics_ms) + ",\n";
    out += "  \"swaps_200k_ms\": " + detail::fmt17(swap_ms) + ",\n";
    out += "  \"checksum\": " + detail::fmt17(acc + hedged.back() + series.back().value) + "\n";
    out += "}\n";
    std::fputs(out.c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic CFMM market simulation toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_dir_raw;
    std::int64_t seed_raw = 0;
    std::string mode_raw;

    auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", opts.config, "scenario configuration file")
            ->required();
        auto* seed_opt = sub->add_option("--seed", seed_raw,
                                         "override the scenario seed (gbm price source)");
        auto* mode_opt =
            sub->add_option("--mode", mode_raw, "override stepping mode: continuous or jump");
        auto* out_opt = sub->add_option("--out", out_dir_raw, "output directory");
        if (needs_out) out_opt->required();
        sub->callback([&, seed_opt, mode_opt, out_opt]() {
            if (seed_opt->count()) opts.seed = seed_raw;
            if (mode_opt->count()) opts.mode = mode_raw;
            if (out_opt->count()) opts.out_dir = out_dir_raw;
        });
    };

    CLI::App* run = app.add_subcommand("run", "execute a scenario and write artifacts");
    add_common(run, true);
    CLI::App* validate =
        app.add_subcommand("validate", "check a scenario and print its canonical form");
    add_common(validate, false);
    CLI::App* plot =
        app.add_subcommand("plot-data", "write tidy plot-data CSVs for a scenario");
    add_common(plot, true);
    app.add_subcommand("bench", "time fixed library workloads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string verb = app.get_subcommands().front()->get_name();
    if (verb == "bench") return run_bench();
    return dispatch(verb, opts);
}
