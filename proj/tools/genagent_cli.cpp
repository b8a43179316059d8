// genagent command-line driver: grid and time-series experiment runs, the
// robustness matrix, figure rendering, and transcript cache verification.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "genagent/agent_backends.hpp"
#include "genagent/experiments.hpp"
#include "genagent/numeric_format.hpp"
#include "genagent/render_svg.hpp"
#include "genagent/replication_engine.hpp"

namespace fs = std::filesystem;
using namespace genagent;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTransport = 4;

struct CommonOpts {
    std::string backend = "oracle";
    std::string model = "gpt-4o-mini";
    double temperature = 1.0;
    int reps = 50;
    std::string out = "out";
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string replay_store;
    int max_in_flight = 4;
    int max_retries = 5;
    bool allow_network = false;
    bool no_render = false;
    std::string variant = "composition_v0";
    std::string expectation_variant = "expectation_v0";
    bool unified = false;
    std::string averaging = "per-replication";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--backend", o.backend, "Agent backend: remote, oracle, or replay")
        ->check(CLI::IsMember({"remote", "oracle", "replay"}));
    cmd->add_option("--model", o.model, "Model name for remote runs");
    cmd->add_option("--temperature", o.temperature, "Sampling temperature");
    cmd->add_option("--reps", o.reps, "Replications per snapshot");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--endpoint", o.endpoint, "Chat-completions endpoint URL");
    cmd->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
    cmd->add_option("--replay-store", o.replay_store, "Replay transcript JSONL path");
    cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent request bound");
    cmd->add_option("--max-retries", o.max_retries, "Transport retry budget");
    cmd->add_flag("--allow-network", o.allow_network,
                  "Acknowledge that a remote run reaches the network and costs money");
    cmd->add_flag("--no-render", o.no_render, "Skip SVG rendering");
    cmd->add_option("--variant", o.variant, "Composition prompt variant");
    cmd->add_option("--expectation-variant", o.expectation_variant,
                    "Expectation prompt variant");
    cmd->add_flag("--unified", o.unified, "Use the single unified prompt for both quantities");
    cmd->add_option("--averaging", o.averaging,
                    "alpha/beta averaging: per-replication or mean-expectations")
        ->check(CLI::IsMember({"per-replication", "mean-expectations"}));
}

backends::AgentBackendConfig backend_config(const CommonOpts& o) {
    backends::AgentBackendConfig cfg;
    const auto kind = backends::parse_backend_kind(o.backend);
    if (!kind) throw std::invalid_argument("unknown backend " + o.backend);
    cfg.kind = *kind;
    cfg.model_name = o.model;
    cfg.temperature = o.temperature;
    cfg.endpoint_url = o.endpoint;
    cfg.api_key_env = o.api_key_env;
    cfg.replay_path = o.replay_store;
    cfg.max_in_flight = o.max_in_flight;
    cfg.max_retries = o.max_retries;
    if (cfg.kind == backends::BackendKind::Remote && !o.allow_network)
        throw std::invalid_argument(
            "remote backend requires --allow-network (remote runs are non-deterministic and "
            "cost money)");
    return cfg;
}

prompts::PromptVariant variant_or_throw(const std::string& name) {
    const auto v = prompts::parse_variant(name);
    if (!v) throw std::invalid_argument("unknown prompt variant " + name);
    return *v;
}

replication::AveragingMode averaging_mode(const CommonOpts& o) {
    return o.averaging == "mean-expectations"
               ? replication::AveragingMode::RatiosOfMeanExpectations
               : replication::AveragingMode::PerReplicationRatios;
}

std::string run_id(const CommonOpts& o, double p_t) {
    return "t" + format_number(o.temperature) + "_" + o.model + "_pt" + format_number(p_t) +
           "_" + o.variant + "_n" + std::to_string(o.reps);
}

// Rebuild per-plan aggregate rows from a transcript store, in a canonical
// order. The drivers write this after a run; verify-cache recomputes it.
std::string aggregates_csv_from_records(const std::vector<transcript::Record>& records,
                                        replication::AveragingMode mode) {
    std::map<std::string, std::vector<transcript::Record>> groups;
    for (const auto& r : records) {
        std::ostringstream key;
        key << r.variant_id << '|' << format_number(r.p_t) << '|' << format_number(r.p_prev)
            << '|' << format_number(r.p_fund) << '|' << r.model_name << '|'
            << format_number(r.temperature);
        groups[key.str()].push_back(r);
    }
    std::ostringstream out;
    replication::write_aggregate_csv_header(out);
    for (const auto& [key, recs] : groups) {
        const auto& first = recs.front();
        const ham::MarketSnapshot snapshot(first.p_t, first.p_prev, first.p_fund);
        const auto agg = replication::aggregate_records(snapshot, recs, mode);
        replication::write_aggregate_csv_row(out, first.variant_id, first.model_name,
                                             first.temperature, agg);
    }
    return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw experiments::DataError("cannot write " + path.string());
    out << content;
}

void write_grid_outputs(const fs::path& dir, const experiments::GridResult& result,
                        const CommonOpts& opts, const std::string& id, bool render_svgs) {
    const struct {
        experiments::GridQuantity q;
        double midpoint;
    } quantities[] = {
        {experiments::GridQuantity::Delta, 0.5},
        {experiments::GridQuantity::Alpha, 0.5},
        {experiments::GridQuantity::Beta, 0.0},
        {experiments::GridQuantity::ExpectedVariation, 0.0},
    };
    for (const auto& [q, midpoint] : quantities) {
        const std::string name(experiments::grid_quantity_name(q));
        const auto table = experiments::grid_table(result, q);
        {
            std::ostringstream csv;
            experiments::write_grid_table_csv(csv, table);
            write_file(dir / (name + ".csv"), csv.str());
        }
        {
            std::ostringstream meta;
            meta << "run_id=" << id << "\nquantity=" << name
                 << "\np_t=" << format_number(result.spec.p_t)
                 << "\ngap_min=" << format_number(result.spec.gap_min)
                 << "\ngap_max=" << format_number(result.spec.gap_max)
                 << "\ngap_step=" << format_number(result.spec.gap_step)
                 << "\ntrend_min=" << format_number(result.spec.trend_min)
                 << "\ntrend_max=" << format_number(result.spec.trend_max)
                 << "\ntrend_step=" << format_number(result.spec.trend_step)
                 << "\ncomposition_variant="
                 << prompts::variant_name(result.config.composition_variant)
                 << "\nexpectation_variant="
                 << prompts::variant_name(result.config.expectation_variant)
                 << "\nunified=" << (result.config.unified ? "true" : "false")
                 << "\nmodel=" << opts.model
                 << "\ntemperature=" << format_number(opts.temperature)
                 << "\nn_replications=" << result.config.n_replications
                 << "\nbackend=" << opts.backend << "\naveraging=" << opts.averaging << "\n";
            write_file(dir / (name + ".meta"), meta.str());
        }
        if (render_svgs) {
            render::HeatmapOptions hopts;
            hopts.midpoint = midpoint;
            hopts.title = name;
            std::ostringstream svg;
            render::render_heatmap_svg(svg, table, hopts);
            write_file(dir / (name + ".svg"), svg.str());
        }
    }
}

int cmd_run_grid(const CommonOpts& opts, const experiments::GridSpec& spec) {
    spec.validate();
    fs::create_directories(opts.out);
    const auto backend_cfg = backend_config(opts);
    auto backend = backends::make_backend(backend_cfg);
    transcript::Store store((fs::path(opts.out) / "transcripts.jsonl").string());

    experiments::GridRunConfig config;
    config.composition_variant = variant_or_throw(opts.variant);
    config.expectation_variant = variant_or_throw(opts.expectation_variant);
    config.unified = opts.unified;
    config.n_replications = opts.reps;
    config.backend = backend_cfg;
    config.averaging = averaging_mode(opts);

    const auto result = experiments::run_grid(spec, config, *backend, store);
    write_grid_outputs(opts.out, result, opts, run_id(opts, spec.p_t), !opts.no_render);
    write_file(fs::path(opts.out) / "aggregates.csv",
               aggregates_csv_from_records(store.read_all(nullptr), config.averaging));
    std::cout << "grid run complete: " << result.cells.size() << " cells -> " << opts.out
              << "\n";
    return 0;
}

int cmd_run_timeseries(const CommonOpts& opts, const experiments::TimeSeriesSpec& spec) {
    fs::create_directories(opts.out);
    const auto backend_cfg = backend_config(opts);
    auto backend = backends::make_backend(backend_cfg);
    transcript::Store store((fs::path(opts.out) / "transcripts.jsonl").string());

    experiments::TimeSeriesRunConfig config;
    config.composition_variant = variant_or_throw(opts.variant);
    config.expectation_variant = variant_or_throw(opts.expectation_variant);
    config.unified = opts.unified;
    config.n_replications = opts.reps;
    config.backend = backend_cfg;
    config.averaging = averaging_mode(opts);

    const auto rows = experiments::run_timeseries(spec, config, *backend, store);
    {
        std::ostringstream csv;
        experiments::write_timeseries_csv(csv, rows);
        write_file(fs::path(opts.out) / "timeseries.csv", csv.str());
    }
    if (!opts.no_render) {
        std::ostringstream svg;
        render::render_series_svg(svg, rows);
        write_file(fs::path(opts.out) / "timeseries.svg", svg.str());
    }
    write_file(fs::path(opts.out) / "aggregates.csv",
               aggregates_csv_from_records(store.read_all(nullptr), config.averaging));
    std::cout << "time-series run complete: " << rows.size() << " months -> " << opts.out
              << "\n";
    return 0;
}

int cmd_run_matrix(CommonOpts opts, const experiments::GridSpec& base,
                   const experiments::RobustnessMatrix& matrix) {
    const auto points = experiments::expand_matrix(matrix);
    const fs::path root(opts.out);
    for (const auto& point : points) {
        CommonOpts point_opts = opts;
        point_opts.temperature = point.temperature;
        point_opts.model = point.model;
        point_opts.reps = point.n_replications;
        point_opts.variant = prompts::variant_name(point.variant);
        point_opts.unified = point.variant == prompts::PromptVariant::Unified;
        point_opts.out = (root / point.run_id).string();
        experiments::GridSpec spec = base;
        spec.p_t = point.p_t;
        const int rc = cmd_run_grid(point_opts, spec);
        if (rc != 0) return rc;
    }
    std::cout << "matrix complete: " << points.size() << " runs -> " << opts.out << "\n";
    return 0;
}

int cmd_verify_cache(const std::string& store_path, const std::string& aggregates_path,
                     const std::string& averaging) {
    std::vector<std::string> warnings;
    const auto records = transcript::read_jsonl(store_path, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (records.empty()) throw experiments::DataError("no records in " + store_path);
    const auto mode = averaging == "mean-expectations"
                          ? replication::AveragingMode::RatiosOfMeanExpectations
                          : replication::AveragingMode::PerReplicationRatios;
    const std::string rebuilt = aggregates_csv_from_records(records, mode);
    std::ifstream in(aggregates_path);
    if (!in) throw experiments::DataError("cannot open " + aggregates_path);
    std::stringstream stored;
    stored << in.rdbuf();
    if (stored.str() != rebuilt)
        throw experiments::DataError("aggregate mismatch: " + aggregates_path +
                                     " does not match re-aggregation of " + store_path);
    std::cout << "verify-cache: " << aggregates_path << " matches " << store_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generative-agent market-expectation experiment pipeline"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);

    CommonOpts opts;
    experiments::GridSpec grid;
    experiments::TimeSeriesSpec ts;
    std::string ts_start, ts_end;
    experiments::RobustnessMatrix matrix;
    std::vector<std::string> matrix_variants{"composition_v0"};
    std::string table_path, out_path, series_path;
    double midpoint = 0.5;
    std::string verify_store, verify_aggregates, verify_averaging = "per-replication";

    auto* run_grid_cmd = app.add_subcommand("run-grid", "Run the artificial-market grid");
    add_common(run_grid_cmd, opts);
    run_grid_cmd->add_option("--pt", grid.p_t, "Current price level");
    run_grid_cmd->add_option("--gap-min", grid.gap_min);
    run_grid_cmd->add_option("--gap-max", grid.gap_max);
    run_grid_cmd->add_option("--gap-step", grid.gap_step);
    run_grid_cmd->add_option("--trend-min", grid.trend_min);
    run_grid_cmd->add_option("--trend-max", grid.trend_max);
    run_grid_cmd->add_option("--trend-step", grid.trend_step);

    auto* run_ts_cmd = app.add_subcommand("run-timeseries", "Run the historical time series");
    add_common(run_ts_cmd, opts);
    run_ts_cmd->add_option("--input", ts.input_path, "Monthly date,price,dividend CSV")
        ->required();
    run_ts_cmd->add_option("--start", ts_start, "First month (YYYY-MM)");
    run_ts_cmd->add_option("--end", ts_end, "Last month (YYYY-MM)");
    run_ts_cmd->add_option("--growth", ts.gordon_growth, "Gordon dividend growth per month");
    run_ts_cmd->add_option("--discount", ts.gordon_discount, "Gordon discount rate per month");
    run_ts_cmd->add_option("--ma-window", ts.ma_window, "Centered moving-average window (odd)");

    auto* run_matrix_cmd = app.add_subcommand("run-matrix", "Run the robustness matrix");
    add_common(run_matrix_cmd, opts);
    run_matrix_cmd->add_option("--pt", grid.p_t, "Baseline current price (grid base)");
    run_matrix_cmd->add_option("--temps", matrix.temperatures, "Temperature sweep")
        ->delimiter(',');
    run_matrix_cmd->add_option("--models", matrix.models, "Model sweep")->delimiter(',');
    run_matrix_cmd->add_option("--pts", matrix.p_t_levels, "Current-price sweep")
        ->delimiter(',');
    run_matrix_cmd->add_option("--variants", matrix_variants, "Prompt-variant sweep")
        ->delimiter(',');
    run_matrix_cmd->add_option("--reps-list", matrix.replication_counts,
                               "Replication-count sweep")
        ->delimiter(',');

    auto* render_heatmap_cmd =
        app.add_subcommand("render-heatmap", "Render a grid table CSV as an SVG heatmap");
    render_heatmap_cmd->add_option("--table", table_path, "gap,trend,value CSV")->required();
    render_heatmap_cmd->add_option("--out", out_path, "Output SVG path")->required();
    render_heatmap_cmd->add_option("--midpoint", midpoint, "Diverging color-scale midpoint");

    auto* render_series_cmd =
        app.add_subcommand("render-series", "Render a time-series table CSV as an SVG chart");
    render_series_cmd->add_option("--table", series_path, "Time-series CSV")->required();
    render_series_cmd->add_option("--out", out_path, "Output SVG path")->required();

    auto* verify_cmd = app.add_subcommand(
        "verify-cache", "Re-aggregate a transcript store and diff against stored aggregates");
    verify_cmd->add_option("--store", verify_store, "Transcript JSONL")->required();
    verify_cmd->add_option("--aggregates", verify_aggregates, "Aggregates CSV")->required();
    verify_cmd->add_option("--averaging", verify_averaging)
        ->check(CLI::IsMember({"per-replication", "mean-expectations"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run_grid_cmd->parsed()) return cmd_run_grid(opts, grid);
        if (run_ts_cmd->parsed()) {
            if (!ts_start.empty()) {
                ts.start = experiments::parse_month(ts_start);
                if (!ts.start) throw std::invalid_argument("bad --start month " + ts_start);
            }
            if (!ts_end.empty()) {
                ts.end = experiments::parse_month(ts_end);
                if (!ts.end) throw std::invalid_argument("bad --end month " + ts_end);
            }
            return cmd_run_timeseries(opts, ts);
        }
        if (run_matrix_cmd->parsed()) {
            matrix.prompt_variants.clear();
            for (const auto& name : matrix_variants)
                matrix.prompt_variants.push_back(variant_or_throw(name));
            return cmd_run_matrix(opts, grid, matrix);
        }
        if (render_heatmap_cmd->parsed()) {
            const auto table = experiments::read_grid_table_csv(table_path);
            render::HeatmapOptions hopts;
            hopts.midpoint = midpoint;
            std::ostringstream svg;
            render::render_heatmap_svg(svg, table, hopts);
            write_file(out_path, svg.str());
            return 0;
        }
        if (render_series_cmd->parsed()) {
            const auto rows = experiments::read_timeseries_csv(series_path);
            std::ostringstream svg;
            render::render_series_svg(svg, rows);
            write_file(out_path, svg.str());
            return 0;
        }
        if (verify_cmd->parsed())
            return cmd_verify_cache(verify_store, verify_aggregates, verify_averaging);
    } catch (const backends::BackendError& e) {
        std::cerr << "error: transport: " << e.what() << "\n";
        return kExitTransport;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
