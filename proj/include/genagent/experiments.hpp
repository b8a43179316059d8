#pragma once

// Experiment drivers: the artificial-market grid, the historical monthly
// time series, and the robustness matrix that sweeps prompts, models,
// temperatures, price levels, and replication counts.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "genagent/agent_backends.hpp"
#include "genagent/ham_core.hpp"
#include "genagent/prompt_kit.hpp"
#include "genagent/replication_engine.hpp"
#include "genagent/transcript.hpp"

namespace genagent::experiments {

// The 11x11 lattice over (fundamental - price, price - lagged price)
// deviations at a fixed current price.
struct GridSpec {
    double p_t = 1333;
    double gap_min = -600, gap_max = 600, gap_step = 120;
    double trend_min = -100, trend_max = 100, trend_step = 20;

    void validate() const;
    std::vector<double> gaps() const;
    std::vector<double> trends() const;
    int cell_count() const;
    ham::MarketSnapshot snapshot_at(double gap, double trend) const;
};

// Per-cell expected price variation: from the cell's mean delta/alpha/beta
// (the default), or averaged over per-replication variations paired by index.
enum class VariationMode { CellMeans, PerReplication };

struct GridRunConfig {
    prompts::PromptVariant composition_variant = prompts::PromptVariant::CompositionV0;
    prompts::PromptVariant expectation_variant = prompts::PromptVariant::ExpectationV0;
    bool unified = false;  // single unified plan per cell instead of two
    int n_replications = 50;
    backends::AgentBackendConfig backend;
    replication::AveragingMode averaging = replication::AveragingMode::PerReplicationRatios;
    VariationMode variation = VariationMode::CellMeans;
};

struct GridCellResult {
    double gap = 0;
    double trend = 0;
    replication::CellAggregate composition;
    replication::CellAggregate expectation;
    std::optional<double> expected_variation;
};

struct GridResult {
    GridSpec spec;
    GridRunConfig config;
    std::vector<GridCellResult> cells;  // gaps ascending, trends ascending within
};

GridResult run_grid(const GridSpec& spec, const GridRunConfig& config,
                    backends::AgentBackend& backend, transcript::Store& store);

// One value per cell, extracted from a grid result.
enum class GridQuantity { Delta, Alpha, Beta, ExpectedVariation };
std::string_view grid_quantity_name(GridQuantity q);

struct GridTable {
    std::vector<double> gaps;
    std::vector<double> trends;
    std::vector<std::optional<double>> values;  // row-major: gap index * trends + trend index

    std::optional<double>& at(size_t gap_index, size_t trend_index) {
        return values[gap_index * trends.size() + trend_index];
    }
    const std::optional<double>& at(size_t gap_index, size_t trend_index) const {
        return values[gap_index * trends.size() + trend_index];
    }
};

GridTable grid_table(const GridResult& result, GridQuantity q);
void write_grid_table_csv(std::ostream& out, const GridTable& table);
GridTable read_grid_table_csv(const std::string& path);

struct MonthDate {
    int year = 0;
    int month = 0;  // 1..12

    std::string str() const;
    bool operator==(const MonthDate&) const = default;
    auto operator<=>(const MonthDate&) const = default;
    MonthDate next() const;
};
std::optional<MonthDate> parse_month(std::string_view text);

struct MonthlyRow {
    MonthDate date;
    double price = 0;
    double dividend = 0;
};

// Input contract: header "date,price,dividend", date as YYYY-MM, consecutive
// monthly rows. A missing month raises a DATA_GAP error naming the month.
std::vector<MonthlyRow> load_monthly_csv(const std::string& path);

struct TimeSeriesSpec {
    std::string input_path;
    std::optional<MonthDate> start;
    std::optional<MonthDate> end;
    double gordon_growth = 0.0058;    // per month; placeholder, calibrate per sample
    double gordon_discount = 0.0075;  // per month; placeholder, calibrate per sample
    int ma_window = 13;
};

struct TimeSeriesRunConfig {
    prompts::PromptVariant composition_variant = prompts::PromptVariant::CompositionV0;
    prompts::PromptVariant expectation_variant = prompts::PromptVariant::ExpectationV0;
    bool unified = false;
    int n_replications = 50;
    backends::AgentBackendConfig backend;
    replication::AveragingMode averaging = replication::AveragingMode::PerReplicationRatios;
};

struct TimeSeriesRow {
    MonthDate date;
    double price = 0;
    double fundamental = 0;
    std::optional<double> mean_w_fund;
    std::optional<double> w_fund_ma;
    std::optional<double> mean_alpha;
    std::optional<double> mean_beta;
    std::optional<double> expected_price;
    std::optional<double> forecast_error;
};

std::vector<TimeSeriesRow> run_timeseries(const TimeSeriesSpec& spec,
                                          const TimeSeriesRunConfig& config,
                                          backends::AgentBackend& backend,
                                          transcript::Store& store);

void write_timeseries_csv(std::ostream& out, const std::vector<TimeSeriesRow>& rows);
std::vector<TimeSeriesRow> read_timeseries_csv(const std::string& path);

struct RobustnessMatrix {
    std::vector<double> temperatures{1.0};
    std::vector<std::string> models{"gpt-4o-mini"};
    std::vector<double> p_t_levels{1333};
    std::vector<prompts::PromptVariant> prompt_variants{prompts::PromptVariant::CompositionV0};
    std::vector<int> replication_counts{50};
};

struct MatrixPoint {
    double temperature = 1.0;
    std::string model;
    double p_t = 1333;
    prompts::PromptVariant variant = prompts::PromptVariant::CompositionV0;
    int n_replications = 50;
    std::string run_id;
};

// Deterministic lexicographic expansion with stable run identifiers.
std::vector<MatrixPoint> expand_matrix(const RobustnessMatrix& matrix);

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace genagent::experiments
