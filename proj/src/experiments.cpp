#include "genagent/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "genagent/numeric_format.hpp"

namespace genagent::experiments {

void GridSpec::validate() const {
    if (gap_step <= 0 || trend_step <= 0)
        throw std::invalid_argument("GridSpec: steps must be positive");
    if (gap_max < gap_min || trend_max < trend_min)
        throw std::invalid_argument("GridSpec: ranges must be non-empty");
    if (!(p_t > 0)) throw std::invalid_argument("GridSpec: p_t must be positive");
}

namespace {
std::vector<double> axis(double lo, double hi, double step) {
    std::vector<double> out;
    const int n = static_cast<int>(std::llround((hi - lo) / step)) + 1;
    for (int i = 0; i < n; ++i) out.push_back(lo + i * step);
    return out;
}
}  // namespace

std::vector<double> GridSpec::gaps() const { return axis(gap_min, gap_max, gap_step); }
std::vector<double> GridSpec::trends() const { return axis(trend_min, trend_max, trend_step); }

int GridSpec::cell_count() const {
    return static_cast<int>(gaps().size() * trends().size());
}

ham::MarketSnapshot GridSpec::snapshot_at(double gap, double trend) const {
    return ham::MarketSnapshot(p_t, p_t - trend, p_t + gap);
}

namespace {

// Expected price variation with the convention that a term whose price gap
// is zero contributes zero even when its reaction parameter is undefined
// (the parameter is unidentifiable exactly when its multiplier vanishes).
std::optional<double> variation_from_means(double gap, double trend,
                                           const std::optional<double>& delta,
                                           const std::optional<double>& alpha,
                                           const std::optional<double>& beta) {
    if (!delta) return std::nullopt;
    double total = 0.0;
    if (gap != 0.0) {
        if (!alpha) return std::nullopt;
        total += *delta * *alpha * gap;
    }
    if (trend != 0.0) {
        if (!beta) return std::nullopt;
        total += (1.0 - *delta) * *beta * trend;
    }
    return total;
}

replication::ReplicationPlan make_plan(prompts::PromptVariant variant,
                                       const ham::MarketSnapshot& snapshot, int n,
                                       const backends::AgentBackendConfig& backend) {
    replication::ReplicationPlan plan;
    plan.variant = variant;
    plan.snapshot = snapshot;
    plan.n_replications = n;
    plan.backend = backend;
    return plan;
}

// Mean per-replication variation, pairing composition and expectation
// records by replication index.
std::optional<double> variation_per_replication(const ham::MarketSnapshot& snapshot,
                                                std::span<const transcript::Record> comp,
                                                std::span<const transcript::Record> expect) {
    const double gap = snapshot.p_fund - snapshot.p_t;
    const double trend = snapshot.p_t - snapshot.p_prev;
    std::map<int, double> delta_by_index;
    for (const auto& r : comp)
        if (r.parse_status == "OK" && r.w_fund) delta_by_index[r.replication_index] = *r.w_fund;

    double sum = 0.0;
    int n = 0;
    for (const auto& r : expect) {
        if (r.parse_status != "OK" || !r.e_fund || !r.e_trend) continue;
        auto it = delta_by_index.find(r.replication_index);
        if (it == delta_by_index.end()) continue;
        const auto alpha = ham::extract_alpha(*r.e_fund, snapshot);
        const auto beta = ham::extract_beta(*r.e_trend, snapshot);
        const auto v = variation_from_means(gap, trend, it->second, alpha, beta);
        if (!v) continue;
        sum += *v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

// One upfront read of the store, grouped by snapshot/variant key, so a run
// over many plans does not re-read a growing transcript file per plan.
class StoreIndex {
  public:
    explicit StoreIndex(transcript::Store& store) {
        for (auto& r : store.read_all(&warnings_))
            by_key_[backends::replay_key(r.variant_id, r.p_t, r.p_prev, r.p_fund)].push_back(
                std::move(r));
    }

    replication::CellAggregate resume(const replication::ReplicationPlan& plan,
                                      backends::AgentBackend& backend, transcript::Store& store,
                                      replication::AveragingMode mode) {
        auto& records = by_key_[backends::replay_key(prompts::variant_name(plan.variant),
                                                     plan.snapshot.p_t, plan.snapshot.p_prev,
                                                     plan.snapshot.p_fund)];
        auto agg = replication::resume_with_records(plan, backend, store, records,
                                                    static_cast<int>(warnings_.size()), mode);
        agg.warnings = warnings_;
        return agg;
    }

  private:
    std::map<std::string, std::vector<transcript::Record>> by_key_;
    std::vector<std::string> warnings_;
};

}  // namespace

GridResult run_grid(const GridSpec& spec, const GridRunConfig& config,
                    backends::AgentBackend& backend, transcript::Store& store) {
    spec.validate();
    GridResult result;
    result.spec = spec;
    result.config = config;
    StoreIndex index(store);

    for (double gap : spec.gaps()) {
        for (double trend : spec.trends()) {
            GridCellResult cell;
            cell.gap = gap;
            cell.trend = trend;
            const auto snapshot = spec.snapshot_at(gap, trend);
            if (config.unified) {
                const auto plan = make_plan(prompts::PromptVariant::Unified, snapshot,
                                            config.n_replications, config.backend);
                cell.composition = index.resume(plan, backend, store, config.averaging);
                cell.expectation = cell.composition;
            } else {
                cell.composition = index.resume(
                    make_plan(config.composition_variant, snapshot, config.n_replications,
                              config.backend),
                    backend, store, config.averaging);
                cell.expectation = index.resume(
                    make_plan(config.expectation_variant, snapshot, config.n_replications,
                              config.backend),
                    backend, store, config.averaging);
            }
            if (config.variation == VariationMode::CellMeans) {
                cell.expected_variation =
                    variation_from_means(gap, trend, cell.composition.w_fund.mean,
                                         cell.expectation.alpha.mean, cell.expectation.beta.mean);
            }
            result.cells.push_back(std::move(cell));
        }
    }

    if (config.variation == VariationMode::PerReplication) {
        const auto all = store.read_all(nullptr);
        std::map<std::string, std::vector<transcript::Record>> by_key;
        for (const auto& r : all)
            by_key[backends::replay_key(r.variant_id, r.p_t, r.p_prev, r.p_fund)].push_back(r);
        const auto comp_variant = config.unified ? prompts::PromptVariant::Unified
                                                 : config.composition_variant;
        const auto exp_variant = config.unified ? prompts::PromptVariant::Unified
                                                : config.expectation_variant;
        for (auto& cell : result.cells) {
            const auto snapshot = spec.snapshot_at(cell.gap, cell.trend);
            const auto ck = backends::replay_key(prompts::variant_name(comp_variant),
                                                 snapshot.p_t, snapshot.p_prev, snapshot.p_fund);
            const auto ek = backends::replay_key(prompts::variant_name(exp_variant),
                                                 snapshot.p_t, snapshot.p_prev, snapshot.p_fund);
            cell.expected_variation =
                variation_per_replication(snapshot, by_key[ck], by_key[ek]);
        }
    }
    return result;
}

std::string_view grid_quantity_name(GridQuantity q) {
    switch (q) {
        case GridQuantity::Delta: return "delta";
        case GridQuantity::Alpha: return "alpha";
        case GridQuantity::Beta: return "beta";
        case GridQuantity::ExpectedVariation: return "expected_variation";
    }
    return "delta";
}

GridTable grid_table(const GridResult& result, GridQuantity q) {
    GridTable table;
    table.gaps = result.spec.gaps();
    table.trends = result.spec.trends();
    table.values.resize(table.gaps.size() * table.trends.size());
    size_t i = 0;
    for (const auto& cell : result.cells) {
        std::optional<double> v;
        switch (q) {
            case GridQuantity::Delta: v = cell.composition.w_fund.mean; break;
            case GridQuantity::Alpha: v = cell.expectation.alpha.mean; break;
            case GridQuantity::Beta: v = cell.expectation.beta.mean; break;
            case GridQuantity::ExpectedVariation: v = cell.expected_variation; break;
        }
        table.values[i++] = v;
    }
    return table;
}

void write_grid_table_csv(std::ostream& out, const GridTable& table) {
    out << "gap,trend,value\n";
    size_t i = 0;
    for (double gap : table.gaps) {
        for (double trend : table.trends) {
            out << format_number(gap) << ',' << format_number(trend) << ',';
            if (table.values[i]) out << format_number(*table.values[i]);
            out << '\n';
            ++i;
        }
    }
}

GridTable read_grid_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid table " + path);
    std::string line;
    if (!std::getline(in, line) || line != "gap,trend,value")
        throw DataError("grid table " + path + ": expected header gap,trend,value");

    struct Entry {
        double gap, trend;
        std::optional<double> value;
    };
    std::vector<Entry> entries;
    std::vector<double> gaps, trends;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string g, t, v;
        if (!std::getline(ss, g, ',') || !std::getline(ss, t, ','))
            throw DataError("grid table " + path + ": malformed row: " + line);
        std::getline(ss, v, ',');
        Entry e{std::stod(g), std::stod(t), std::nullopt};
        if (!v.empty()) e.value = std::stod(v);
        entries.push_back(e);
        gaps.push_back(e.gap);
        trends.push_back(e.trend);
    }
    auto uniq = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(gaps);
    uniq(trends);
    GridTable table;
    table.gaps = gaps;
    table.trends = trends;
    table.values.resize(gaps.size() * trends.size());
    for (const auto& e : entries) {
        const auto gi = std::lower_bound(gaps.begin(), gaps.end(), e.gap) - gaps.begin();
        const auto ti = std::lower_bound(trends.begin(), trends.end(), e.trend) - trends.begin();
        table.values[gi * trends.size() + ti] = e.value;
    }
    return table;
}

std::string MonthDate::str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
}

MonthDate MonthDate::next() const {
    return month == 12 ? MonthDate{year + 1, 1} : MonthDate{year, month + 1};
}

std::optional<MonthDate> parse_month(std::string_view text) {
    if (text.size() != 7 || text[4] != '-') return std::nullopt;
    int year = 0, month = 0;
    for (int i = 0; i < 4; ++i) {
        if (text[i] < '0' || text[i] > '9') return std::nullopt;
        year = year * 10 + (text[i] - '0');
    }
    for (int i = 5; i < 7; ++i) {
        if (text[i] < '0' || text[i] > '9') return std::nullopt;
        month = month * 10 + (text[i] - '0');
    }
    if (month < 1 || month > 12) return std::nullopt;
    return MonthDate{year, month};
}

std::vector<MonthlyRow> load_monthly_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input CSV " + path);
    std::string line;
    if (!std::getline(in, line) || line != "date,price,dividend")
        throw DataError("input CSV " + path + ": expected header date,price,dividend");

    std::vector<MonthlyRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string d, p, v;
        if (!std::getline(ss, d, ',') || !std::getline(ss, p, ',') || !std::getline(ss, v))
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed row");
        const auto date = parse_month(d);
        if (!date) throw DataError(path + ":" + std::to_string(lineno) + ": bad date " + d);
        MonthlyRow row{*date, std::stod(p), std::stod(v)};
        if (!(row.price > 0) || row.dividend < 0)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": price must be > 0 and dividend >= 0");
        if (!rows.empty()) {
            const auto expected = rows.back().date.next();
            if (row.date != expected)
                throw DataError("DATA_GAP: missing month " + expected.str() + " in " + path);
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<TimeSeriesRow> run_timeseries(const TimeSeriesSpec& spec,
                                          const TimeSeriesRunConfig& config,
                                          backends::AgentBackend& backend,
                                          transcript::Store& store) {
    if (spec.ma_window < 1 || spec.ma_window % 2 == 0)
        throw std::invalid_argument("TimeSeriesSpec: ma_window must be odd and positive");
    auto data = load_monthly_csv(spec.input_path);
    if (spec.start || spec.end) {
        std::vector<MonthlyRow> filtered;
        for (const auto& r : data) {
            if (spec.start && r.date < *spec.start) continue;
            if (spec.end && *spec.end < r.date) continue;
            filtered.push_back(r);
        }
        data = std::move(filtered);
    }
    if (data.size() < 2) throw DataError("time series needs at least two months in range");

    StoreIndex index(store);
    std::vector<TimeSeriesRow> rows;
    for (size_t i = 1; i < data.size(); ++i) {
        TimeSeriesRow row;
        row.date = data[i].date;
        row.price = data[i].price;
        row.fundamental =
            ham::gordon_fundamental(data[i].dividend, spec.gordon_growth, spec.gordon_discount);
        if (!(row.fundamental > 0))
            throw DataError("non-positive fundamental at " + row.date.str());
        const ham::MarketSnapshot snapshot(row.price, data[i - 1].price, row.fundamental);

        replication::CellAggregate comp, expect;
        if (config.unified) {
            comp = index.resume(make_plan(prompts::PromptVariant::Unified, snapshot,
                                          config.n_replications, config.backend),
                                backend, store, config.averaging);
            expect = comp;
        } else {
            comp = index.resume(make_plan(config.composition_variant, snapshot,
                                          config.n_replications, config.backend),
                                backend, store, config.averaging);
            expect = index.resume(make_plan(config.expectation_variant, snapshot,
                                            config.n_replications, config.backend),
                                  backend, store, config.averaging);
        }
        row.mean_w_fund = comp.w_fund.mean;
        row.mean_alpha = expect.alpha.mean;
        row.mean_beta = expect.beta.mean;
        const auto variation =
            variation_from_means(snapshot.p_fund - snapshot.p_t, snapshot.p_t - snapshot.p_prev,
                                 row.mean_w_fund, row.mean_alpha, row.mean_beta);
        if (variation) row.expected_price = snapshot.p_t + *variation;
        if (row.expected_price && i + 1 < data.size())
            row.forecast_error = ham::forecast_error(*row.expected_price, data[i + 1].price);
        rows.push_back(std::move(row));
    }

    if (rows.size() >= static_cast<size_t>(spec.ma_window)) {
        std::vector<std::optional<double>> w;
        w.reserve(rows.size());
        for (const auto& r : rows) w.push_back(r.mean_w_fund);
        const auto ma = ham::centered_moving_average(std::span<const std::optional<double>>(w),
                                                     spec.ma_window);
        for (size_t i = 0; i < rows.size(); ++i) rows[i].w_fund_ma = ma[i];
    }
    return rows;
}

namespace {
std::string opt_field(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string{};
}
}  // namespace

void write_timeseries_csv(std::ostream& out, const std::vector<TimeSeriesRow>& rows) {
    out << "date,price,fundamental,mean_w_fund,w_fund_ma,mean_alpha,mean_beta,"
           "expected_price,forecast_error\n";
    for (const auto& r : rows) {
        out << r.date.str() << ',' << format_number(r.price) << ','
            << format_number(r.fundamental) << ',' << opt_field(r.mean_w_fund) << ','
            << opt_field(r.w_fund_ma) << ',' << opt_field(r.mean_alpha) << ','
            << opt_field(r.mean_beta) << ',' << opt_field(r.expected_price) << ','
            << opt_field(r.forecast_error) << '\n';
    }
}

std::vector<TimeSeriesRow> read_timeseries_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open time-series table " + path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError("time-series table " + path + ": missing header");
    std::vector<TimeSeriesRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        fields.resize(9);
        const auto date = parse_month(fields[0]);
        if (!date) throw DataError("time-series table " + path + ": bad date " + fields[0]);
        TimeSeriesRow r;
        r.date = *date;
        r.price = std::stod(fields[1]);
        r.fundamental = std::stod(fields[2]);
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        r.mean_w_fund = opt(fields[3]);
        r.w_fund_ma = opt(fields[4]);
        r.mean_alpha = opt(fields[5]);
        r.mean_beta = opt(fields[6]);
        r.expected_price = opt(fields[7]);
        r.forecast_error = opt(fields[8]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<MatrixPoint> expand_matrix(const RobustnessMatrix& matrix) {
    auto temperatures = matrix.temperatures;
    auto models = matrix.models;
    auto p_t_levels = matrix.p_t_levels;
    auto variants = matrix.prompt_variants;
    auto counts = matrix.replication_counts;
    std::sort(temperatures.begin(), temperatures.end());
    std::sort(models.begin(), models.end());
    std::sort(p_t_levels.begin(), p_t_levels.end());
    std::sort(variants.begin(), variants.end());
    std::sort(counts.begin(), counts.end());

    std::vector<MatrixPoint> points;
    for (double temp : temperatures)
        for (const auto& model : models)
            for (double p_t : p_t_levels)
                for (auto variant : variants)
                    for (int n : counts) {
                        MatrixPoint p{temp, model, p_t, variant, n, ""};
                        p.run_id = "t" + format_number(temp) + "_" + model + "_pt" +
                                   format_number(p_t) + "_" +
                                   std::string(prompts::variant_name(variant)) + "_n" +
                                   std::to_string(n);
                        points.push_back(std::move(p));
                    }
    return points;
}

}  // namespace genagent::experiments
