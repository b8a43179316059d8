// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit status is the number of
// failed gating criteria.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "genagent/agent_backends.hpp"
#include "genagent/experiments.hpp"
#include "genagent/ham_core.hpp"
#include "genagent/prompt_kit.hpp"
#include "genagent/render_svg.hpp"
#include "genagent/replication_engine.hpp"

using namespace genagent;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "PASS" : "FAIL") << " " << id << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!pass) ++g_failures;
}

bool close_rel(double a, double b, double tol) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
    return std::fabs(a - b) <= tol * scale;
}

std::string fresh_dir(const char* tag) {
    static std::atomic<int> counter{0};
    const auto dir = fs::temp_directory_path() /
                     ("genagent_acceptance_" + std::string(tag) + "_" +
                      std::to_string(counter.fetch_add(1)));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- criterion 1: extraction round-trips ------------------------------------

void criterion_1() {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937 rng(20260823);
    std::uniform_real_distribution<double> price(100, 3000);
    std::uniform_real_distribution<double> alpha_dist(0, 1);
    std::uniform_real_distribution<double> beta_dist(-3, 3);
    bool pass = true;
    for (int i = 0; i < 10000 && pass; ++i) {
        double p_t = price(rng), p_prev = price(rng), p_fund = price(rng);
        if (std::fabs(p_fund - p_t) < 1) p_fund = p_t + 1;
        if (std::fabs(p_t - p_prev) < 1) p_prev = p_t - 1;
        ham::MarketSnapshot s(p_t, p_prev, p_fund);
        const double alpha = alpha_dist(rng), beta = beta_dist(rng);
        const auto a = ham::extract_alpha(ham::fundamentalist_expectation(s, alpha), s);
        const auto b = ham::extract_beta(ham::trend_follower_expectation(s, beta), s);
        pass = a && b && close_rel(*a, alpha, 1e-9) && close_rel(*b, beta, 1e-9);
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    pass = pass && elapsed.count() < 1000;
    report(1, "extraction round-trips on 10000 randomized snapshots", pass,
           std::to_string(elapsed.count()) + " ms");
}

// --- criterion 2: aggregation identity --------------------------------------

void criterion_2() {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> price(500, 3000);
    std::uniform_real_distribution<double> drift(-50, 50);
    std::uniform_real_distribution<double> unit(0, 1);
    std::uniform_real_distribution<double> beta_dist(-3, 3);
    bool pass = true;
    for (int i = 0; i < 10000 && pass; ++i) {
        const double p_t = price(rng);
        ham::MarketSnapshot s(p_t, p_t + drift(rng), price(rng));
        const double delta = unit(rng), alpha = unit(rng), beta = beta_dist(rng);
        const double direct = ham::reduced_form_next_price(s, delta, alpha, beta);
        const double composed = ham::aggregate_expected_price(
            ham::StrategyWeights::from_fundamentalist_share(delta),
            ham::ExpectationPair(ham::fundamentalist_expectation(s, alpha),
                                 ham::trend_follower_expectation(s, beta)));
        const double variation =
            ham::expected_price_variation(delta, ham::ReactionParams{alpha, beta}, s);
        pass = close_rel(direct, composed, 1e-9) && variation == direct - s.p_t;
    }
    report(2, "aggregation identity and expected-variation identity on 10000 inputs", pass);
}

// --- criterion 3: dogmatic-fundamentalist limits -----------------------------

void criterion_3() {
    experiments::GridSpec spec;
    bool pass = true;
    for (double gap : spec.gaps()) {
        for (double trend : spec.trends()) {
            const auto s = spec.snapshot_at(gap, trend);
            const double expected = ham::reduced_form_next_price(s, 1.0, 1.0, 0.0);
            if (expected != s.p_fund) pass = false;
            const double error = ham::forecast_error(expected, s.p_t);
            if (gap == 0) {
                if (error != 0) pass = false;
            } else if ((error > 0) != (gap > 0) || error == 0) {
                pass = false;
            }
        }
    }
    report(3, "dogmatic-fundamentalist limits on all 121 grid cells", pass);
}

// --- criterion 4: oracle end-to-end grid vs golden tables --------------------

struct GridArtifacts {
    std::map<std::string, std::string> csv;  // quantity name -> CSV bytes
    std::map<std::string, std::string> svg;
    experiments::GridResult result;
};

GridArtifacts run_oracle_grid(transcript::Store& store, int reps) {
    experiments::GridSpec spec;
    experiments::GridRunConfig config;
    config.n_replications = reps;
    config.backend.kind = backends::BackendKind::Oracle;
    backends::OracleBackend backend;
    GridArtifacts artifacts;
    artifacts.result = experiments::run_grid(spec, config, backend, store);
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
        const auto table = experiments::grid_table(artifacts.result, q);
        std::ostringstream csv;
        experiments::write_grid_table_csv(csv, table);
        artifacts.csv[name] = csv.str();
        std::ostringstream svg;
        render::HeatmapOptions opts;
        opts.midpoint = midpoint;
        opts.title = name;
        render::render_heatmap_svg(svg, table, opts);
        artifacts.svg[name] = svg.str();
    }
    return artifacts;
}

void criterion_4() {
    const auto started = std::chrono::steady_clock::now();
    transcript::Store store((fs::path(fresh_dir("grid")) / "transcripts.jsonl").string());
    const auto artifacts = run_oracle_grid(store, 50);

    bool pass = true;
    std::string detail;
    for (const auto& [name, csv] : artifacts.csv) {
        const auto golden = read_file(fs::path(GENAGENT_GOLDEN_DIR) / (name + ".csv"));
        if (golden.empty() || golden != csv) {
            pass = false;
            detail = "golden mismatch: " + name;
        }
    }

    int gap_nonneg_cells = 0;
    for (const auto& cell : artifacts.result.cells) {
        if (cell.gap >= 0) {
            ++gap_nonneg_cells;
            if (!cell.composition.w_fund.mean || *cell.composition.w_fund.mean != 0.9)
                pass = false;
        }
        if (cell.gap != 0 &&
            (!cell.expectation.alpha.mean || *cell.expectation.alpha.mean != 0.95))
            pass = false;
        if (cell.trend != 0) {
            const bool contrarian = cell.gap >= 0 && cell.trend < 0;
            const double expected_beta = contrarian ? -0.5 : 0.5;
            if (!cell.expectation.beta.mean || *cell.expectation.beta.mean != expected_beta)
                pass = false;
        }
    }
    if (gap_nonneg_cells != 66) pass = false;

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    pass = pass && elapsed.count() < 10000;
    report(4, "oracle end-to-end grid matches golden tables byte-for-byte", pass,
           detail.empty() ? std::to_string(elapsed.count()) + " ms" : detail);
}

// --- criterion 5: grid geometry ----------------------------------------------

void criterion_5() {
    experiments::GridSpec spec;
    const auto gaps = spec.gaps();
    const auto trends = spec.trends();
    bool pass = spec.cell_count() == 121 && gaps.size() == 11 && trends.size() == 11;
    for (size_t i = 0; i < gaps.size() && pass; ++i) pass = gaps[i] == -600.0 + 120.0 * i;
    for (size_t i = 0; i < trends.size() && pass; ++i) pass = trends[i] == -100.0 + 20.0 * i;
    report(5, "default grid is 121 cells with the stated axes", pass);
}

// --- criterion 6: replication accounting with a replay fixture ---------------

void criterion_6() {
    std::vector<transcript::Record> fixture;
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> w(0.3, 0.9);
    for (int i = 0; i < 50; ++i) {
        transcript::Record r;
        r.variant_id = "composition_v0";
        r.p_t = 1333;
        r.p_prev = 1313;
        r.p_fund = 1453;
        r.replication_index = i;
        if (i == 31) {
            r.raw_text = "definitely the fundamentalist one";
        } else {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", w(rng));
            const double wf = std::strtod(buf, nullptr);
            std::snprintf(buf, sizeof(buf), "%.2f, %.2f", wf, 1.0 - wf);
            r.raw_text = buf;
        }
        fixture.push_back(r);
    }
    backends::ReplayBackend backend(fixture);
    replication::ReplicationPlan plan;
    plan.snapshot = ham::MarketSnapshot(1333, 1313, 1453);
    plan.n_replications = 50;
    const auto store_path = fs::path(fresh_dir("replay")) / "transcripts.jsonl";
    transcript::Store store(store_path.string());
    const auto agg = replication::run_plan(plan, backend, store);

    bool pass = agg.n_ok == 49 && agg.n_failed == 1 && agg.w_fund.mean.has_value();

    // independent re-reader: raw JSONL, no library aggregation involved
    double sum = 0;
    int n = 0;
    std::ifstream in(store_path);
    std::string line;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || j.value("parse_status", "") != "OK") continue;
        sum += j.at("w_fund").get<double>();
        ++n;
    }
    pass = pass && n == 49 && std::fabs(*agg.w_fund.mean - sum / n) <= 1e-12;
    report(6, "replay fixture accounting (49 ok + 1 malformed) matches independent reader",
           pass);
}

// --- criterion 7: moving average vs brute force -------------------------------

void criterion_7() {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> len(13, 80);
    std::uniform_real_distribution<double> value(-100, 100);
    bool pass = true;
    for (int trial = 0; trial < 1000 && pass; ++trial) {
        const int n = len(rng);
        std::vector<double> series(n);
        for (auto& v : series) v = value(rng);
        const auto ma = ham::centered_moving_average(std::span<const double>(series), 13);
        for (int i = 0; i < n; ++i) {
            if (i < 6 || i >= n - 6) {
                if (ma[i]) pass = false;
                continue;
            }
            double sum = 0;
            for (int j = i - 6; j <= i + 6; ++j) sum += series[j];
            if (!ma[i] || std::fabs(*ma[i] - sum / 13) > 1e-12) pass = false;
        }
    }
    report(7, "13-month centered moving average matches brute force on 1000 series", pass);
}

// --- criterion 8: parser robustness -------------------------------------------

void criterion_8() {
    bool pass = true;
    std::mt19937 rng(8);
    std::uniform_int_distribution<int> len(0, 80);
    std::uniform_int_distribution<int> byte(0, 255);
    try {
        for (int i = 0; i < 100000; ++i) {
            std::string s(len(rng), '\0');
            for (auto& c : s) c = static_cast<char>(byte(rng));
            (void)prompts::parse_weights(s);
            (void)prompts::parse_expectations(s);
            (void)prompts::parse_unified(s);
        }
    } catch (...) {
        pass = false;
    }
    pass = pass && prompts::parse_weights("0.7, 0.3").ok() &&
           prompts::parse_weights("\"0.70\", \"0.30\"").ok() &&
           prompts::parse_expectations("1429.5,1353.0").ok() &&
           prompts::parse_unified("\"0.8\", \"0.2\", \"1440\", \"1350\"").ok();
    const auto renorm = prompts::parse_weights("0.49, 0.49");
    pass = pass && renorm.ok() && std::fabs(renorm.weights->w_fund - 0.5) <= 1e-12;
    pass = pass && prompts::parse_weights("0.45, 0.52").status ==
                       prompts::ParseStatus::SumViolation &&
           prompts::parse_weights("0.50, 0.52").ok();
    report(8, "parsers are total over 100000 random byte strings", pass);
}

// --- criterion 9: determinism and resumability --------------------------------

void criterion_9() {
    transcript::Store store_a((fs::path(fresh_dir("det")) / "t.jsonl").string());
    transcript::Store store_b((fs::path(fresh_dir("det")) / "t.jsonl").string());
    const auto run_a = run_oracle_grid(store_a, 50);
    const auto run_b = run_oracle_grid(store_b, 50);
    bool pass = run_a.csv == run_b.csv && run_a.svg == run_b.svg;

    // resume a half-complete single-snapshot plan
    backends::OracleBackend oracle;
    replication::ReplicationPlan plan;
    plan.snapshot = ham::MarketSnapshot(1333, 1313, 1453);
    plan.n_replications = 50;

    const auto full_path = fs::path(fresh_dir("resume")) / "full.jsonl";
    transcript::Store full_store(full_path.string());
    const auto full = replication::run_plan(plan, oracle, full_store);

    const auto half_path = fs::path(fresh_dir("resume")) / "half.jsonl";
    {
        std::ifstream in(full_path);
        std::ofstream out(half_path);
        std::string line;
        for (int i = 0; i < 25 && std::getline(in, line); ++i) out << line << '\n';
    }
    struct Counting : backends::AgentBackend {
        backends::OracleBackend inner;
        int count = 0;
        backends::AgentReply complete(const prompts::RenderedPrompt& p) override {
            ++count;
            return inner.complete(p);
        }
    } counting;
    transcript::Store half_store(half_path.string());
    const auto resumed = replication::resume(plan, counting, half_store);
    pass = pass && counting.count == 25 && resumed.n_ok == 50 &&
           resumed.w_fund.mean == full.w_fund.mean && resumed.w_fund.sd == full.w_fund.sd;
    report(9, "byte-identical reruns and exact resumption", pass);
}

// --- criterion 10: live remote check (optional, non-gating) -------------------

void criterion_10() {
    const char* live = std::getenv("GENAGENT_LIVE");
    const char* key = std::getenv("OPENAI_API_KEY");
    if (live == nullptr || std::string(live) != "1" || key == nullptr || *key == '\0') {
        std::cout << "SKIP 10: live remote directional check (set GENAGENT_LIVE=1 and "
                     "OPENAI_API_KEY to enable; non-gating)\n";
        return;
    }
    try {
        backends::AgentBackendConfig cfg;
        cfg.kind = backends::BackendKind::Remote;
        cfg.endpoint_url = "https://api.openai.com/v1/chat/completions";
        cfg.model_name = "gpt-4o-mini";
        cfg.temperature = 1.0;
        backends::RemoteBackend backend(cfg);

        experiments::GridSpec spec;
        spec.trend_min = -20;
        spec.trend_max = 20;
        spec.trend_step = 20;
        experiments::GridRunConfig config;
        config.n_replications = 50;
        config.backend = cfg;
        transcript::Store store((fs::path(fresh_dir("live")) / "t.jsonl").string());
        const auto result = experiments::run_grid(spec, config, backend, store);

        bool alpha_in_range = true;
        double sum_above = 0, sum_below = 0;
        int n_above = 0, n_below = 0;
        for (const auto& cell : result.cells) {
            if (cell.expectation.alpha.mean &&
                (*cell.expectation.alpha.mean < 0 || *cell.expectation.alpha.mean > 1))
                alpha_in_range = false;
            if (!cell.composition.w_fund.mean) continue;
            if (cell.gap >= 0) {
                sum_above += *cell.composition.w_fund.mean;
                ++n_above;
            } else {
                sum_below += *cell.composition.w_fund.mean;
                ++n_below;
            }
        }
        const bool directional =
            n_above > 0 && n_below > 0 && sum_above / n_above > sum_below / n_below;
        std::cout << (alpha_in_range && directional ? "PASS" : "WARN")
                  << " 10: live remote directional check (non-gating)\n";
    } catch (const std::exception& e) {
        std::cout << "WARN 10: live remote check failed to run: " << e.what()
                  << " (non-gating)\n";
    }
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (g_failures == 0)
        std::cout << "acceptance: all gating criteria passed\n";
    else
        std::cout << "acceptance: " << g_failures << " criteria FAILED\n";
    return g_failures;
}
