#include "genagent/replication_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "genagent/numeric_format.hpp"

namespace genagent::replication {

void ReplicationPlan::validate() const {
    if (n_replications < 1 || n_replications > 10000)
        throw std::invalid_argument("ReplicationPlan: n_replications must lie in [1,10000]");
    backend.validate();
}

namespace {

Stat compute_stat(const std::vector<double>& values) {
    Stat s;
    if (values.empty()) return s;
    const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    if (*min_it == *max_it) {
        s.mean = *min_it;
        s.sd = 0.0;
        return s;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    s.mean = mean;
    s.sd = std::sqrt(sq / static_cast<double>(values.size()));
    return s;
}

transcript::Record make_record(const ReplicationPlan& plan, int index, const std::string& raw,
                               const prompts::ParsedReply& parsed, bool transport_failed) {
    transcript::Record r;
    r.variant_id = prompts::variant_name(plan.variant);
    r.p_t = plan.snapshot.p_t;
    r.p_prev = plan.snapshot.p_prev;
    r.p_fund = plan.snapshot.p_fund;
    r.replication_index = index;
    r.raw_text = raw;
    r.model_name = plan.backend.model_name;
    r.temperature = plan.backend.temperature;
    r.timestamp = transcript::utc_timestamp();
    if (transport_failed) {
        r.parse_status = "TRANSPORT_FAILED";
        return r;
    }
    r.parse_status = prompts::parse_status_name(parsed.status);
    if (parsed.weights) {
        r.w_fund = parsed.weights->w_fund;
        r.w_trend = parsed.weights->w_trend;
    }
    if (parsed.expectations) {
        r.e_fund = parsed.expectations->e_fund;
        r.e_trend = parsed.expectations->e_trend;
    }
    return r;
}

std::vector<transcript::Record> issue_missing(const ReplicationPlan& plan,
                                              backends::AgentBackend& backend,
                                              transcript::Store& store,
                                              const std::vector<int>& missing,
                                              bool has_existing) {
    const auto prompt = prompts::render(plan.variant, plan.snapshot, plan.value_format);
    const auto schema = prompts::reply_schema(plan.variant);

    std::vector<transcript::Record> fresh(missing.size());
    std::atomic<size_t> next{0};
    std::atomic<int> transport_failures{0};

    auto worker = [&] {
        for (size_t slot = next.fetch_add(1); slot < missing.size(); slot = next.fetch_add(1)) {
            const int index = missing[slot];
            transcript::Record record;
            try {
                const auto reply = backend.complete(prompt);
                record = make_record(plan, index, reply.raw_text,
                                     prompts::parse_reply(schema, reply.raw_text), false);
            } catch (const backends::BackendError&) {
                transport_failures.fetch_add(1);
                record = make_record(plan, index, "", {}, true);
            }
            store.append(record);
            fresh[slot] = std::move(record);
        }
    };

    const int n_threads =
        std::max(1, std::min<int>(plan.backend.max_in_flight, static_cast<int>(missing.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (!missing.empty() && transport_failures.load() == static_cast<int>(missing.size()) &&
        !has_existing)
        throw std::runtime_error("ALL_REPLICATIONS_FAILED: no reply received for any replication");

    return fresh;
}

}  // namespace

CellAggregate aggregate_records(const ham::MarketSnapshot& snapshot,
                                std::span<const transcript::Record> records, AveragingMode mode,
                                int corrupted_lines) {
    std::vector<transcript::Record> sorted(records.begin(), records.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.replication_index < b.replication_index;
    });

    CellAggregate agg;
    agg.snapshot = snapshot;
    agg.n_replications = static_cast<int>(sorted.size()) + corrupted_lines;
    agg.n_failed = corrupted_lines;

    std::vector<double> w_fund, e_fund, e_trend, alphas, betas;
    for (const auto& r : sorted) {
        if (r.parse_status != "OK") {
            ++agg.n_failed;
            continue;
        }
        ++agg.n_ok;
        if (r.w_fund) w_fund.push_back(*r.w_fund);
        if (r.e_fund && r.e_trend) {
            e_fund.push_back(*r.e_fund);
            e_trend.push_back(*r.e_trend);
            if (mode == AveragingMode::PerReplicationRatios) {
                if (auto a = ham::extract_alpha(*r.e_fund, snapshot))
                    alphas.push_back(*a);
                else
                    ++agg.n_undefined_alpha;
                if (auto b = ham::extract_beta(*r.e_trend, snapshot))
                    betas.push_back(*b);
                else
                    ++agg.n_undefined_beta;
            }
        }
    }

    agg.w_fund = compute_stat(w_fund);
    agg.e_fund = compute_stat(e_fund);
    agg.e_trend = compute_stat(e_trend);
    if (mode == AveragingMode::PerReplicationRatios) {
        agg.alpha = compute_stat(alphas);
        agg.beta = compute_stat(betas);
    } else if (agg.e_fund.mean) {
        if (auto a = ham::extract_alpha(*agg.e_fund.mean, snapshot))
            agg.alpha.mean = a;
        else
            agg.n_undefined_alpha = static_cast<int>(e_fund.size());
        if (auto b = ham::extract_beta(*agg.e_trend.mean, snapshot))
            agg.beta.mean = b;
        else
            agg.n_undefined_beta = static_cast<int>(e_trend.size());
    }
    return agg;
}

CellAggregate run_plan(const ReplicationPlan& plan, backends::AgentBackend& backend,
                       transcript::Store& store, AveragingMode mode) {
    plan.validate();
    std::vector<int> indices(plan.n_replications);
    for (int i = 0; i < plan.n_replications; ++i) indices[i] = i;
    const auto fresh = issue_missing(plan, backend, store, indices, false);
    return aggregate_records(plan.snapshot, fresh, mode, 0);
}

CellAggregate resume_with_records(const ReplicationPlan& plan, backends::AgentBackend& backend,
                                  transcript::Store& store,
                                  std::vector<transcript::Record>& records, int corrupted_lines,
                                  AveragingMode mode) {
    plan.validate();
    std::vector<transcript::Record> usable;
    std::set<int> seen;
    for (const auto& r : records) {
        if (r.replication_index < 0 || r.replication_index >= plan.n_replications) continue;
        if (!seen.insert(r.replication_index).second) continue;
        usable.push_back(r);
    }
    std::vector<int> missing;
    for (int i = 0; i < plan.n_replications; ++i)
        if (!seen.count(i)) missing.push_back(i);

    const auto fresh = issue_missing(plan, backend, store, missing, !usable.empty());
    records.insert(records.end(), fresh.begin(), fresh.end());
    usable.insert(usable.end(), fresh.begin(), fresh.end());
    return aggregate_records(plan.snapshot, usable, mode, corrupted_lines);
}

CellAggregate resume(const ReplicationPlan& plan, backends::AgentBackend& backend,
                     transcript::Store& store, AveragingMode mode) {
    plan.validate();
    std::vector<std::string> warnings;
    const auto all = store.read_all(&warnings);
    const std::string key = backends::replay_key(prompts::variant_name(plan.variant),
                                                 plan.snapshot.p_t, plan.snapshot.p_prev,
                                                 plan.snapshot.p_fund);
    std::vector<transcript::Record> matching;
    for (const auto& r : all)
        if (backends::replay_key(r.variant_id, r.p_t, r.p_prev, r.p_fund) == key)
            matching.push_back(r);

    auto agg = resume_with_records(plan, backend, store, matching,
                                   static_cast<int>(warnings.size()), mode);
    agg.warnings = std::move(warnings);
    return agg;
}

namespace {
std::string opt_field(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string{};
}
}  // namespace

void write_aggregate_csv_header(std::ostream& out) {
    out << "p_t,p_prev,p_fund,variant_id,model,temperature,n_ok,n_failed,"
           "n_undefined_alpha,n_undefined_beta,mean_w_fund,sd_w_fund,mean_e_fund,sd_e_fund,"
           "mean_e_trend,sd_e_trend,mean_alpha,sd_alpha,mean_beta,sd_beta\n";
}

void write_aggregate_csv_row(std::ostream& out, std::string_view variant_id,
                             std::string_view model, double temperature,
                             const CellAggregate& agg) {
    out << format_number(agg.snapshot.p_t) << ',' << format_number(agg.snapshot.p_prev) << ','
        << format_number(agg.snapshot.p_fund) << ',' << variant_id << ',' << model << ','
        << format_number(temperature) << ',' << agg.n_ok << ',' << agg.n_failed << ','
        << agg.n_undefined_alpha << ',' << agg.n_undefined_beta << ','
        << opt_field(agg.w_fund.mean) << ',' << opt_field(agg.w_fund.sd) << ','
        << opt_field(agg.e_fund.mean) << ',' << opt_field(agg.e_fund.sd) << ','
        << opt_field(agg.e_trend.mean) << ',' << opt_field(agg.e_trend.sd) << ','
        << opt_field(agg.alpha.mean) << ',' << opt_field(agg.alpha.sd) << ','
        << opt_field(agg.beta.mean) << ',' << opt_field(agg.beta.sd) << '\n';
}

}  // namespace genagent::replication
