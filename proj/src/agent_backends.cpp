#include "genagent/agent_backends.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <thread>

#include <json.hpp>

#include "genagent/numeric_format.hpp"

namespace genagent::backends {

using nlohmann::json;

std::string_view backend_kind_name(BackendKind k) {
    switch (k) {
        case BackendKind::Remote: return "remote";
        case BackendKind::Oracle: return "oracle";
        case BackendKind::Replay: return "replay";
    }
    return "oracle";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) {
    for (BackendKind k : {BackendKind::Remote, BackendKind::Oracle, BackendKind::Replay})
        if (backend_kind_name(k) == name) return k;
    return std::nullopt;
}

void AgentBackendConfig::validate() const {
    if (temperature < 0.0 || temperature > 2.0)
        throw std::invalid_argument("AgentBackendConfig: temperature must lie in [0,2]");
    if (max_retries < 0 || max_retries > 10)
        throw std::invalid_argument("AgentBackendConfig: max_retries must lie in [0,10]");
    if (max_in_flight < 1)
        throw std::invalid_argument("AgentBackendConfig: max_in_flight must be >= 1");
    if (kind == BackendKind::Remote && (endpoint_url.empty() || api_key_env.empty()))
        throw std::invalid_argument(
            "AgentBackendConfig: remote backend requires endpoint_url and api_key_env");
    if (kind == BackendKind::Replay && replay_path.empty())
        throw std::invalid_argument("AgentBackendConfig: replay backend requires replay_path");
}

ham::StrategyWeights oracle_composition(const ham::MarketSnapshot& s) {
    const double gap = s.p_fund - s.p_t;
    const double trend = s.p_t - s.p_prev;
    double w_fund;
    if (gap >= 0.0) {
        w_fund = 0.9;
    } else if (trend < 0.0) {
        w_fund = 0.35;
    } else {
        // Mean-reversion intensity rises with the size of the overpricing.
        w_fund = 0.5 + 0.4 * std::min(1.0, std::fabs(gap) / 600.0);
    }
    return ham::StrategyWeights(w_fund, 1.0 - w_fund);
}

ham::ExpectationPair oracle_expectations(const ham::MarketSnapshot& s) {
    const double e_fund = ham::fundamentalist_expectation(s, 0.95);
    const bool contrarian = s.p_fund >= s.p_t && s.p_t < s.p_prev;
    const double beta = contrarian ? -0.5 : 0.5;
    return ham::ExpectationPair(e_fund, ham::trend_follower_expectation(s, beta));
}

namespace {

std::string format_weight(double w) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", w);
    return buf;
}

std::string oracle_reply_text(const prompts::RenderedPrompt& prompt) {
    const auto schema = prompts::reply_schema(prompt.variant);
    const auto& s = prompt.snapshot;
    switch (schema) {
        case prompts::ReplySchema::TwoWeights: {
            auto w = oracle_composition(s);
            return format_weight(w.w_fund) + ", " + format_weight(w.w_trend);
        }
        case prompts::ReplySchema::TwoPrices: {
            auto e = oracle_expectations(s);
            return format_value(e.e_fund) + ", " + format_value(e.e_trend);
        }
        case prompts::ReplySchema::WeightsAndPricesQuoted: {
            auto w = oracle_composition(s);
            auto e = oracle_expectations(s);
            return "\"" + format_weight(w.w_fund) + "\", \"" + format_weight(w.w_trend) +
                   "\", \"" + format_value(e.e_fund) + "\", \"" + format_value(e.e_trend) + "\"";
        }
    }
    return {};
}

}  // namespace

AgentReply OracleBackend::complete(const prompts::RenderedPrompt& prompt) {
    return AgentReply{oracle_reply_text(prompt), std::chrono::milliseconds{0}, 1,
                      BackendKind::Oracle};
}

std::string replay_key(std::string_view variant_id, double p_t, double p_prev, double p_fund) {
    std::string key(variant_id);
    key += '|';
    key += format_number(p_t);
    key += '|';
    key += format_number(p_prev);
    key += '|';
    key += format_number(p_fund);
    return key;
}

ReplayBackend::ReplayBackend(const std::string& jsonl_path)
    : ReplayBackend(transcript::read_jsonl(jsonl_path, nullptr)) {}

ReplayBackend::ReplayBackend(const std::vector<transcript::Record>& records) {
    for (const auto& r : records)
        entries_[replay_key(r.variant_id, r.p_t, r.p_prev, r.p_fund)].push_back(r.raw_text);
}

AgentReply ReplayBackend::complete(const prompts::RenderedPrompt& prompt) {
    const auto& s = prompt.snapshot;
    const std::string key =
        replay_key(prompts::variant_name(prompt.variant), s.p_t, s.p_prev, s.p_fund);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    size_t& cursor = cursor_[key];
    if (it == entries_.end() || cursor >= it->second.size())
        throw BackendError(BackendErrorCode::ReplayMiss, "REPLAY_MISS: no entry for " + key);
    return AgentReply{it->second[cursor++], std::chrono::milliseconds{0}, 1, BackendKind::Replay};
}

std::string RemoteBackend::build_request_json(const AgentBackendConfig& config,
                                              const prompts::RenderedPrompt& prompt) {
    // Exactly one user message: the agent must not see prior interactions.
    json j;
    j["model"] = config.model_name;
    j["temperature"] = config.temperature;
    j["messages"] = json::array({json{{"role", "user"}, {"content", prompt.body}}});
    return j.dump();
}

std::string RemoteBackend::extract_reply_text(const std::string& response_json) {
    json j = json::parse(response_json, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("remote reply is not valid JSON");
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

class RemoteBackend::InFlightGuard {
  public:
    explicit InFlightGuard(RemoteBackend& b) : backend_(b) {
        std::unique_lock lock(backend_.mutex_);
        backend_.cv_.wait(lock, [&] { return backend_.in_flight_ < backend_.config_.max_in_flight; });
        ++backend_.in_flight_;
    }
    ~InFlightGuard() {
        {
            std::lock_guard lock(backend_.mutex_);
            --backend_.in_flight_;
        }
        backend_.cv_.notify_one();
    }

  private:
    RemoteBackend& backend_;
};

namespace {

Transport make_http_transport(const AgentBackendConfig& config);

std::chrono::milliseconds backoff_delay(int retry_index) {
    // Exponential backoff with full jitter: uniform over [0, 1s * 2^k].
    thread_local std::mt19937 rng{std::random_device{}()};
    const double cap = 1000.0 * static_cast<double>(1u << std::min(retry_index, 20));
    std::uniform_real_distribution<double> dist(0.0, cap);
    return std::chrono::milliseconds(static_cast<long>(dist(rng)));
}

bool retryable(const HttpResult& r) {
    return r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500;
}

}  // namespace

RemoteBackend::RemoteBackend(AgentBackendConfig config, Transport transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)) {
    config_.validate();
    if (!transport_) transport_ = make_http_transport(config_);
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

AgentReply RemoteBackend::complete(const prompts::RenderedPrompt& prompt) {
    InFlightGuard guard(*this);
    const std::string request = build_request_json(config_, prompt);
    const auto started = std::chrono::steady_clock::now();
    HttpResult last;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) sleeper_(backoff_delay(attempt - 1));
        last = transport_(request);
        if (last.status == 401 || last.status == 403)
            throw BackendError(BackendErrorCode::AuthFailed,
                               "AUTH_FAILED: status " + std::to_string(last.status));
        if (last.status == 200) {
            const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started);
            return AgentReply{extract_reply_text(last.body), latency, attempt + 1,
                              BackendKind::Remote};
        }
        if (!retryable(last)) break;
    }
    throw BackendError(BackendErrorCode::TransportExhausted,
                       "TRANSPORT_EXHAUSTED: last status " + std::to_string(last.status) +
                           (last.error.empty() ? "" : " (" + last.error + ")"));
}

std::unique_ptr<AgentBackend> make_backend(const AgentBackendConfig& config) {
    config.validate();
    switch (config.kind) {
        case BackendKind::Oracle:
            return std::make_unique<OracleBackend>();
        case BackendKind::Replay:
            return std::make_unique<ReplayBackend>(config.replay_path);
        case BackendKind::Remote:
            return std::make_unique<RemoteBackend>(config);
    }
    return nullptr;
}

}  // namespace genagent::backends

// httplib pulls in OpenSSL; keep it out of the header.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace genagent::backends {
namespace {

Transport make_http_transport(const AgentBackendConfig& config) {
    // Split "https://host[:port]/path" into client base and request path.
    const std::string& url = config.endpoint_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint_url must include a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw BackendError(BackendErrorCode::AuthFailed,
                           "AUTH_FAILED: environment variable " + config.api_key_env +
                               " is not set");
    const std::string bearer = std::string("Bearer ") + key;
    const auto timeout = config.timeout;

    return [base, path, bearer, timeout](const std::string& request_json) -> HttpResult {
        httplib::Client client(base);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        client.set_connection_timeout(secs.count(), 0);
        client.set_read_timeout(secs.count(), 0);
        client.set_write_timeout(secs.count(), 0);
        httplib::Headers headers{{"Authorization", bearer}};
        auto res = client.Post(path, headers, request_json, "application/json");
        if (!res) return HttpResult{0, "", httplib::to_string(res.error())};
        return HttpResult{res->status, res->body, ""};
    };
}

}  // namespace
}  // namespace genagent::backends
