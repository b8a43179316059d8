#pragma once

// Generative-agent abstraction and its three implementations: a remote
// chat-completions client, a deterministic rule-based oracle for offline
// runs, and a replay backend serving cached transcripts.

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "genagent/ham_core.hpp"
#include "genagent/prompt_kit.hpp"
#include "genagent/transcript.hpp"

namespace genagent::backends {

enum class BackendKind { Remote, Oracle, Replay };

std::string_view backend_kind_name(BackendKind k);
std::optional<BackendKind> parse_backend_kind(std::string_view name);

struct AgentBackendConfig {
    BackendKind kind = BackendKind::Oracle;
    std::string model_name = "gpt-4o-mini";
    double temperature = 1.0;
    std::string endpoint_url;                      // Remote only
    std::string api_key_env = "OPENAI_API_KEY";    // Remote only
    std::chrono::milliseconds timeout{30000};
    int max_retries = 5;
    int max_in_flight = 4;
    std::string replay_path;                       // Replay only

    void validate() const;
};

struct AgentReply {
    std::string raw_text;
    std::chrono::milliseconds latency{0};
    int attempt_count = 1;
    BackendKind kind = BackendKind::Oracle;
};

enum class BackendErrorCode { TransportExhausted, AuthFailed, ReplayMiss, Timeout };

class BackendError : public std::runtime_error {
  public:
    BackendError(BackendErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    BackendErrorCode code() const { return code_; }

  private:
    BackendErrorCode code_;
};

class AgentBackend {
  public:
    virtual ~AgentBackend() = default;
    virtual AgentReply complete(const prompts::RenderedPrompt& prompt) = 0;
};

// Deterministic stand-in for the LLM; reproduces the qualitative asymmetries
// the real agent shows so the full pipeline can be exercised offline.
ham::StrategyWeights oracle_composition(const ham::MarketSnapshot& s);
ham::ExpectationPair oracle_expectations(const ham::MarketSnapshot& s);

class OracleBackend final : public AgentBackend {
  public:
    AgentReply complete(const prompts::RenderedPrompt& prompt) override;
};

class ReplayBackend final : public AgentBackend {
  public:
    explicit ReplayBackend(const std::string& jsonl_path);
    explicit ReplayBackend(const std::vector<transcript::Record>& records);

    AgentReply complete(const prompts::RenderedPrompt& prompt) override;

  private:
    std::map<std::string, std::vector<std::string>> entries_;
    std::map<std::string, size_t> cursor_;
    std::mutex mutex_;
};

// Transport seam for the remote backend; tests inject fakes here.
struct HttpResult {
    int status = 0;             // 0 means transport-level failure
    std::string body;
    std::string error;
};
using Transport = std::function<HttpResult(const std::string& request_json)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

class RemoteBackend final : public AgentBackend {
  public:
    // Default transport posts to the configured chat-completions endpoint.
    explicit RemoteBackend(AgentBackendConfig config, Transport transport = {},
                           Sleeper sleeper = {});

    AgentReply complete(const prompts::RenderedPrompt& prompt) override;

    static std::string build_request_json(const AgentBackendConfig& config,
                                          const prompts::RenderedPrompt& prompt);
    static std::string extract_reply_text(const std::string& response_json);

  private:
    class InFlightGuard;

    AgentBackendConfig config_;
    Transport transport_;
    Sleeper sleeper_;
    int in_flight_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

std::unique_ptr<AgentBackend> make_backend(const AgentBackendConfig& config);

// Canonical replay key for a (variant, snapshot) pair.
std::string replay_key(std::string_view variant_id, double p_t, double p_prev, double p_fund);

}  // namespace genagent::backends
