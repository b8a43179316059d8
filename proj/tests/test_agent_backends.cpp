#include <doctest.h>

#include <atomic>
#include <thread>

#include <json.hpp>

#include "genagent/agent_backends.hpp"

using namespace genagent;
using namespace genagent::backends;

namespace {
prompts::RenderedPrompt composition_prompt(const ham::MarketSnapshot& s) {
    return prompts::render(prompts::PromptVariant::CompositionV0, s);
}
prompts::RenderedPrompt expectation_prompt(const ham::MarketSnapshot& s) {
    return prompts::render(prompts::PromptVariant::ExpectationV0, s);
}
}  // namespace

TEST_CASE("oracle composition branches") {
    CHECK(oracle_composition(ham::MarketSnapshot(1333, 1313, 1453)).w_fund == 0.9);
    CHECK(oracle_composition(ham::MarketSnapshot(1333, 1353, 1213)).w_fund == 0.35);
    CHECK(oracle_composition(ham::MarketSnapshot(1333, 1313, 733)).w_fund ==
          doctest::Approx(0.9).epsilon(1e-12));
    // overpricing halfway to saturation
    CHECK(oracle_composition(ham::MarketSnapshot(1333, 1313, 1033)).w_fund ==
          doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("oracle expectations") {
    const auto e1 = oracle_expectations(ham::MarketSnapshot(1333, 1313, 1453));
    CHECK(e1.e_fund == doctest::Approx(1447).epsilon(1e-12));
    const auto e2 = oracle_expectations(ham::MarketSnapshot(1333, 1353, 1453));
    CHECK(e2.e_trend == doctest::Approx(1343).epsilon(1e-12));
    const auto e3 = oracle_expectations(ham::MarketSnapshot(1333, 1333, 1333));
    CHECK(e3.e_fund == 1333);
    CHECK(e3.e_trend == 1333);
}

TEST_CASE("oracle backend replies are deterministic and round-trip") {
    OracleBackend backend;
    const ham::MarketSnapshot s(1333, 1313, 1453);
    const auto r1 = backend.complete(composition_prompt(s));
    const auto r2 = backend.complete(composition_prompt(s));
    CHECK(r1.raw_text == "0.90, 0.10");
    CHECK(r1.raw_text == r2.raw_text);

    const auto e = backend.complete(expectation_prompt(s));
    const auto parsed = prompts::parse_expectations(e.raw_text);
    REQUIRE(parsed.ok());
    CHECK(*ham::extract_alpha(parsed.expectations->e_fund, s) == 0.95);
    const double beta = *ham::extract_beta(parsed.expectations->e_trend, s);
    CHECK((beta == 0.5 || beta == -0.5));
}

TEST_CASE("replay backend") {
    SUBCASE("empty cache misses") {
        ReplayBackend backend(std::vector<transcript::Record>{});
        CHECK_THROWS_AS(backend.complete(composition_prompt(ham::MarketSnapshot(1333, 1313, 1453))),
                        BackendError);
    }
    SUBCASE("serves entries in order and then misses") {
        std::vector<transcript::Record> records(2);
        for (int i = 0; i < 2; ++i) {
            records[i].variant_id = "composition_v0";
            records[i].p_t = 1333;
            records[i].p_prev = 1313;
            records[i].p_fund = 1453;
            records[i].replication_index = i;
            records[i].raw_text = i == 0 ? "0.7, 0.3" : "0.6, 0.4";
        }
        ReplayBackend backend(records);
        const auto prompt = composition_prompt(ham::MarketSnapshot(1333, 1313, 1453));
        CHECK(backend.complete(prompt).raw_text == "0.7, 0.3");
        CHECK(backend.complete(prompt).raw_text == "0.6, 0.4");
        CHECK_THROWS_AS(backend.complete(prompt), BackendError);
    }
}

TEST_CASE("config validation") {
    AgentBackendConfig cfg;
    cfg.temperature = 2.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.temperature = 1.0;
    cfg.max_retries = 11;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.max_retries = 5;
    cfg.kind = BackendKind::Remote;
    cfg.endpoint_url.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

namespace {
AgentBackendConfig remote_config(int max_retries) {
    AgentBackendConfig cfg;
    cfg.kind = BackendKind::Remote;
    cfg.endpoint_url = "https://example.invalid/v1/chat/completions";
    cfg.api_key_env = "GENAGENT_TEST_KEY";
    cfg.max_retries = max_retries;
    return cfg;
}

const Sleeper no_sleep = [](std::chrono::milliseconds) {};
}  // namespace

TEST_CASE("remote backend retry accounting") {
    std::atomic<int> attempts{0};
    RemoteBackend backend(
        remote_config(2),
        [&](const std::string&) {
            ++attempts;
            return HttpResult{0, "", "connection refused"};
        },
        no_sleep);
    CHECK_THROWS_WITH_AS(
        backend.complete(composition_prompt(ham::MarketSnapshot(1333, 1313, 1453))),
        doctest::Contains("TRANSPORT_EXHAUSTED"), BackendError);
    CHECK(attempts.load() == 3);
}

TEST_CASE("remote backend fails fast on auth errors") {
    std::atomic<int> attempts{0};
    RemoteBackend backend(
        remote_config(5),
        [&](const std::string&) {
            ++attempts;
            return HttpResult{401, "{}", ""};
        },
        no_sleep);
    try {
        backend.complete(composition_prompt(ham::MarketSnapshot(1333, 1313, 1453)));
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.code() == BackendErrorCode::AuthFailed);
    }
    CHECK(attempts.load() == 1);
}

TEST_CASE("remote backend request carries exactly one user message") {
    std::string captured;
    RemoteBackend backend(
        remote_config(0),
        [&](const std::string& request) {
            captured = request;
            nlohmann::json reply;
            reply["choices"] = {{{"message", {{"role", "assistant"}, {"content", "0.7, 0.3"}}}}};
            return HttpResult{200, reply.dump(), ""};
        },
        no_sleep);
    const auto prompt = composition_prompt(ham::MarketSnapshot(1333, 1313, 1453));
    const auto reply = backend.complete(prompt);
    CHECK(reply.raw_text == "0.7, 0.3");
    CHECK(reply.attempt_count == 1);

    const auto j = nlohmann::json::parse(captured);
    CHECK(j["model"] == "gpt-4o-mini");
    CHECK(j["temperature"] == 1.0);
    REQUIRE(j["messages"].size() == 1);
    CHECK(j["messages"][0]["role"] == "user");
    CHECK(j["messages"][0]["content"] == prompt.body);
}

TEST_CASE("remote backend honors the in-flight bound") {
    auto cfg = remote_config(0);
    cfg.max_in_flight = 3;
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    RemoteBackend backend(
        cfg,
        [&](const std::string&) {
            const int now = ++in_flight;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(3));
            --in_flight;
            nlohmann::json reply;
            reply["choices"] = {{{"message", {{"content", "0.7, 0.3"}}}}};
            return HttpResult{200, reply.dump(), ""};
        },
        no_sleep);

    const auto prompt = composition_prompt(ham::MarketSnapshot(1333, 1313, 1453));
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i)
        threads.emplace_back([&] { (void)backend.complete(prompt); });
    for (auto& t : threads) t.join();
    CHECK(peak.load() <= 3);
    CHECK(peak.load() >= 1);
}
