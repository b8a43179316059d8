#pragma once

// Prompt catalog, snapshot-to-prompt rendering, and strict parsing of agent
// replies into typed values. The template texts are embedded from the
// canonical fixture files under prompts/ at build time.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "genagent/ham_core.hpp"

namespace genagent::prompts {

enum class PromptVariant {
    CompositionV0,
    ExpectationV0,
    Unified,
    CompositionV1,
    CompositionV2,
    CompositionV3,
    CompositionV4,
    CompositionV5,
};

enum class ReplySchema { TwoWeights, TwoPrices, WeightsAndPricesQuoted };

inline constexpr PromptVariant kAllVariants[] = {
    PromptVariant::CompositionV0, PromptVariant::ExpectationV0, PromptVariant::Unified,
    PromptVariant::CompositionV1, PromptVariant::CompositionV2, PromptVariant::CompositionV3,
    PromptVariant::CompositionV4, PromptVariant::CompositionV5,
};

const std::string& template_text(PromptVariant v);
ReplySchema reply_schema(PromptVariant v);
std::string_view variant_name(PromptVariant v);
std::optional<PromptVariant> parse_variant(std::string_view name);

// FNV-1a 64-bit, used for the prompt digest manifest.
std::uint64_t fnv1a64(std::string_view text);
std::string template_digest_hex(PromptVariant v);

// How the snapshot values are appended to a template.
struct ValueFormat {
    int max_decimals = 2;
    std::string label_current = "current price";
    std::string label_previous = "previous price";
    std::string label_fundamental = "fundamental";
};

struct RenderedPrompt {
    PromptVariant variant;
    std::string body;
    ham::MarketSnapshot snapshot;
};

RenderedPrompt render(PromptVariant v, const ham::MarketSnapshot& snapshot,
                      const ValueFormat& format = {});

enum class ParseStatus {
    Ok,
    Malformed,
    SumViolation,
    RangeViolation,
    Nonpositive,
    LineViolation,
};

std::string_view parse_status_name(ParseStatus s);
std::optional<ParseStatus> parse_status_from_name(std::string_view name);

struct ParsedReply {
    ParseStatus status = ParseStatus::Malformed;
    std::optional<ham::StrategyWeights> weights;
    std::optional<ham::ExpectationPair> expectations;
    std::string raw_text;

    bool ok() const { return status == ParseStatus::Ok; }
};

// Two weights separated by a comma; sums within 0.02 of 1 are renormalized.
ParsedReply parse_weights(std::string_view raw);
// Two positive prices separated by a comma.
ParsedReply parse_expectations(std::string_view raw);
// Four quoted numbers on a single line: weights then expectations.
ParsedReply parse_unified(std::string_view raw);

ParsedReply parse_reply(ReplySchema schema, std::string_view raw);

}  // namespace genagent::prompts
