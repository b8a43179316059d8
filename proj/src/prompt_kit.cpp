#include "genagent/prompt_kit.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "genagent/numeric_format.hpp"

namespace genagent::prompts {

namespace {
#include "prompt_templates.inc"  // generated from prompts/*.txt
}  // namespace

const std::string& template_text(PromptVariant v) {
    static const std::string texts[] = {
        kTemplateCompositionV0, kTemplateExpectationV0, kTemplateUnified, kTemplateCompositionV1,
        kTemplateCompositionV2, kTemplateCompositionV3, kTemplateCompositionV4,
        kTemplateCompositionV5,
    };
    return texts[static_cast<int>(v)];
}

ReplySchema reply_schema(PromptVariant v) {
    switch (v) {
        case PromptVariant::ExpectationV0:
            return ReplySchema::TwoPrices;
        case PromptVariant::Unified:
            return ReplySchema::WeightsAndPricesQuoted;
        default:
            return ReplySchema::TwoWeights;
    }
}

std::string_view variant_name(PromptVariant v) {
    switch (v) {
        case PromptVariant::CompositionV0: return "composition_v0";
        case PromptVariant::ExpectationV0: return "expectation_v0";
        case PromptVariant::Unified: return "unified";
        case PromptVariant::CompositionV1: return "composition_v1";
        case PromptVariant::CompositionV2: return "composition_v2";
        case PromptVariant::CompositionV3: return "composition_v3";
        case PromptVariant::CompositionV4: return "composition_v4";
        case PromptVariant::CompositionV5: return "composition_v5";
    }
    return "unknown";
}

std::optional<PromptVariant> parse_variant(std::string_view name) {
    for (PromptVariant v : kAllVariants)
        if (variant_name(v) == name) return v;
    return std::nullopt;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string template_digest_hex(PromptVariant v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(template_text(v))));
    return buf;
}

RenderedPrompt render(PromptVariant v, const ham::MarketSnapshot& snapshot,
                      const ValueFormat& format) {
    std::string body = template_text(v);
    body += "\n\n";
    body += format.label_current + ": " + format_value(snapshot.p_t, format.max_decimals) + "\n";
    body += format.label_previous + ": " + format_value(snapshot.p_prev, format.max_decimals) +
            "\n";
    body += format.label_fundamental + ": " + format_value(snapshot.p_fund, format.max_decimals);
    return RenderedPrompt{v, std::move(body), snapshot};
}

std::string_view parse_status_name(ParseStatus s) {
    switch (s) {
        case ParseStatus::Ok: return "OK";
        case ParseStatus::Malformed: return "MALFORMED";
        case ParseStatus::SumViolation: return "SUM_VIOLATION";
        case ParseStatus::RangeViolation: return "RANGE_VIOLATION";
        case ParseStatus::Nonpositive: return "NONPOSITIVE";
        case ParseStatus::LineViolation: return "LINE_VIOLATION";
    }
    return "MALFORMED";
}

std::optional<ParseStatus> parse_status_from_name(std::string_view name) {
    for (ParseStatus s : {ParseStatus::Ok, ParseStatus::Malformed, ParseStatus::SumViolation,
                          ParseStatus::RangeViolation, ParseStatus::Nonpositive,
                          ParseStatus::LineViolation})
        if (parse_status_name(s) == name) return s;
    return std::nullopt;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// One comma-separated token: optional surrounding quotes, optional trailing
// period when it is sentence punctuation rather than part of the number.
std::optional<double> parse_token(std::string_view token) {
    token = trim(token);
    if (token.size() >= 2 && token.front() == '"' && token.back() == '"') {
        token = trim(token.substr(1, token.size() - 2));
    }
    if (token.size() >= 2 && token.back() == '.' && token[token.size() - 2] == '.')
        return std::nullopt;  // "1." is tolerable, "1.." is not
    if (!token.empty() && token.back() == '.') token.remove_suffix(1);
    if (token.empty() || token.size() > 63) return std::nullopt;

    char buf[64];
    token.copy(buf, token.size());
    buf[token.size()] = '\0';
    char* end = nullptr;
    double v = std::strtod(buf, &end);
    if (end != buf + token.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<std::string_view> split_commas(std::string_view raw) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (size_t i = 0; i <= raw.size(); ++i) {
        if (i == raw.size() || raw[i] == ',') {
            out.push_back(raw.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

ParseStatus weights_from_tokens(double a, double b, std::optional<ham::StrategyWeights>& out) {
    if (a < -0.01 || a > 1.01 || b < -0.01 || b > 1.01) return ParseStatus::RangeViolation;
    const double sum = a + b;
    // small epsilon so decimal boundary sums (0.49+0.49, 0.50+0.52) land inside
    if (std::fabs(sum - 1.0) > 0.02 + 1e-9) return ParseStatus::SumViolation;
    double w_fund = a / sum;
    w_fund = std::min(1.0, std::max(0.0, w_fund));
    out = ham::StrategyWeights(w_fund, 1.0 - w_fund);
    return ParseStatus::Ok;
}

ParseStatus prices_from_tokens(double a, double b, std::optional<ham::ExpectationPair>& out) {
    if (a <= 0.0 || b <= 0.0) return ParseStatus::Nonpositive;
    out = ham::ExpectationPair(a, b);
    return ParseStatus::Ok;
}

}  // namespace

ParsedReply parse_weights(std::string_view raw) {
    ParsedReply reply;
    reply.raw_text = raw;
    auto tokens = split_commas(raw);
    if (tokens.size() != 2) return reply;
    auto a = parse_token(tokens[0]);
    auto b = parse_token(tokens[1]);
    if (!a || !b) return reply;
    reply.status = weights_from_tokens(*a, *b, reply.weights);
    return reply;
}

ParsedReply parse_expectations(std::string_view raw) {
    ParsedReply reply;
    reply.raw_text = raw;
    auto tokens = split_commas(raw);
    if (tokens.size() != 2) return reply;
    auto a = parse_token(tokens[0]);
    auto b = parse_token(tokens[1]);
    if (!a || !b) return reply;
    reply.status = prices_from_tokens(*a, *b, reply.expectations);
    return reply;
}

ParsedReply parse_unified(std::string_view raw) {
    ParsedReply reply;
    reply.raw_text = raw;
    std::string_view body = raw;
    while (!body.empty() && is_space(body.back())) body.remove_suffix(1);
    while (!body.empty() && is_space(body.front())) body.remove_prefix(1);
    if (body.find('\n') != std::string_view::npos) {
        reply.status = ParseStatus::LineViolation;
        return reply;
    }
    auto tokens = split_commas(body);
    if (tokens.size() != 4) return reply;
    std::optional<double> vals[4];
    for (int i = 0; i < 4; ++i) {
        vals[i] = parse_token(tokens[i]);
        if (!vals[i]) return reply;
    }
    reply.status = weights_from_tokens(*vals[0], *vals[1], reply.weights);
    if (reply.status != ParseStatus::Ok) return reply;
    reply.status = prices_from_tokens(*vals[2], *vals[3], reply.expectations);
    if (reply.status != ParseStatus::Ok) reply.weights.reset();
    return reply;
}

ParsedReply parse_reply(ReplySchema schema, std::string_view raw) {
    switch (schema) {
        case ReplySchema::TwoWeights:
            return parse_weights(raw);
        case ReplySchema::TwoPrices:
            return parse_expectations(raw);
        case ReplySchema::WeightsAndPricesQuoted:
            return parse_unified(raw);
    }
    return {};
}

}  // namespace genagent::prompts
