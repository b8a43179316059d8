#pragma once

// Heterogeneous-agent market model primitives: expectation rules for the two
// strategy groups, their weighted aggregation, reduced-form price dynamics,
// reaction-parameter extraction, Gordon fundamentals, and the small series
// utilities the experiment drivers need. Everything here is a pure function
// of its arguments and safe to call concurrently.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace genagent::ham {

// Below this gap (in index points) an extraction denominator is treated as
// singular and the reaction parameter is reported as undefined.
inline constexpr double kEpsilonDenominator = 1e-6;

inline constexpr double kWeightSumTolerance = 1e-9;

namespace detail {
inline void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}
inline bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }
}  // namespace detail

// The information triple shown to an agent: current price, previous-period
// price, and the current fundamental value, all in index points.
struct MarketSnapshot {
    double p_t;
    double p_prev;
    double p_fund;

    MarketSnapshot(double current, double previous, double fundamental)
        : p_t(current), p_prev(previous), p_fund(fundamental) {
        detail::require(detail::positive_finite(p_t) && detail::positive_finite(p_prev) &&
                            detail::positive_finite(p_fund),
                        "MarketSnapshot: prices must be finite and strictly positive");
    }

    bool operator==(const MarketSnapshot&) const = default;
};

// Probability split between the fundamentalist and trend-following groups.
struct StrategyWeights {
    double w_fund;
    double w_trend;

    StrategyWeights(double fund, double trend) : w_fund(fund), w_trend(trend) {
        detail::require(std::isfinite(w_fund) && std::isfinite(w_trend),
                        "StrategyWeights: weights must be finite");
        detail::require(w_fund >= 0.0 && w_fund <= 1.0 && w_trend >= 0.0 && w_trend <= 1.0,
                        "StrategyWeights: weights must lie in [0,1]");
        detail::require(std::fabs(w_fund + w_trend - 1.0) <= kWeightSumTolerance,
                        "StrategyWeights: weights must sum to 1");
    }

    static StrategyWeights from_fundamentalist_share(double delta) {
        return StrategyWeights(delta, 1.0 - delta);
    }

    bool operator==(const StrategyWeights&) const = default;
};

// Next-period price forecast under each strategy.
struct ExpectationPair {
    double e_fund;
    double e_trend;

    ExpectationPair(double fund, double trend) : e_fund(fund), e_trend(trend) {
        detail::require(detail::positive_finite(e_fund) && detail::positive_finite(e_trend),
                        "ExpectationPair: expectations must be finite and strictly positive");
    }

    bool operator==(const ExpectationPair&) const = default;
};

// Extracted reaction parameters. A missing value means the extraction
// denominator was singular for that snapshot, not an error.
struct ReactionParams {
    std::optional<double> alpha;
    std::optional<double> beta;
};

// One month of price/dividend data; dividend is the trailing-twelve-month
// figure in the same units as the price.
struct DividendRecord {
    int year;
    int month;  // 1..12
    double price;
    double dividend;
};

// Fundamentalist rule: expect the price to move a fraction alpha of the way
// toward the fundamental value.
inline double fundamentalist_expectation(const MarketSnapshot& s, double alpha) {
    detail::require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0,
                    "fundamentalist_expectation: alpha must lie in [0,1]");
    return s.p_t + alpha * (s.p_fund - s.p_t);
}

// Trend-follower rule: extrapolate the last price change with gain beta.
// Negative beta is contrarian behavior and is allowed.
inline double trend_follower_expectation(const MarketSnapshot& s, double beta) {
    detail::require(std::isfinite(beta), "trend_follower_expectation: beta must be finite");
    return s.p_t + beta * (s.p_t - s.p_prev);
}

inline double aggregate_expected_price(const StrategyWeights& w, const ExpectationPair& e) {
    return w.w_fund * e.e_fund + (1.0 - w.w_fund) * e.e_trend;
}

// Reduced-form next-period price implied by the composition delta and the
// two reaction parameters. Identical to aggregating the two rules directly.
inline double reduced_form_next_price(const MarketSnapshot& s, double delta, double alpha,
                                      double beta) {
    detail::require(std::isfinite(delta) && delta >= 0.0 && delta <= 1.0,
                    "reduced_form_next_price: delta must lie in [0,1]");
    detail::require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0,
                    "reduced_form_next_price: alpha must lie in [0,1]");
    detail::require(std::isfinite(beta), "reduced_form_next_price: beta must be finite");
    return s.p_t + delta * alpha * (s.p_fund - s.p_t) + (1.0 - delta) * beta * (s.p_t - s.p_prev);
}

// Invert the fundamentalist rule. Empty when the fundamental gap is singular.
inline std::optional<double> extract_alpha(double e_fund, const MarketSnapshot& s) {
    detail::require(std::isfinite(e_fund), "extract_alpha: expectation must be finite");
    const double denom = s.p_fund - s.p_t;
    if (std::fabs(denom) < kEpsilonDenominator) return std::nullopt;
    return (e_fund - s.p_t) / denom;
}

// Invert the trend-follower rule. Empty when the last price change is singular.
inline std::optional<double> extract_beta(double e_trend, const MarketSnapshot& s) {
    detail::require(std::isfinite(e_trend), "extract_beta: expectation must be finite");
    const double denom = s.p_t - s.p_prev;
    if (std::fabs(denom) < kEpsilonDenominator) return std::nullopt;
    return (e_trend - s.p_t) / denom;
}

// One-period-ahead expected price change implied by (delta, alpha, beta).
inline double expected_price_variation(double delta, const ReactionParams& params,
                                       const MarketSnapshot& s) {
    detail::require(params.alpha.has_value() && params.beta.has_value(),
                    "expected_price_variation: reaction parameters must be defined");
    return reduced_form_next_price(s, delta, *params.alpha, *params.beta) - s.p_t;
}

// Gordon growth fundamental: next-period dividend discounted as a growing
// perpetuity.
inline double gordon_fundamental(double dividend, double growth_rate, double discount_rate) {
    detail::require(std::isfinite(dividend) && dividend >= 0.0,
                    "gordon_fundamental: dividend must be finite and non-negative");
    detail::require(std::isfinite(growth_rate) && std::isfinite(discount_rate) &&
                        growth_rate >= 0.0 && discount_rate > growth_rate,
                    "gordon_fundamental: requires discount_rate > growth_rate >= 0");
    return dividend * (1.0 + growth_rate) / (discount_rate - growth_rate);
}

inline double gordon_fundamental(const DividendRecord& r, double growth_rate,
                                 double discount_rate) {
    return gordon_fundamental(r.dividend, growth_rate, discount_rate);
}

// Centered moving average with an odd window; the (window-1)/2 positions at
// each edge are emitted as missing.
inline std::vector<std::optional<double>> centered_moving_average(std::span<const double> series,
                                                                  int window) {
    detail::require(window > 0 && window % 2 == 1, "centered_moving_average: window must be odd");
    detail::require(static_cast<size_t>(window) <= series.size(),
                    "centered_moving_average: window longer than series");
    const int half = window / 2;
    const int n = static_cast<int>(series.size());
    std::vector<std::optional<double>> out(series.size());
    for (int i = half; i < n - half; ++i) {
        double sum = 0.0;
        for (int j = i - half; j <= i + half; ++j) sum += series[j];
        out[i] = sum / window;
    }
    return out;
}

// Same, but any window touching a missing input yields a missing output.
inline std::vector<std::optional<double>> centered_moving_average(
    std::span<const std::optional<double>> series, int window) {
    detail::require(window > 0 && window % 2 == 1, "centered_moving_average: window must be odd");
    detail::require(static_cast<size_t>(window) <= series.size(),
                    "centered_moving_average: window longer than series");
    const int half = window / 2;
    const int n = static_cast<int>(series.size());
    std::vector<std::optional<double>> out(series.size());
    for (int i = half; i < n - half; ++i) {
        double sum = 0.0;
        bool complete = true;
        for (int j = i - half; j <= i + half; ++j) {
            if (!series[j]) {
                complete = false;
                break;
            }
            sum += *series[j];
        }
        if (complete) out[i] = sum / window;
    }
    return out;
}

inline double forecast_error(double expected_next, double realized_next) {
    return expected_next - realized_next;
}

}  // namespace genagent::ham
