#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "dac/stats.hpp"

namespace dac {

enum class RewardVariant {
    Naive,                // delta_f - evals
    Scaled,               // (delta_f - evals) / n
    ShiftedFixed,         // delta_f - evals + b
    ShiftedAdaptive,      // delta_f - evals + b_a (b_a resolved from warm-up statistics)
    ScaledShiftedAdaptive // (delta_f - evals) / n + b_a
};

inline std::string to_string(RewardVariant v) {
    switch (v) {
    case RewardVariant::Naive: return "naive";
    case RewardVariant::Scaled: return "scaled";
    case RewardVariant::ShiftedFixed: return "shifted_fixed";
    case RewardVariant::ShiftedAdaptive: return "shifted_adaptive";
    case RewardVariant::ScaledShiftedAdaptive: return "scaled_shifted_adaptive";
    }
    return "unknown";
}

inline RewardVariant reward_variant_from_string(const std::string& s) {
    if (s == "naive") return RewardVariant::Naive;
    if (s == "scaled") return RewardVariant::Scaled;
    if (s == "shifted_fixed") return RewardVariant::ShiftedFixed;
    if (s == "shifted_adaptive") return RewardVariant::ShiftedAdaptive;
    if (s == "scaled_shifted_adaptive") return RewardVariant::ScaledShiftedAdaptive;
    throw std::invalid_argument("unknown reward variant '" + s + "'");
}

struct RewardSpec {
    RewardVariant variant = RewardVariant::Naive;
    double fixed_bias = 0.0;              // used by ShiftedFixed
    std::optional<double> resolved_bias;  // set once the adaptive bias is computed

    bool needs_bias_resolution() const {
        return (variant == RewardVariant::ShiftedAdaptive ||
                variant == RewardVariant::ScaledShiftedAdaptive) &&
               !resolved_bias.has_value();
    }
};

/// Every variant is an affine transform of the naive reward delta_f - evals.
inline double reward_from_naive(const RewardSpec& spec, double naive, int n) {
    switch (spec.variant) {
    case RewardVariant::Naive:
        return naive;
    case RewardVariant::Scaled:
        return naive / n;
    case RewardVariant::ShiftedFixed:
        return naive + spec.fixed_bias;
    case RewardVariant::ShiftedAdaptive:
        if (!spec.resolved_bias)
            throw std::logic_error("reward: adaptive bias not resolved before use");
        return naive + *spec.resolved_bias;
    case RewardVariant::ScaledShiftedAdaptive:
        if (!spec.resolved_bias)
            throw std::logic_error("reward: adaptive bias not resolved before use");
        return naive / n + *spec.resolved_bias;
    }
    throw std::logic_error("reward: unknown variant");
}

/// Per-step reward under the given design.
inline double reward(const RewardSpec& spec, int delta_f, int step_evals, int n) {
    if (delta_f < 0) throw std::invalid_argument("reward: delta_f must be >= 0");
    if (step_evals < 1) throw std::invalid_argument("reward: step_evals must be >= 1");
    return reward_from_naive(
        spec, static_cast<double>(delta_f) - static_cast<double>(step_evals), n);
}

/// Mean and quartiles of a warm-up reward sample.
struct RewardStats {
    double mean = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::size_t count = 0;
};

/// Stats over naive-variant reward values, quartiles by linear interpolation
/// between order statistics (type 7).
inline RewardStats collect_reward_stats(std::span<const double> rewards) {
    if (rewards.empty()) throw std::invalid_argument("collect_reward_stats: empty input");
    RewardStats s;
    s.mean = mean(rewards);
    std::vector<double> xs(rewards.begin(), rewards.end());
    s.q1 = quantile_type7(xs, 0.25);
    s.q3 = quantile_type7(std::move(xs), 0.75);
    s.count = rewards.size();
    return s;
}

/// Adaptive shifting bias 0.0052 * mean * (q1 / q3). The quartile ratio
/// tracks how the reward range widens with the problem size, so one constant
/// serves every dimension.
inline double adaptive_bias(const RewardStats& stats) {
    if (stats.q3 == 0.0)
        throw std::domain_error("adaptive_bias: q3 == 0 (degenerate warm-up statistics)");
    return 0.0052 * stats.mean * (stats.q1 / stats.q3);
}

} // namespace dac
