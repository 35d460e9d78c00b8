#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dac/policy.hpp"
#include "dac/reward.hpp"

namespace dac {

struct CheckpointRecord {
    long long step = 0;
    TabularPolicy policy;
    double quick_ert_over_n = 0.0; // mean runtime / n over the quick-eval seeds
    int pairwise_diff = 0;         // states changed since the previous checkpoint
    double mean_loss = 0.0;        // mean training loss since the previous checkpoint
};

/// Incremental persistence hook; invoked once per checkpoint as it is taken.
using CheckpointSink = std::function<void(const CheckpointRecord&)>;

struct TrainingLog {
    TabularPolicy initial_policy;        // greedy extraction before any update
    double initial_quick_ert_over_n = 0.0;
    std::vector<CheckpointRecord> checkpoints;
    RewardStats warmup_stats;            // naive-reward statistics of the warm-up sample
    std::optional<double> resolved_bias; // set for adaptive reward variants
    long long steps_completed = 0;
};

} // namespace dac
