#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dac/onemax_env.hpp"
#include "dac/policy.hpp"
#include "dac/portfolio.hpp"
#include "dac/stats.hpp"
#include "dac/threadpool.hpp"

namespace dac {

struct EpisodeResult {
    long long evals = 0;
    long long steps = 0;
    bool success = false; // optimum reached before the cutoff
};

/// Called before the outcome is folded into the episode: fitness and lambda
/// are the values the decision was made with.
using StepObserver = std::function<void(int fitness_before, int lambda, const StepOutcome&)>;

/// One full GA run under the given policy. The policy's random draws share
/// the environment's stream, so (config, seed, policy) fixes the trajectory.
inline EpisodeResult run_episode(EnvConfig cfg, std::uint64_t seed, const Policy& policy,
                                 const StepObserver& observer = nullptr) {
    cfg.seed = seed;
    OneMaxEnv env(cfg);
    const Portfolio pf = Portfolio::for_dimension(cfg.n);
    while (!env.finished()) {
        const int fitness = env.state().fitness;
        const int lambda = policy.select_lambda(pf, cfg.n, fitness, env.rng());
        const StepOutcome out = env.step(lambda);
        if (observer) observer(fitness, lambda, out);
    }
    EpisodeResult r;
    r.evals = std::min(env.state().evals, env.cutoff());
    r.steps = env.state().iteration;
    r.success = env.terminated();
    return r;
}

struct EvalResult {
    int n = 0;
    std::vector<double> runtimes;  // per-seed total evaluations, capped at the cutoff
    std::vector<bool> success;
    double mean_ert_over_n = 0.0;
    double std_over_n = 0.0;

    std::size_t successes() const {
        return static_cast<std::size_t>(std::count(success.begin(), success.end(), true));
    }
};

/// Fills the normalized mean/std from the collected runtimes.
inline void finalize_eval_stats(EvalResult& r) {
    r.mean_ert_over_n = mean(r.runtimes) / r.n;
    r.std_over_n = sample_stddev(r.runtimes) / r.n;
}

/// One episode per seed; truncated runs contribute the cutoff cost and are
/// flagged unsuccessful. Deterministic given the seed list; episodes fan out
/// over a worker pool.
inline EvalResult evaluate(const Policy& policy, const EnvConfig& cfg,
                           std::span<const std::uint64_t> seeds, int workers = 10) {
    if (seeds.empty()) throw std::invalid_argument("evaluate: empty seed list");
    EvalResult r;
    r.n = cfg.n;
    r.runtimes.assign(seeds.size(), 0.0);
    r.success.assign(seeds.size(), false);
    parallel_for_indexed(seeds.size(), workers, [&](std::size_t i) {
        const EpisodeResult e = run_episode(cfg, seeds[i], policy);
        r.runtimes[i] = static_cast<double>(e.evals);
        r.success[i] = e.success;
    });
    finalize_eval_stats(r);
    return r;
}

/// Relative ERT gap of a policy against a baseline on the same problem size.
inline double gap(const EvalResult& policy_result, const EvalResult& baseline_result) {
    if (policy_result.n != baseline_result.n)
        throw std::invalid_argument("gap: problem size mismatch");
    return (policy_result.mean_ert_over_n - baseline_result.mean_ert_over_n) /
           baseline_result.mean_ert_over_n;
}

struct CurvePoint {
    long long step = 0;
    double ert_over_n = 0.0; // mean runtime / n over the quick-eval seeds
};

struct LearningCurve {
    std::vector<CurvePoint> points;
};

/// Mean positive excess of the learning curve over the baseline level,
/// normalized by the checkpoint count. Sub-baseline segments clamp to zero.
inline double auc(const LearningCurve& curve, double baseline_ert_over_n) {
    if (curve.points.empty()) throw std::invalid_argument("auc: empty curve");
    double total = 0.0;
    for (const auto& p : curve.points) total += std::max(0.0, p.ert_over_n - baseline_ert_over_n);
    return total / static_cast<double>(curve.points.size());
}

/// Fraction of window checkpoints whose mean runtime lies within
/// mu +- 0.25 sigma of the baseline distribution. The window keeps
/// checkpoints in the last (1 - window_start_frac) share of training steps;
/// an empty window counts as 0.
inline double hitting_rate(const LearningCurve& curve, const EvalResult& baseline,
                           double window_start_frac = 0.0) {
    if (window_start_frac < 0.0 || window_start_frac >= 1.0)
        throw std::invalid_argument("hitting_rate: window_start_frac out of [0, 1)");
    if (curve.points.empty()) return 0.0;
    const double mu = baseline.mean_ert_over_n;
    const double half_band = 0.25 * baseline.std_over_n;
    const long long max_step = curve.points.back().step;
    const double threshold = window_start_frac * static_cast<double>(max_step);
    long long in_window = 0, hits = 0;
    for (const auto& p : curve.points) {
        if (static_cast<double>(p.step) < threshold) continue;
        ++in_window;
        if (p.ert_over_n >= mu - half_band && p.ert_over_n <= mu + half_band) ++hits;
    }
    if (in_window == 0) return 0.0;
    return static_cast<double>(hits) / static_cast<double>(in_window);
}

struct PolicyCandidate {
    long long step = 0;
    TabularPolicy policy;
    double quick_ert_over_n = 0.0;
};

struct BestPolicy {
    long long step = 0;
    TabularPolicy policy;
    EvalResult result;
};

/// Rank candidates by their quick-eval mean, re-evaluate the top 5 on the
/// final seed list and return the minimizer.
inline BestPolicy best_policy_selection(std::span<const PolicyCandidate> candidates,
                                        const EnvConfig& cfg,
                                        std::span<const std::uint64_t> final_seeds,
                                        int workers = 10) {
    if (candidates.empty()) throw std::invalid_argument("best_policy_selection: no candidates");
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return candidates[a].quick_ert_over_n < candidates[b].quick_ert_over_n;
    });
    const std::size_t top = std::min<std::size_t>(5, order.size());
    BestPolicy best;
    bool first = true;
    for (std::size_t rank = 0; rank < top; ++rank) {
        const auto& cand = candidates[order[rank]];
        const Policy pol = Policy::tabular(cand.policy);
        EvalResult res = evaluate(pol, cfg, final_seeds, workers);
        if (first || res.mean_ert_over_n < best.result.mean_ert_over_n) {
            best.step = cand.step;
            best.policy = cand.policy;
            best.result = std::move(res);
            first = false;
        }
    }
    return best;
}

struct FitnessInterval {
    double lo = 0.0; // inclusive
    double hi = 0.0; // exclusive
    long long steps = 0;
    double fraction = 0.0; // share of all steps, pooled over episodes
};

struct EpisodeDiagnostics {
    std::vector<long long> lengths;
    double median_length = 0.0;
    double mean_length = 0.0;
    std::vector<FitnessInterval> intervals;
    long long total_steps = 0;
};

/// Episode-length distribution plus the share of steps spent per fitness
/// interval (a step counts toward the interval holding the fitness the
/// decision was made at). Default intervals: [n/2, 0.75n) and [0.75n, n] —
/// the boundary at which the later interval holds the bulk (~2/3) of the
/// steps of a theory-guided run.
inline EpisodeDiagnostics episode_diagnostics(const Policy& policy, const EnvConfig& cfg,
                                              int episodes, std::uint64_t seed_base,
                                              std::vector<FitnessInterval> intervals = {}) {
    if (episodes < 1) throw std::invalid_argument("episode_diagnostics: episodes must be >= 1");
    if (intervals.empty()) {
        intervals.push_back({cfg.n / 2.0, 0.75 * cfg.n, 0, 0.0});
        intervals.push_back({0.75 * cfg.n, static_cast<double>(cfg.n), 0, 0.0});
    }
    EpisodeDiagnostics d;
    d.intervals = std::move(intervals);
    for (int ep = 0; ep < episodes; ++ep) {
        const auto seed = derive_seed(seed_base, static_cast<std::uint64_t>(ep), "diagnostics");
        const EpisodeResult r =
            run_episode(cfg, seed, policy, [&](int fitness, int, const StepOutcome&) {
                for (auto& iv : d.intervals)
                    if (fitness >= iv.lo && fitness < iv.hi) ++iv.steps;
            });
        d.lengths.push_back(r.steps);
        d.total_steps += r.steps;
    }
    std::vector<double> lens(d.lengths.begin(), d.lengths.end());
    d.median_length = quantile_type7(lens, 0.5);
    d.mean_length = mean(lens);
    for (auto& iv : d.intervals)
        iv.fraction = d.total_steps > 0
                          ? static_cast<double>(iv.steps) / static_cast<double>(d.total_steps)
                          : 0.0;
    return d;
}

} // namespace dac
