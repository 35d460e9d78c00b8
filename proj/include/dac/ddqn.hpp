#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dac/metrics.hpp"
#include "dac/mlp.hpp"
#include "dac/onemax_env.hpp"
#include "dac/policy.hpp"
#include "dac/portfolio.hpp"
#include "dac/replay.hpp"
#include "dac/reward.hpp"
#include "dac/rng.hpp"
#include "dac/training_log.hpp"

namespace dac {

struct DdqnConfig {
    EnvConfig env;
    RewardSpec reward;
    double epsilon = 0.2;
    double gamma = 0.99;
    double tau = 0.01;
    double learning_rate = 0.001;
    int batch_size = 2048;
    std::size_t buffer_capacity = 1000000;
    int warmup_transitions = 10000;
    long long total_steps = 500000;
    int checkpoint_every = 2000;
    // The cutoff is a training artifact, not part of the decision process, so
    // truncated transitions bootstrap by default; switchable for sensitivity checks.
    bool bootstrap_on_truncation = true;
    int hidden_units = 50;
    std::uint64_t seed = 1;
    int quick_eval_seeds = 100;
    int eval_workers = 10;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0))
            throw std::invalid_argument("DdqnConfig: epsilon out of [0, 1]");
        if (!(gamma > 0.0 && gamma <= 1.0))
            throw std::invalid_argument("DdqnConfig: gamma out of (0, 1]");
        if (batch_size < 1 || warmup_transitions < batch_size)
            throw std::invalid_argument("DdqnConfig: warm-up must fill at least one batch");
        if (total_steps < 1 || checkpoint_every < 1)
            throw std::invalid_argument("DdqnConfig: steps/checkpoint cadence must be positive");
    }
};

/// Greedy action of a Q-network on a single normalized state; argmax ties go
/// to the smaller index.
inline int greedy_action(const Mlp& qnet, double state) {
    Matrix x(1, 1);
    x.at(0, 0) = state;
    const Matrix q = qnet.forward(x);
    int best = 0;
    for (int a = 1; a < q.cols; ++a)
        if (q.at(0, a) > q.at(0, best)) best = a;
    return best;
}

/// Double-Q targets: r if done, else r + gamma * Q_target(s', argmax_a
/// Q_online(s', a)). Truncated transitions bootstrap unless the flag says
/// otherwise. Reference implementation; the trainer uses a fused equivalent.
inline std::vector<double> td_target(std::span<const Transition> batch, const Mlp& online,
                                     const Mlp& target, double gamma,
                                     bool bootstrap_on_truncation = true) {
    if (batch.empty()) throw std::invalid_argument("td_target: empty batch");
    Matrix next_states(static_cast<int>(batch.size()), 1);
    for (std::size_t i = 0; i < batch.size(); ++i) next_states.at(static_cast<int>(i), 0) = batch[i].next_state;
    const Matrix qo = online.forward(next_states);
    const Matrix qt = target.forward(next_states);
    std::vector<double> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = batch[i];
        if (t.done || (t.truncated && !bootstrap_on_truncation)) {
            out[i] = t.reward;
            continue;
        }
        const double* row_o = qo.row(static_cast<int>(i));
        int best = 0;
        for (int a = 1; a < qo.cols; ++a)
            if (row_o[a] > row_o[best]) best = a;
        out[i] = t.reward + gamma * qt.at(static_cast<int>(i), best);
    }
    return out;
}

/// Double DQN trainer for the OneMax decision process. Single-threaded
/// training loop; checkpoint evaluation fans out over the eval worker pool.
class DdqnTrainer {
public:
    explicit DdqnTrainer(DdqnConfig cfg)
        : cfg_(std::move(cfg)),
          portfolio_(Portfolio::for_dimension(cfg_.env.n)),
          buffer_(cfg_.buffer_capacity),
          behavior_rng_(derive_seed(cfg_.seed, 0, "ddqn-behavior")),
          batch_rng_(derive_seed(cfg_.seed, 0, "ddqn-batch")),
          env_(make_env(cfg_)) {
        cfg_.validate();
        Rng init_rng(derive_seed(cfg_.seed, 0, "ddqn-init"));
        online_ = Mlp::glorot({1, cfg_.hidden_units, cfg_.hidden_units, portfolio_.size()},
                              init_rng);
        target_ = online_;
        adam_ = AdamState::for_net(online_, cfg_.learning_rate);
    }

    const DdqnConfig& config() const { return cfg_; }
    const Portfolio& portfolio() const { return portfolio_; }
    const Mlp& online() const { return online_; }
    const Mlp& target() const { return target_; }
    ReplayBuffer& buffer() { return buffer_; }
    const RewardSpec& reward_spec() const { return cfg_.reward; }

    /// Uniform-random behavior for `warmup_transitions` environment steps.
    /// Transitions are stored with the naive reward and rewritten to the
    /// configured variant once the adaptive bias (if any) is resolved.
    /// Returns the naive-reward statistics of the warm-up sample.
    RewardStats warmup() {
        if (buffer_.size() != 0) throw std::logic_error("warmup: buffer must be empty");
        std::vector<double> naive_rewards;
        naive_rewards.reserve(static_cast<std::size_t>(cfg_.warmup_transitions));
        for (int i = 0; i < cfg_.warmup_transitions; ++i) {
            if (env_.finished()) env_.reset();
            const double s = normalized_state();
            const int action = static_cast<int>(
                behavior_rng_.uniform_below(static_cast<std::uint64_t>(portfolio_.size())));
            const StepOutcome out = env_.step(portfolio_.lambda_at(action));
            const double naive = static_cast<double>(out.delta_f) - out.step_evals;
            naive_rewards.push_back(naive);
            Transition t;
            t.state = s;
            t.action = action;
            t.reward = naive; // rewritten by resolve_rewards()
            t.next_state = normalized_state();
            t.done = out.terminated;
            t.truncated = out.truncated;
            buffer_.push(t);
        }
        warmup_stats_ = collect_reward_stats(naive_rewards);
        return warmup_stats_;
    }

    /// Resolves the adaptive bias from the warm-up statistics (if the variant
    /// asks for one) and rewrites the buffered naive rewards to the
    /// configured variant.
    void resolve_rewards() {
        if (cfg_.reward.needs_bias_resolution())
            cfg_.reward.resolved_bias = adaptive_bias(warmup_stats_);
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            Transition& t = buffer_.at(i);
            t.reward = reward_from_naive(cfg_.reward, t.reward, cfg_.env.n);
        }
    }

    /// epsilon-greedy behavior on the online network.
    int behavior_action(double state) {
        if (behavior_rng_.bernoulli(cfg_.epsilon))
            return static_cast<int>(
                behavior_rng_.uniform_below(static_cast<std::uint64_t>(portfolio_.size())));
        return greedy_action(online_, state);
    }

    /// One gradient update: uniform batch, mean squared TD error against
    /// double-Q targets, one Adam step, one soft target update. Returns the
    /// loss, or nothing when the buffer cannot fill a batch yet.
    std::optional<double> train_step() {
        const std::size_t batch = static_cast<std::size_t>(cfg_.batch_size);
        if (buffer_.size() < batch) return std::nullopt;
        buffer_.sample_batch(batch, batch_rng_, batch_scratch_);
        return update_from_batch(batch_scratch_);
    }

    /// Exposed for tests: the fused update on an explicit batch.
    double update_from_batch(const std::vector<Transition>& batch) {
        const int n = cfg_.env.n;
        const int k = portfolio_.size();

        // States are multiples of 1/n, so batch rows collapse onto the
        // fitness grid; forward/backward run once per distinct fitness.
        auto bucket_rows = [&](auto state_of, Matrix& distinct, std::vector<int>& row_of) {
            bucket_scratch_.assign(static_cast<std::size_t>(n) + 1, -1);
            std::vector<double> values;
            row_of.resize(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const double s = state_of(batch[i]);
                const auto f = static_cast<std::size_t>(std::lround(s * n));
                if (bucket_scratch_[f] < 0) {
                    bucket_scratch_[f] = static_cast<int>(values.size());
                    values.push_back(s);
                }
                row_of[i] = bucket_scratch_[f];
            }
            distinct = Matrix(static_cast<int>(values.size()), 1);
            for (std::size_t r = 0; r < values.size(); ++r) distinct.at(static_cast<int>(r), 0) = values[r];
        };

        Matrix next_distinct;
        std::vector<int> next_row;
        bucket_rows([](const Transition& t) { return t.next_state; }, next_distinct, next_row);
        const Matrix qn_online = online_.forward(next_distinct);
        const Matrix qn_target = target_.forward(next_distinct);
        std::vector<double> bootstrap(static_cast<std::size_t>(next_distinct.rows));
        for (int r = 0; r < next_distinct.rows; ++r) {
            const double* row = qn_online.row(r);
            int best = 0;
            for (int a = 1; a < k; ++a)
                if (row[a] > row[best]) best = a;
            bootstrap[static_cast<std::size_t>(r)] = cfg_.gamma * qn_target.at(r, best);
        }

        Matrix cur_distinct;
        std::vector<int> cur_row;
        bucket_rows([](const Transition& t) { return t.state; }, cur_distinct, cur_row);
        const Matrix q = online_.forward(cur_distinct);

        Matrix upstream(cur_distinct.rows, k);
        const double inv_batch = 1.0 / static_cast<double>(batch.size());
        double loss = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const Transition& t = batch[i];
            double y = t.reward;
            if (!t.done && (cfg_.bootstrap_on_truncation || !t.truncated))
                y += bootstrap[static_cast<std::size_t>(next_row[i])];
            const double qi = q.at(cur_row[i], t.action);
            const double err = qi - y;
            loss += err * err;
            upstream.at(cur_row[i], t.action) += 2.0 * err * inv_batch;
        }
        loss *= inv_batch;

        const MlpGradients grads = online_.backward(cur_distinct, upstream);
        adam_step(online_, grads, adam_);
        soft_update(target_, online_, cfg_.tau);
        return loss;
    }

    /// Warm-up, bias resolution, then `total_steps` environment steps with
    /// epsilon-greedy behavior and one gradient update per step. The greedy
    /// policy is extracted and quick-evaluated every `checkpoint_every` steps.
    TrainingLog run_training(const CheckpointSink& sink = nullptr) {
        TrainingLog log;
        log.warmup_stats = warmup();
        resolve_rewards();
        log.resolved_bias = cfg_.reward.resolved_bias;

        const std::vector<std::uint64_t> quick_seeds = make_quick_seeds();
        TabularPolicy previous = extract_greedy(online_, cfg_.env.n);
        log.initial_policy = previous;
        log.initial_quick_ert_over_n =
            evaluate(Policy::tabular(previous), cfg_.env, quick_seeds, cfg_.eval_workers)
                .mean_ert_over_n;
        double loss_accum = 0.0;
        long long loss_count = 0;

        if (env_.finished()) env_.reset();
        for (long long step = 1; step <= cfg_.total_steps; ++step) {
            const double s = normalized_state();
            const int action = behavior_action(s);
            const StepOutcome out = env_.step(portfolio_.lambda_at(action));
            Transition t;
            t.state = s;
            t.action = action;
            t.reward = reward(cfg_.reward, out.delta_f, out.step_evals, cfg_.env.n);
            t.next_state = normalized_state();
            t.done = out.terminated;
            t.truncated = out.truncated;
            buffer_.push(t);
            if (env_.finished()) env_.reset();

            if (const auto loss = train_step()) {
                loss_accum += *loss;
                ++loss_count;
            }

            if (step % 512 == 0 && !online_.all_finite())
                throw TrainingDiverged("ddqn: non-finite parameters at step " +
                                       std::to_string(step));

            if (step % cfg_.checkpoint_every == 0) {
                if (!online_.all_finite())
                    throw TrainingDiverged("ddqn: non-finite parameters at step " +
                                           std::to_string(step));
                CheckpointRecord rec;
                rec.step = step;
                rec.policy = extract_greedy(online_, cfg_.env.n);
                rec.quick_ert_over_n =
                    evaluate(Policy::tabular(rec.policy), cfg_.env, quick_seeds,
                             cfg_.eval_workers)
                        .mean_ert_over_n;
                rec.pairwise_diff = pairwise_difference(rec.policy, previous);
                rec.mean_loss = loss_count > 0 ? loss_accum / static_cast<double>(loss_count) : 0.0;
                previous = rec.policy;
                loss_accum = 0.0;
                loss_count = 0;
                if (sink) sink(rec);
                log.checkpoints.push_back(std::move(rec));
            }
            log.steps_completed = step;
        }
        return log;
    }

private:
    static OneMaxEnv make_env(const DdqnConfig& cfg) {
        EnvConfig env_cfg = cfg.env;
        env_cfg.seed = derive_seed(cfg.seed, 0, "ddqn-env");
        return OneMaxEnv(env_cfg);
    }

    double normalized_state() const {
        return static_cast<double>(env_.state().fitness) / cfg_.env.n;
    }

    std::vector<std::uint64_t> make_quick_seeds() const {
        std::vector<std::uint64_t> seeds;
        seeds.reserve(static_cast<std::size_t>(cfg_.quick_eval_seeds));
        for (int i = 0; i < cfg_.quick_eval_seeds; ++i)
            seeds.push_back(derive_seed(cfg_.seed, static_cast<std::uint64_t>(i), "quick-eval"));
        return seeds;
    }

    DdqnConfig cfg_;
    Portfolio portfolio_;
    ReplayBuffer buffer_;
    Rng behavior_rng_;
    Rng batch_rng_;
    OneMaxEnv env_;
    Mlp online_;
    Mlp target_;
    AdamState adam_;
    RewardStats warmup_stats_;
    std::vector<Transition> batch_scratch_;
    std::vector<int> bucket_scratch_;
};

} // namespace dac
