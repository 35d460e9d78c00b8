#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "dac/metrics.hpp"
#include "dac/mlp.hpp"
#include "dac/onemax_env.hpp"
#include "dac/policy.hpp"
#include "dac/portfolio.hpp"
#include "dac/reward.hpp"
#include "dac/rng.hpp"
#include "dac/training_log.hpp"

namespace dac {

struct PpoConfig {
    EnvConfig env;
    RewardSpec reward;
    double learning_rate = 0.0003;
    int rollout_steps = 2048;
    int minibatch_size = 64;
    int epochs = 10;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_range = 0.2;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    long long total_steps = 500000;
    int checkpoint_every = 2000;
    int hidden_units = 50;
    std::uint64_t seed = 1;
    int quick_eval_seeds = 100;
    int eval_workers = 10;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("PpoConfig: gamma out of (0, 1]");
        if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
            throw std::invalid_argument("PpoConfig: gae_lambda out of [0, 1]");
        if (!(clip_range > 0.0)) throw std::invalid_argument("PpoConfig: clip_range must be positive");
        if (rollout_steps < 1 || minibatch_size < 1 || epochs < 1)
            throw std::invalid_argument("PpoConfig: rollout/minibatch/epochs must be positive");
        if (minibatch_size > rollout_steps)
            throw std::invalid_argument("PpoConfig: minibatch larger than rollout");
    }
};

/// On-policy rollout storage. `next_values` holds V(s_{t+1}) for every step,
/// which doubles as the bootstrap value at truncations and at the rollout end.
struct RolloutBuffer {
    std::vector<double> states;
    std::vector<int> actions;
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<double> next_values;
    std::vector<std::uint8_t> dones;
    std::vector<std::uint8_t> truncated;
    int capacity = 0;

    explicit RolloutBuffer(int cap = 0) : capacity(cap) {}

    int size() const { return static_cast<int>(states.size()); }
    bool full() const { return size() == capacity; }

    void clear() {
        states.clear();
        actions.clear();
        log_probs.clear();
        rewards.clear();
        values.clear();
        next_values.clear();
        dones.clear();
        truncated.clear();
    }

    void push(double state, int action, double log_prob, double reward, double value,
              double next_value, bool done, bool trunc) {
        if (full()) throw std::logic_error("RolloutBuffer: push beyond capacity");
        states.push_back(state);
        actions.push_back(action);
        log_probs.push_back(log_prob);
        rewards.push_back(reward);
        values.push_back(value);
        next_values.push_back(next_value);
        dones.push_back(done);
        truncated.push_back(trunc);
    }
};

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// Generalized advantage estimation over the rollout. Terminal steps stop
/// bootstrapping; both terminal and truncated steps reset the recursion
/// (the next buffer entry belongs to a new episode), but truncated steps
/// still bootstrap through the stored V(s_{t+1}).
inline GaeResult compute_gae(const RolloutBuffer& buf, double gamma, double gae_lambda) {
    const int count = buf.size();
    if (count == 0) throw std::invalid_argument("compute_gae: empty buffer");
    GaeResult r;
    r.advantages.assign(static_cast<std::size_t>(count), 0.0);
    r.returns.assign(static_cast<std::size_t>(count), 0.0);
    double carry = 0.0;
    for (int t = count - 1; t >= 0; --t) {
        const auto i = static_cast<std::size_t>(t);
        const double bootstrap = buf.dones[i] ? 0.0 : 1.0;
        const double chain = (buf.dones[i] || buf.truncated[i]) ? 0.0 : 1.0;
        const double delta =
            buf.rewards[i] + gamma * buf.next_values[i] * bootstrap - buf.values[i];
        carry = delta + gamma * gae_lambda * chain * carry;
        r.advantages[i] = carry;
        r.returns[i] = carry + buf.values[i];
    }
    return r;
}

namespace detail {

/// log-softmax of one logits row.
inline void log_softmax_row(const double* logits, int k, double* out) {
    double m = logits[0];
    for (int a = 1; a < k; ++a) m = std::max(m, logits[a]);
    double sum = 0.0;
    for (int a = 0; a < k; ++a) sum += std::exp(logits[a] - m);
    const double lse = m + std::log(sum);
    for (int a = 0; a < k; ++a) out[a] = logits[a] - lse;
}

inline double grad_l2_norm(const MlpGradients& a, const MlpGradients& b) {
    double ss = 0.0;
    for (const auto& w : a.weights)
        for (double v : w.data) ss += v * v;
    for (const auto& bias : a.biases)
        for (double v : bias) ss += v * v;
    for (const auto& w : b.weights)
        for (double v : w.data) ss += v * v;
    for (const auto& bias : b.biases)
        for (double v : bias) ss += v * v;
    return std::sqrt(ss);
}

inline void scale_grads(MlpGradients& g, double factor) {
    for (auto& w : g.weights)
        for (double& v : w.data) v *= factor;
    for (auto& b : g.biases)
        for (double& v : b) v *= factor;
}

} // namespace detail

/// Actor and critic share the hidden architecture but keep separate parameters.
struct ActorCritic {
    Mlp actor;  // k logits -> softmax categorical
    Mlp critic; // scalar state value

    static ActorCritic init(int hidden_units, int actions, Rng& rng) {
        ActorCritic ac;
        ac.actor = Mlp::glorot({1, hidden_units, hidden_units, actions}, rng);
        ac.critic = Mlp::glorot({1, hidden_units, hidden_units, 1}, rng);
        return ac;
    }

    int action_count() const { return actor.output_dim(); }

    /// Log-probabilities over actions for a single state.
    std::vector<double> log_policy(double state) const {
        Matrix x(1, 1);
        x.at(0, 0) = state;
        const Matrix logits = actor.forward(x);
        std::vector<double> logp(static_cast<std::size_t>(logits.cols));
        detail::log_softmax_row(logits.row(0), logits.cols, logp.data());
        return logp;
    }

    double value(double state) const {
        Matrix x(1, 1);
        x.at(0, 0) = state;
        return critic.forward(x).at(0, 0);
    }

    int sample_action(std::span<const double> logp, Rng& rng) const {
        const double u = rng.uniform01();
        double cum = 0.0;
        for (std::size_t a = 0; a + 1 < logp.size(); ++a) {
            cum += std::exp(logp[a]);
            if (u < cum) return static_cast<int>(a);
        }
        return static_cast<int>(logp.size()) - 1;
    }
};

struct PpoUpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double advantage_mean_before = 0.0;
    double advantage_std_before = 0.0;
    int minibatches = 0;
};

/// One minibatch of the clipped-surrogate objective.
struct PpoMinibatch {
    std::vector<double> states;
    std::vector<int> actions;
    std::vector<double> old_log_probs;
    std::vector<double> advantages; // already normalized
    std::vector<double> returns;
};

struct PpoMinibatchResult {
    MlpGradients actor_grads;
    MlpGradients critic_grads;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double total_loss = 0.0; // policy + value_coef * value - entropy_coef * entropy
};

/// Loss and exact gradients of one minibatch: mean clipped surrogate, mean
/// squared value error against the returns, mean entropy bonus. Gradients are
/// unclipped here; the caller applies the global norm clip.
inline PpoMinibatchResult ppo_minibatch_gradients(const ActorCritic& ac, const PpoMinibatch& mb,
                                                  double clip_range, double value_coef,
                                                  double entropy_coef) {
    const int count = static_cast<int>(mb.states.size());
    if (count == 0) throw std::invalid_argument("ppo_minibatch_gradients: empty minibatch");
    const int k = ac.action_count();
    Matrix x(count, 1);
    for (int i = 0; i < count; ++i) x.at(i, 0) = mb.states[static_cast<std::size_t>(i)];

    const Matrix logits = ac.actor.forward(x);
    const Matrix values = ac.critic.forward(x);
    Matrix actor_upstream(count, k);
    Matrix critic_upstream(count, 1);
    const double inv = 1.0 / count;
    PpoMinibatchResult r;
    std::vector<double> logp(static_cast<std::size_t>(k));

    for (int i = 0; i < count; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        detail::log_softmax_row(logits.row(i), k, logp.data());
        const int action = mb.actions[idx];
        const double adv = mb.advantages[idx];
        const double ratio =
            std::exp(logp[static_cast<std::size_t>(action)] - mb.old_log_probs[idx]);
        const double clipped = std::clamp(ratio, 1.0 - clip_range, 1.0 + clip_range);
        const double unclipped_term = ratio * adv;
        const double clipped_term = clipped * adv;
        r.policy_loss -= std::min(unclipped_term, clipped_term) * inv;

        // Gradient flows through the unclipped branch only when it is the
        // active minimum (ties included); the clipped branch is constant in
        // theta wherever it is strictly smaller.
        const bool unclipped_active = unclipped_term <= clipped_term;

        double entropy = 0.0;
        for (int a = 0; a < k; ++a)
            entropy -= std::exp(logp[static_cast<std::size_t>(a)]) * logp[static_cast<std::size_t>(a)];
        r.entropy += entropy * inv;

        double* up = actor_upstream.row(i);
        for (int a = 0; a < k; ++a) {
            const double p = std::exp(logp[static_cast<std::size_t>(a)]);
            if (unclipped_active) {
                const double indicator = a == action ? 1.0 : 0.0;
                up[a] -= adv * ratio * (indicator - p) * inv;
            }
            up[a] += entropy_coef * p * (logp[static_cast<std::size_t>(a)] + entropy) * inv;
        }

        const double verr = values.at(i, 0) - mb.returns[idx];
        r.value_loss += verr * verr * inv;
        critic_upstream.at(i, 0) = value_coef * 2.0 * verr * inv;
    }

    r.total_loss = r.policy_loss + value_coef * r.value_loss - entropy_coef * r.entropy;
    r.actor_grads = ac.actor.backward(x, actor_upstream);
    r.critic_grads = ac.critic.backward(x, critic_upstream);
    return r;
}

/// Clipped-surrogate PPO update: advantages normalized once per update batch,
/// then `epochs` passes over shuffled minibatches with policy, value and
/// entropy terms and a global gradient-norm clip.
inline PpoUpdateStats ppo_update(ActorCritic& ac, AdamState& actor_opt, AdamState& critic_opt,
                                 const RolloutBuffer& buf, const PpoConfig& cfg, Rng& rng) {
    if (!buf.full()) throw std::logic_error("ppo_update: rollout buffer not full");
    const int count = buf.size();

    GaeResult gae = compute_gae(buf, cfg.gamma, cfg.gae_lambda);
    PpoUpdateStats stats;
    stats.advantage_mean_before = mean(gae.advantages);
    stats.advantage_std_before = sample_stddev(gae.advantages);
    {
        const double denom = std::max(stats.advantage_std_before, 1e-8);
        for (double& a : gae.advantages) a = (a - stats.advantage_mean_before) / denom;
    }

    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;

    double policy_loss_sum = 0.0, value_loss_sum = 0.0, entropy_sum = 0.0;
    PpoMinibatch mb;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = count - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[rng.uniform_below(static_cast<std::uint64_t>(i) + 1)]);
        for (int start = 0; start + cfg.minibatch_size <= count; start += cfg.minibatch_size) {
            const auto size = static_cast<std::size_t>(cfg.minibatch_size);
            mb.states.resize(size);
            mb.actions.resize(size);
            mb.old_log_probs.resize(size);
            mb.advantages.resize(size);
            mb.returns.resize(size);
            for (std::size_t i = 0; i < size; ++i) {
                const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>(start) + i]);
                mb.states[i] = buf.states[idx];
                mb.actions[i] = buf.actions[idx];
                mb.old_log_probs[i] = buf.log_probs[idx];
                mb.advantages[i] = gae.advantages[idx];
                mb.returns[i] = gae.returns[idx];
            }

            PpoMinibatchResult res =
                ppo_minibatch_gradients(ac, mb, cfg.clip_range, cfg.value_coef, cfg.entropy_coef);
            const double norm = detail::grad_l2_norm(res.actor_grads, res.critic_grads);
            if (norm > cfg.max_grad_norm && norm > 0.0) {
                const double factor = cfg.max_grad_norm / norm;
                detail::scale_grads(res.actor_grads, factor);
                detail::scale_grads(res.critic_grads, factor);
            }
            adam_step(ac.actor, res.actor_grads, actor_opt);
            adam_step(ac.critic, res.critic_grads, critic_opt);

            policy_loss_sum += res.policy_loss;
            value_loss_sum += res.value_loss;
            entropy_sum += res.entropy;
            ++stats.minibatches;
        }
    }

    if (!ac.actor.all_finite() || !ac.critic.all_finite())
        throw TrainingDiverged("ppo: non-finite parameters after update");

    stats.policy_loss = policy_loss_sum / stats.minibatches;
    stats.value_loss = value_loss_sum / stats.minibatches;
    stats.entropy = entropy_sum / stats.minibatches;
    return stats;
}

/// PPO trainer: alternates fixed-length rollouts (crossing episode
/// boundaries) with clipped-surrogate updates; the greedy policy (argmax of
/// the categorical head) is checkpointed at the first opportunity at or after
/// every `checkpoint_every`-step mark.
class PpoTrainer {
public:
    explicit PpoTrainer(PpoConfig cfg)
        : cfg_(std::move(cfg)),
          portfolio_(Portfolio::for_dimension(cfg_.env.n)),
          behavior_rng_(derive_seed(cfg_.seed, 0, "ppo-behavior")),
          shuffle_rng_(derive_seed(cfg_.seed, 0, "ppo-shuffle")),
          env_(make_env(cfg_)),
          buffer_(cfg_.rollout_steps) {
        cfg_.validate();
        Rng init_rng(derive_seed(cfg_.seed, 0, "ppo-init"));
        ac_ = ActorCritic::init(cfg_.hidden_units, portfolio_.size(), init_rng);
        actor_opt_ = AdamState::for_net(ac_.actor, cfg_.learning_rate);
        critic_opt_ = AdamState::for_net(ac_.critic, cfg_.learning_rate);
    }

    const PpoConfig& config() const { return cfg_; }
    const ActorCritic& actor_critic() const { return ac_; }

    TrainingLog run_training(const CheckpointSink& sink = nullptr) {
        TrainingLog log;
        if (cfg_.reward.needs_bias_resolution()) {
            log.warmup_stats = collect_warmup_stats();
            cfg_.reward.resolved_bias = adaptive_bias(log.warmup_stats);
        }
        log.resolved_bias = cfg_.reward.resolved_bias;

        const std::vector<std::uint64_t> quick_seeds = make_quick_seeds();
        TabularPolicy previous = extract_greedy(ac_.actor, cfg_.env.n);
        log.initial_policy = previous;
        log.initial_quick_ert_over_n =
            evaluate(Policy::tabular(previous), cfg_.env, quick_seeds, cfg_.eval_workers)
                .mean_ert_over_n;
        long long steps_done = 0;
        long long next_mark = cfg_.checkpoint_every;
        double loss_accum = 0.0;
        long long loss_count = 0;

        while (steps_done < cfg_.total_steps) {
            collect_rollout();
            steps_done += buffer_.size();
            const PpoUpdateStats stats =
                ppo_update(ac_, actor_opt_, critic_opt_, buffer_, cfg_, shuffle_rng_);
            loss_accum += stats.policy_loss + cfg_.value_coef * stats.value_loss -
                          cfg_.entropy_coef * stats.entropy;
            ++loss_count;

            while (next_mark <= steps_done && next_mark <= cfg_.total_steps) {
                CheckpointRecord rec;
                rec.step = next_mark;
                rec.policy = extract_greedy(ac_.actor, cfg_.env.n);
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
                next_mark += cfg_.checkpoint_every;
            }
            log.steps_completed = steps_done;
        }
        return log;
    }

private:
    static OneMaxEnv make_env(const PpoConfig& cfg) {
        EnvConfig env_cfg = cfg.env;
        env_cfg.seed = derive_seed(cfg.seed, 0, "ppo-env");
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

    /// 10,000 uniform-random transitions, statistics only (PPO keeps no
    /// replay); used to resolve the adaptive bias.
    RewardStats collect_warmup_stats() {
        EnvConfig env_cfg = cfg_.env;
        env_cfg.seed = derive_seed(cfg_.seed, 0, "ppo-warmup-env");
        OneMaxEnv env(env_cfg);
        Rng rng(derive_seed(cfg_.seed, 0, "ppo-warmup"));
        std::vector<double> naive;
        naive.reserve(10000);
        for (int i = 0; i < 10000; ++i) {
            if (env.finished()) env.reset();
            const int action =
                static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(portfolio_.size())));
            const StepOutcome out = env.step(portfolio_.lambda_at(action));
            naive.push_back(static_cast<double>(out.delta_f) - out.step_evals);
        }
        return collect_reward_stats(naive);
    }

    void collect_rollout() {
        buffer_.clear();
        if (env_.finished()) env_.reset();
        while (!buffer_.full()) {
            const double s = normalized_state();
            const std::vector<double> logp = ac_.log_policy(s);
            const int action = ac_.sample_action(logp, behavior_rng_);
            const double value = ac_.value(s);
            const StepOutcome out = env_.step(portfolio_.lambda_at(action));
            const double r = reward(cfg_.reward, out.delta_f, out.step_evals, cfg_.env.n);
            const double next_s = normalized_state();
            const double next_value = ac_.value(next_s);
            buffer_.push(s, action, logp[static_cast<std::size_t>(action)], r, value, next_value,
                         out.terminated, out.truncated);
            if (env_.finished()) env_.reset();
        }
    }

    PpoConfig cfg_;
    Portfolio portfolio_;
    Rng behavior_rng_;
    Rng shuffle_rng_;
    OneMaxEnv env_;
    RolloutBuffer buffer_;
    ActorCritic ac_;
    AdamState actor_opt_;
    AdamState critic_opt_;
};

/// Per-step variance of the discounted return-to-go across equal-length
/// trajectories (sample variance).
inline std::vector<double> per_step_return_variances(
    const std::vector<std::vector<double>>& rewards, double gamma) {
    if (rewards.size() < 2)
        throw std::invalid_argument("per_step_return_variances: need at least 2 trajectories");
    const std::size_t length = rewards.front().size();
    for (const auto& r : rewards)
        if (r.size() != length)
            throw std::invalid_argument("per_step_return_variances: unequal lengths");
    std::vector<std::vector<double>> returns(rewards.size(), std::vector<double>(length, 0.0));
    for (std::size_t e = 0; e < rewards.size(); ++e) {
        double g = 0.0;
        for (std::size_t t = length; t-- > 0;) {
            g = rewards[e][t] + gamma * g;
            returns[e][t] = g;
        }
    }
    std::vector<double> variances(length, 0.0);
    std::vector<double> column(rewards.size());
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t e = 0; e < rewards.size(); ++e) column[e] = returns[e][t];
        const double sd = sample_stddev(column);
        variances[t] = sd * sd;
    }
    return variances;
}

struct VarianceProbeGroup {
    long long length = 0;
    int trajectories = 0;
    std::vector<double> variances;
};

struct VarianceProbeResult {
    std::vector<VarianceProbeGroup> groups; // ascending by length; singleton groups skipped

    const VarianceProbeGroup& largest_group() const {
        if (groups.empty()) throw std::logic_error("variance probe: no group with >= 2 trajectories");
        const VarianceProbeGroup* best = &groups.front();
        for (const auto& g : groups)
            if (g.trajectories > best->trajectories) best = &g;
        return *best;
    }
};

/// Rolls out episodes under the policy, groups them by length and computes
/// the per-step variance of the discounted naive-reward return-to-go.
inline VarianceProbeResult variance_probe(const Policy& policy, const EnvConfig& cfg,
                                          double gamma, int episodes,
                                          std::uint64_t seed_base) {
    if (episodes < 2) throw std::invalid_argument("variance_probe: episodes must be >= 2");
    std::map<long long, std::vector<std::vector<double>>> by_length;
    for (int ep = 0; ep < episodes; ++ep) {
        std::vector<double> rewards;
        const auto seed = derive_seed(seed_base, static_cast<std::uint64_t>(ep), "variance-probe");
        const EpisodeResult r =
            run_episode(cfg, seed, policy, [&](int, int, const StepOutcome& out) {
                rewards.push_back(static_cast<double>(out.delta_f) - out.step_evals);
            });
        by_length[r.steps].push_back(std::move(rewards));
    }
    VarianceProbeResult result;
    for (auto& [length, trajectories] : by_length) {
        if (trajectories.size() < 2) continue;
        VarianceProbeGroup g;
        g.length = length;
        g.trajectories = static_cast<int>(trajectories.size());
        g.variances = per_step_return_variances(trajectories, gamma);
        result.groups.push_back(std::move(g));
    }
    return result;
}

} // namespace dac
