#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "dac/bitstring.hpp"
#include "dac/rng.hpp"

namespace dac {

/// Round to nearest integer, half away from zero upward: 1.5 -> 2, 1.49 -> 1.
inline int round_half_up(double lambda) {
    if (lambda < 0.5) throw std::invalid_argument("round_half_up: lambda must be >= 0.5");
    const double fl = std::floor(lambda);
    return static_cast<int>(lambda - fl < 0.5 ? fl : fl + 1.0);
}

/// Binomial(n, p) conditioned on a non-zero outcome, sampled by rejection
/// (the exact conditional law; acceptance probability 1 - (1-p)^n).
inline int sample_bin_gt0(int n, double p, Rng& rng) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("sample_bin_gt0: p out of (0, 1]");
    if (n < 1) throw std::invalid_argument("sample_bin_gt0: n must be >= 1");
    for (;;) {
        int k = 0;
        for (int i = 0; i < n; ++i) k += rng.bernoulli(p);
        if (k > 0) return k;
    }
}

struct EnvConfig {
    int n = 100;
    long long cutoff_evals = 0; // 0 means the default of floor(0.8 * n^2)
    std::uint64_t seed = 1;

    long long resolved_cutoff() const {
        return cutoff_evals > 0 ? cutoff_evals
                                : static_cast<long long>(0.8 * static_cast<double>(n) * n);
    }
};

struct GaState {
    BitString x;
    int fitness = 0;
    long long evals = 0;     // cumulative solution evaluations
    long long iteration = 0; // decision steps taken
};

struct StepOutcome {
    int next_fitness = 0;
    int delta_f = 0;
    int step_evals = 0;
    bool terminated = false; // optimum reached
    bool truncated = false;  // evaluation budget exhausted before the optimum
};

/// One run of the population-size-controlled GA on OneMax, exposed as an
/// episodic decision process: one decision (the choice of lambda) per GA
/// iteration. Single-threaded; run several instances for parallelism.
class OneMaxEnv {
public:
    explicit OneMaxEnv(EnvConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
        if (cfg_.n < 1) throw std::invalid_argument("OneMaxEnv: n must be >= 1");
        if (cfg_.resolved_cutoff() < cfg_.n)
            throw std::invalid_argument("OneMaxEnv: cutoff_evals must be >= n");
        reset();
    }

    const GaState& state() const { return state_; }
    int n() const { return cfg_.n; }
    long long cutoff() const { return cfg_.resolved_cutoff(); }
    bool terminated() const { return terminated_; }
    bool truncated() const { return truncated_; }
    bool finished() const { return terminated_ || truncated_; }
    Rng& rng() { return rng_; }

    /// Fresh uniform random parent. The initial evaluation is not counted
    /// toward the evaluation budget.
    const GaState& reset() {
        state_.x = random_bitstring(cfg_.n, rng_);
        state_.fitness = one_max(state_.x);
        state_.evals = 0;
        state_.iteration = 0;
        terminated_ = state_.fitness == cfg_.n;
        truncated_ = false;
        return state_;
    }

    /// One full GA iteration with the given population size: mutation phase,
    /// crossover phase, selection. Crossover offspring identical to a parent
    /// inherit the known fitness without an evaluation. Truncation is checked
    /// after the iteration completes.
    StepOutcome step(int lambda) {
        if (finished()) throw std::logic_error("OneMaxEnv::step: episode already finished");
        if (lambda < 1 || lambda > cfg_.n)
            throw std::invalid_argument("OneMaxEnv::step: lambda out of [1, n]");

        const int n = cfg_.n;
        const double p = static_cast<double>(lambda) / n;
        const double c = 1.0 / lambda;
        const int prev_fitness = state_.fitness;
        int step_evals = 0;

        // Mutation phase: lambda offspring, each with the same number of
        // flipped positions; winner uniform among the fittest.
        const int flips = sample_bin_gt0(n, p, rng_);
        BitString mut_winner;
        int mut_fitness = -1;
        int ties = 0;
        for (int i = 0; i < lambda; ++i) {
            BitString cand = flip_bits(state_.x, flips, rng_);
            const int f = one_max(cand);
            ++step_evals;
            if (f > mut_fitness) {
                mut_fitness = f;
                mut_winner = std::move(cand);
                ties = 1;
            } else if (f == mut_fitness) {
                ++ties;
                if (rng_.uniform_below(static_cast<std::uint64_t>(ties)) == 0)
                    mut_winner = std::move(cand);
            }
        }

        // Crossover phase: offspring equal to a parent reuse its fitness and
        // cost nothing; winner uniform among the fittest.
        BitString cross_winner;
        int cross_fitness = -1;
        ties = 0;
        for (int i = 0; i < lambda; ++i) {
            BitString cand = crossover(state_.x, mut_winner, c, rng_);
            int f;
            if (cand == state_.x) {
                f = prev_fitness;
            } else if (cand == mut_winner) {
                f = mut_fitness;
            } else {
                f = one_max(cand);
                ++step_evals;
            }
            if (f > cross_fitness) {
                cross_fitness = f;
                cross_winner = std::move(cand);
                ties = 1;
            } else if (f == cross_fitness) {
                ++ties;
                if (rng_.uniform_below(static_cast<std::uint64_t>(ties)) == 0)
                    cross_winner = std::move(cand);
            }
        }

        // Selection and update: crossover winner on a strict improvement over
        // the mutation winner, then elitist acceptance against the parent.
        BitString* survivor = &mut_winner;
        int survivor_fitness = mut_fitness;
        if (cross_fitness > mut_fitness) {
            survivor = &cross_winner;
            survivor_fitness = cross_fitness;
        }
        if (survivor_fitness >= prev_fitness) {
            state_.x = std::move(*survivor);
            state_.fitness = survivor_fitness;
        }

        state_.evals += step_evals;
        state_.iteration += 1;
        terminated_ = state_.fitness == n;
        truncated_ = !terminated_ && state_.evals >= cutoff();

        StepOutcome out;
        out.next_fitness = state_.fitness;
        out.delta_f = state_.fitness - prev_fitness;
        out.step_evals = step_evals;
        out.terminated = terminated_;
        out.truncated = truncated_;
        return out;
    }

private:
    EnvConfig cfg_;
    Rng rng_;
    GaState state_;
    bool terminated_ = false;
    bool truncated_ = false;
};

} // namespace dac
