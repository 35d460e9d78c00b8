#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace dac {

/// Small fixed MDP used to check the reward-shifting identity at the level
/// where it is exact: 4 states, 2 actions, no terminal states, every
/// transition row sums to 1. Constants below are arbitrary but frozen.
struct SyntheticMdp {
    static constexpr int kStates = 4;
    static constexpr int kActions = 2;

    // transition[s][a][s'] and reward[s][a]
    std::array<std::array<std::array<double, kStates>, kActions>, kStates> transition{};
    std::array<std::array<double, kActions>, kStates> reward{};

    static SyntheticMdp fixed() {
        SyntheticMdp m;
        m.transition[0][0] = {0.7, 0.3, 0.0, 0.0};
        m.transition[0][1] = {0.1, 0.2, 0.7, 0.0};
        m.transition[1][0] = {0.0, 0.5, 0.5, 0.0};
        m.transition[1][1] = {0.3, 0.0, 0.2, 0.5};
        m.transition[2][0] = {0.2, 0.2, 0.3, 0.3};
        m.transition[2][1] = {0.0, 0.0, 0.1, 0.9};
        m.transition[3][0] = {0.6, 0.0, 0.4, 0.0};
        m.transition[3][1] = {0.0, 0.4, 0.0, 0.6};
        m.reward[0] = {1.0, 0.4};
        m.reward[1] = {-0.5, 0.6};
        m.reward[2] = {0.0, -0.2};
        m.reward[3] = {2.0, 1.5};
        return m;
    }
};

using QTable = std::array<std::array<double, SyntheticMdp::kActions>, SyntheticMdp::kStates>;

/// Optimal Q via value iteration with every reward shifted by `reward_shift`.
inline QTable value_iteration(const SyntheticMdp& mdp, double gamma, double reward_shift,
                              double tolerance = 1e-13, int max_iterations = 100000) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("value_iteration: gamma out of (0, 1)");
    QTable q{};
    for (int it = 0; it < max_iterations; ++it) {
        QTable next{};
        double max_change = 0.0;
        for (int s = 0; s < SyntheticMdp::kStates; ++s) {
            for (int a = 0; a < SyntheticMdp::kActions; ++a) {
                double v = mdp.reward[s][a] + reward_shift;
                for (int sp = 0; sp < SyntheticMdp::kStates; ++sp) {
                    const double best = std::max(q[sp][0], q[sp][1]);
                    v += gamma * mdp.transition[s][a][sp] * best;
                }
                next[s][a] = v;
                max_change = std::max(max_change, std::fabs(v - q[s][a]));
            }
        }
        q = next;
        if (max_change < tolerance) break;
    }
    return q;
}

struct ShiftOracleReport {
    double gamma = 0.0;
    double shift = 0.0;
    QTable base_q{};
    QTable shifted_q{};
    double expected_offset = 0.0;   // shift / (1 - gamma)
    double max_offset_error = 0.0;  // max |Q' - (Q + offset)|
    bool greedy_identical = true;
    std::array<int, SyntheticMdp::kStates> base_greedy{};
    std::array<int, SyntheticMdp::kStates> shifted_greedy{};
};

/// Checks that shifting every reward by b moves the optimal Q-table by
/// exactly b / (1 - gamma) and leaves the greedy policy unchanged.
inline ShiftOracleReport tabular_shift_oracle(double gamma, double shift_b) {
    const SyntheticMdp mdp = SyntheticMdp::fixed();
    ShiftOracleReport r;
    r.gamma = gamma;
    r.shift = shift_b;
    r.base_q = value_iteration(mdp, gamma, 0.0);
    r.shifted_q = value_iteration(mdp, gamma, shift_b);
    r.expected_offset = shift_b / (1.0 - gamma);
    for (int s = 0; s < SyntheticMdp::kStates; ++s) {
        for (int a = 0; a < SyntheticMdp::kActions; ++a) {
            const double err = std::fabs(r.shifted_q[s][a] - (r.base_q[s][a] + r.expected_offset));
            r.max_offset_error = std::max(r.max_offset_error, err);
        }
        r.base_greedy[s] = r.base_q[s][1] > r.base_q[s][0] ? 1 : 0;
        r.shifted_greedy[s] = r.shifted_q[s][1] > r.shifted_q[s][0] ? 1 : 0;
        if (r.base_greedy[s] != r.shifted_greedy[s]) r.greedy_identical = false;
    }
    return r;
}

} // namespace dac
