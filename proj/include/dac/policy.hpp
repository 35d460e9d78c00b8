#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dac/mlp.hpp"
#include "dac/onemax_env.hpp"
#include "dac/portfolio.hpp"
#include "dac/rng.hpp"

namespace dac {

/// Theory-derived continuous policy sqrt(n / (n - f)).
inline double pi_cont(int n, int fitness) {
    if (fitness < 0 || fitness >= n)
        throw std::invalid_argument("pi_cont: fitness out of [0, n)");
    return std::sqrt(static_cast<double>(n) / (n - fitness));
}

/// Portfolio index of the lambda closest to pi_cont; ties toward the smaller lambda.
inline int pi_disc(int n, int fitness) {
    return Portfolio::for_dimension(n).nearest_index(pi_cont(n, fitness));
}

/// Fitness-indexed lambda table, the common currency between baselines,
/// extracted networks and the evaluator. Entries are portfolio indices for
/// fitness values 0 .. n-1 (the optimum needs no action).
struct TabularPolicy {
    int n = 0;
    std::vector<int> actions;

    bool operator==(const TabularPolicy&) const = default;
};

/// Number of fitness states on which two policies disagree.
inline int pairwise_difference(const TabularPolicy& a, const TabularPolicy& b) {
    if (a.n != b.n || a.actions.size() != b.actions.size())
        throw std::invalid_argument("pairwise_difference: dimension mismatch");
    int d = 0;
    for (std::size_t i = 0; i < a.actions.size(); ++i) d += a.actions[i] != b.actions[i];
    return d;
}

/// Plain-text serialization: header line, then one "fitness,lambda" pair per
/// line with the lambda value (not the portfolio index).
inline void save_tabular_policy(const TabularPolicy& p, const std::string& path) {
    const Portfolio pf = Portfolio::for_dimension(p.n);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_tabular_policy: cannot open " + path);
    out << "fitness,lambda\n";
    for (std::size_t f = 0; f < p.actions.size(); ++f)
        out << f << ',' << pf.lambda_at(p.actions[f]) << '\n';
    if (!out) throw std::runtime_error("save_tabular_policy: write failed for " + path);
}

inline TabularPolicy load_tabular_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_tabular_policy: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_tabular_policy: empty file");
    std::vector<std::pair<int, int>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int fitness = 0, lambda = 0;
        if (std::sscanf(line.c_str(), "%d,%d", &fitness, &lambda) != 2)
            throw std::runtime_error("load_tabular_policy: malformed line '" + line + "'");
        rows.emplace_back(fitness, lambda);
    }
    if (rows.empty()) throw std::runtime_error("load_tabular_policy: no rows in " + path);
    TabularPolicy p;
    p.n = static_cast<int>(rows.size());
    p.actions.assign(rows.size(), 0);
    const Portfolio pf = Portfolio::for_dimension(p.n);
    for (const auto& [fitness, lambda] : rows) {
        if (fitness < 0 || fitness >= p.n)
            throw std::runtime_error("load_tabular_policy: fitness " + std::to_string(fitness) +
                                     " out of range for n=" + std::to_string(p.n));
        p.actions[static_cast<std::size_t>(fitness)] = pf.index_of(lambda);
    }
    return p;
}

/// Greedy tabular policy of a Q-network over the fitness grid 0 .. n-1
/// (network input is the normalized fitness f/n). Argmax ties go to the
/// smaller action index.
inline TabularPolicy extract_greedy(const Mlp& qnet, int n) {
    if (qnet.input_dim() != 1)
        throw std::invalid_argument("extract_greedy: expected scalar state input");
    Matrix grid(n, 1);
    for (int f = 0; f < n; ++f) grid.at(f, 0) = static_cast<double>(f) / n;
    const Matrix q = qnet.forward(grid);
    TabularPolicy p;
    p.n = n;
    p.actions.assign(static_cast<std::size_t>(n), 0);
    for (int f = 0; f < n; ++f) {
        const double* row = q.row(f);
        int best = 0;
        for (int a = 1; a < q.cols; ++a)
            if (row[a] > row[best]) best = a;
        p.actions[static_cast<std::size_t>(f)] = best;
    }
    return p;
}

enum class PolicyType { ContinuousTheory, DiscreteTheory, Constant, Random, Tabular };

/// A parameter-control policy mapping the current fitness to a population
/// size. Immutable after construction; freely shareable across threads.
class Policy {
public:
    static Policy continuous_theory() { return Policy(PolicyType::ContinuousTheory); }
    static Policy discrete_theory() { return Policy(PolicyType::DiscreteTheory); }
    static Policy constant(int lambda) {
        Policy p(PolicyType::Constant);
        p.constant_lambda_ = lambda;
        return p;
    }
    static Policy random() { return Policy(PolicyType::Random); }
    static Policy tabular(TabularPolicy table) {
        Policy p(PolicyType::Tabular);
        p.table_ = std::move(table);
        return p;
    }

    PolicyType type() const { return type_; }
    const TabularPolicy& table() const { return table_; }

    /// Portfolio index for the given fitness. Not defined for the continuous
    /// theory policy, whose lambda is not restricted to the portfolio.
    int act(const Portfolio& pf, int n, int fitness, Rng& rng) const {
        switch (type_) {
        case PolicyType::ContinuousTheory:
            throw std::logic_error("Policy::act: continuous theory policy has no portfolio index");
        case PolicyType::DiscreteTheory:
            return pf.nearest_index(pi_cont(n, fitness));
        case PolicyType::Constant:
            return pf.index_of(constant_lambda_);
        case PolicyType::Random:
            return static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(pf.size())));
        case PolicyType::Tabular:
            if (table_.n != n) throw std::logic_error("Policy::act: tabular policy dimension mismatch");
            return table_.actions.at(static_cast<std::size_t>(fitness));
        }
        throw std::logic_error("Policy::act: unknown policy type");
    }

    /// Lambda value for the given fitness. The continuous theory policy uses
    /// round_half_up(pi_cont) directly; all other kinds go through the portfolio.
    int select_lambda(const Portfolio& pf, int n, int fitness, Rng& rng) const {
        if (type_ == PolicyType::ContinuousTheory) return round_half_up(pi_cont(n, fitness));
        return pf.lambda_at(act(pf, n, fitness, rng));
    }

    std::string describe() const {
        switch (type_) {
        case PolicyType::ContinuousTheory: return "pi_cont";
        case PolicyType::DiscreteTheory: return "pi_disc";
        case PolicyType::Constant: return "const_lambda_" + std::to_string(constant_lambda_);
        case PolicyType::Random: return "random";
        case PolicyType::Tabular: return "tabular";
        }
        return "unknown";
    }

private:
    explicit Policy(PolicyType t) : type_(t) {}

    PolicyType type_;
    int constant_lambda_ = 1;
    TabularPolicy table_;
};

} // namespace dac
