#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dac/ddqn.hpp"
#include "dac/ppo.hpp"
#include "dac/reward.hpp"

namespace dac {

/// Flat `key = value` configuration text: one pair per line, '#' comments,
/// blank lines ignored. Keys are typed against a fixed schema; unknown keys
/// are rejected.
class KeyValues {
public:
    static KeyValues parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str(), path);
    }

    static KeyValues parse_text(const std::string& text, const std::string& origin = "<text>") {
        KeyValues kv;
        kv.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": expected 'key = value'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty() || value.empty())
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": empty key or value");
            if (kv.values_.count(key))
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": duplicate key '" + key + "'");
            kv.values_[key] = value;
        }
        return kv;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end())
            throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
        return it->second;
    }

    long long get_int(const std::string& key, long long fallback) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_int(key, it->second);
    }

    double get_double(const std::string& key, double fallback) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::runtime_error(origin_ + ": key '" + key + "' expects true/false");
    }

    /// Unknown keys are schema violations; call after all getters ran.
    void reject_unconsumed() const {
        for (const auto& [key, value] : values_) {
            if (!consumed_.count(key))
                throw std::runtime_error(origin_ + ": unknown key '" + key + "'");
        }
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r\n");
        return s.substr(begin, end - begin + 1);
    }

    long long parse_int(const std::string& key, const std::string& value) const {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(value, &pos);
            if (pos != value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(origin_ + ": key '" + key + "' expects an integer, got '" +
                                     value + "'");
        }
    }

    double parse_double(const std::string& key, const std::string& value) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(origin_ + ": key '" + key + "' expects a number, got '" +
                                     value + "'");
        }
    }

    std::string origin_;
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

enum class AlgorithmKind { Ddqn, Ppo, EvalOnly };

inline std::string to_string(AlgorithmKind a) {
    switch (a) {
    case AlgorithmKind::Ddqn: return "ddqn";
    case AlgorithmKind::Ppo: return "ppo";
    case AlgorithmKind::EvalOnly: return "eval_only";
    }
    return "unknown";
}

/// A full experiment: algorithm, environment, agent settings, repetitions and
/// output location. `policy` names the evaluated policy for eval_only runs
/// (baseline name, const:<lambda>, or a tabular-policy CSV path).
struct ExperimentConfig {
    AlgorithmKind algorithm = AlgorithmKind::Ddqn;
    DdqnConfig ddqn;
    PpoConfig ppo;
    std::string policy; // eval_only only
    int repetitions = 1;
    std::uint64_t master_seed = 1;
    std::string output_dir;
    int final_eval_seeds = 1000;

    int n() const { return algorithm == AlgorithmKind::Ppo ? ppo.env.n : ddqn.env.n; }
    const EnvConfig& env() const { return algorithm == AlgorithmKind::Ppo ? ppo.env : ddqn.env; }

    /// Canonical echo: one key per line, sorted, sufficient to re-launch.
    std::string echo() const;

    static ExperimentConfig from_key_values(KeyValues kv);
    static ExperimentConfig load(const std::string& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {});
};

inline ExperimentConfig ExperimentConfig::from_key_values(KeyValues kv) {
    ExperimentConfig cfg;
    const std::string algo = kv.require_string("algorithm");
    if (algo == "ddqn") cfg.algorithm = AlgorithmKind::Ddqn;
    else if (algo == "ppo") cfg.algorithm = AlgorithmKind::Ppo;
    else if (algo == "eval_only") cfg.algorithm = AlgorithmKind::EvalOnly;
    else throw std::runtime_error("config: unknown algorithm '" + algo + "'");

    cfg.repetitions = static_cast<int>(kv.get_int("repetitions", 1));
    cfg.master_seed = static_cast<std::uint64_t>(kv.get_int("master_seed", 1));
    cfg.output_dir = kv.get_string("output_dir", "");
    cfg.final_eval_seeds = static_cast<int>(kv.get_int("final_eval_seeds", 1000));
    if (cfg.repetitions < 1) throw std::runtime_error("config: repetitions must be >= 1");

    EnvConfig env;
    env.n = static_cast<int>(kv.get_int("n", 100));
    env.cutoff_evals = kv.get_int("cutoff_evals", 0);

    RewardSpec reward;
    reward.variant = reward_variant_from_string(kv.get_string("reward_variant", "naive"));
    reward.fixed_bias = kv.get_double("reward_bias", 0.0);
    if (reward.variant == RewardVariant::ShiftedFixed && !kv.has("reward_bias"))
        throw std::runtime_error("config: shifted_fixed requires reward_bias");

    const int quick_eval = static_cast<int>(kv.get_int("quick_eval_seeds", 100));
    const int workers = static_cast<int>(kv.get_int("eval_workers", 10));

    switch (cfg.algorithm) {
    case AlgorithmKind::Ddqn: {
        DdqnConfig& d = cfg.ddqn;
        d.env = env;
        d.reward = reward;
        d.epsilon = kv.get_double("epsilon", d.epsilon);
        d.gamma = kv.get_double("gamma", d.gamma);
        d.tau = kv.get_double("tau", d.tau);
        d.learning_rate = kv.get_double("learning_rate", d.learning_rate);
        d.batch_size = static_cast<int>(kv.get_int("batch_size", d.batch_size));
        d.buffer_capacity =
            static_cast<std::size_t>(kv.get_int("buffer_capacity", static_cast<long long>(d.buffer_capacity)));
        d.warmup_transitions =
            static_cast<int>(kv.get_int("warmup_transitions", d.warmup_transitions));
        d.total_steps = kv.get_int("total_steps", d.total_steps);
        d.checkpoint_every = static_cast<int>(kv.get_int("checkpoint_every", d.checkpoint_every));
        d.bootstrap_on_truncation = kv.get_bool("bootstrap_on_truncation", true);
        d.quick_eval_seeds = quick_eval;
        d.eval_workers = workers;
        d.validate();
        break;
    }
    case AlgorithmKind::Ppo: {
        PpoConfig& p = cfg.ppo;
        p.env = env;
        p.reward = reward;
        p.learning_rate = kv.get_double("learning_rate", p.learning_rate);
        p.rollout_steps = static_cast<int>(kv.get_int("rollout_steps", p.rollout_steps));
        p.minibatch_size = static_cast<int>(kv.get_int("minibatch_size", p.minibatch_size));
        p.epochs = static_cast<int>(kv.get_int("epochs", p.epochs));
        p.gamma = kv.get_double("gamma", p.gamma);
        p.gae_lambda = kv.get_double("gae_lambda", p.gae_lambda);
        p.clip_range = kv.get_double("clip_range", p.clip_range);
        p.entropy_coef = kv.get_double("entropy_coef", p.entropy_coef);
        p.value_coef = kv.get_double("value_coef", p.value_coef);
        p.max_grad_norm = kv.get_double("max_grad_norm", p.max_grad_norm);
        p.total_steps = kv.get_int("total_steps", p.total_steps);
        p.checkpoint_every = static_cast<int>(kv.get_int("checkpoint_every", p.checkpoint_every));
        p.quick_eval_seeds = quick_eval;
        p.eval_workers = workers;
        p.validate();
        break;
    }
    case AlgorithmKind::EvalOnly: {
        cfg.ddqn.env = env; // env() reads from the ddqn slot for eval_only
        cfg.ddqn.reward = reward;
        cfg.ddqn.quick_eval_seeds = quick_eval;
        cfg.ddqn.eval_workers = workers;
        cfg.policy = kv.require_string("policy");
        break;
    }
    }

    kv.reject_unconsumed();
    return cfg;
}

inline ExperimentConfig ExperimentConfig::load(
    const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    KeyValues kv = KeyValues::parse_file(path);
    for (const auto& [key, value] : overrides) kv.set(key, value);
    return from_key_values(std::move(kv));
}

inline std::string ExperimentConfig::echo() const {
    std::ostringstream out;
    auto emit = [&](const std::string& key, const std::string& value) {
        out << key << " = " << value << "\n";
    };
    auto fmt = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    emit("algorithm", to_string(algorithm));
    emit("repetitions", std::to_string(repetitions));
    emit("master_seed", std::to_string(master_seed));
    if (!output_dir.empty()) emit("output_dir", output_dir);
    emit("final_eval_seeds", std::to_string(final_eval_seeds));
    emit("n", std::to_string(env().n));
    if (env().cutoff_evals > 0) emit("cutoff_evals", std::to_string(env().cutoff_evals));
    const RewardSpec& reward = algorithm == AlgorithmKind::Ppo ? ppo.reward : ddqn.reward;
    emit("reward_variant", to_string(reward.variant));
    if (reward.variant == RewardVariant::ShiftedFixed) emit("reward_bias", fmt(reward.fixed_bias));
    switch (algorithm) {
    case AlgorithmKind::Ddqn:
        emit("epsilon", fmt(ddqn.epsilon));
        emit("gamma", fmt(ddqn.gamma));
        emit("tau", fmt(ddqn.tau));
        emit("learning_rate", fmt(ddqn.learning_rate));
        emit("batch_size", std::to_string(ddqn.batch_size));
        emit("buffer_capacity", std::to_string(ddqn.buffer_capacity));
        emit("warmup_transitions", std::to_string(ddqn.warmup_transitions));
        emit("total_steps", std::to_string(ddqn.total_steps));
        emit("checkpoint_every", std::to_string(ddqn.checkpoint_every));
        emit("bootstrap_on_truncation", ddqn.bootstrap_on_truncation ? "true" : "false");
        emit("quick_eval_seeds", std::to_string(ddqn.quick_eval_seeds));
        emit("eval_workers", std::to_string(ddqn.eval_workers));
        break;
    case AlgorithmKind::Ppo:
        emit("learning_rate", fmt(ppo.learning_rate));
        emit("rollout_steps", std::to_string(ppo.rollout_steps));
        emit("minibatch_size", std::to_string(ppo.minibatch_size));
        emit("epochs", std::to_string(ppo.epochs));
        emit("gamma", fmt(ppo.gamma));
        emit("gae_lambda", fmt(ppo.gae_lambda));
        emit("clip_range", fmt(ppo.clip_range));
        emit("entropy_coef", fmt(ppo.entropy_coef));
        emit("value_coef", fmt(ppo.value_coef));
        emit("max_grad_norm", fmt(ppo.max_grad_norm));
        emit("total_steps", std::to_string(ppo.total_steps));
        emit("checkpoint_every", std::to_string(ppo.checkpoint_every));
        emit("quick_eval_seeds", std::to_string(ppo.quick_eval_seeds));
        emit("eval_workers", std::to_string(ppo.eval_workers));
        break;
    case AlgorithmKind::EvalOnly:
        emit("policy", policy);
        emit("quick_eval_seeds", std::to_string(ddqn.quick_eval_seeds));
        emit("eval_workers", std::to_string(ddqn.eval_workers));
        break;
    }
    return out.str();
}

} // namespace dac
