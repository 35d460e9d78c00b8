#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dac/config.hpp"
#include "dac/ddqn.hpp"
#include "dac/metrics.hpp"
#include "dac/policy.hpp"
#include "dac/ppo.hpp"
#include "dac/version.hpp"

namespace dac {

namespace detail {

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace detail

/// Resolves a policy description: a baseline name (cont, disc, random),
/// const:<lambda>, or a path to a tabular-policy CSV.
inline Policy resolve_policy(const std::string& description) {
    if (description == "cont" || description == "pi_cont") return Policy::continuous_theory();
    if (description == "disc" || description == "pi_disc") return Policy::discrete_theory();
    if (description == "random") return Policy::random();
    if (description.rfind("const:", 0) == 0)
        return Policy::constant(std::stoi(description.substr(6)));
    return Policy::tabular(load_tabular_policy(description));
}

inline std::vector<std::uint64_t> make_seed_list(std::uint64_t master, std::uint64_t repetition,
                                                 const std::string& tag, int count) {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        seeds.push_back(derive_seed(derive_seed(master, repetition, tag),
                                    static_cast<std::uint64_t>(i), tag));
    return seeds;
}

/// Run metadata: written with status "running" before training begins and
/// finalized at completion.
struct RunManifest {
    nlohmann::json j;

    static RunManifest begin(const ExperimentConfig& cfg, int repetition,
                             std::uint64_t training_seed,
                             const std::filesystem::path& run_dir) {
        RunManifest m;
        m.j["status"] = "running";
        m.j["code_version"] = kVersion;
        m.j["repetition"] = repetition;
        m.j["training_seed"] = training_seed;
        m.j["config_echo"] = cfg.echo();
        m.j["started_at"] = detail::iso_timestamp();
        m.write(run_dir);
        return m;
    }

    void finalize(const std::filesystem::path& run_dir, const std::string& status,
                  const std::vector<std::string>& artifacts,
                  std::optional<double> resolved_bias, const RewardStats& warmup_stats) {
        j["status"] = status;
        j["finished_at"] = detail::iso_timestamp();
        j["artifacts"] = artifacts;
        if (resolved_bias) j["resolved_bias"] = *resolved_bias;
        if (warmup_stats.count > 0) {
            j["warmup_stats"] = {{"mean", warmup_stats.mean},
                                 {"q1", warmup_stats.q1},
                                 {"q3", warmup_stats.q3},
                                 {"count", warmup_stats.count}};
        }
        write(run_dir);
    }

    void write(const std::filesystem::path& run_dir) const {
        detail::write_text_file(run_dir / "manifest.json", j.dump(2) + "\n");
    }
};

struct RepetitionOutcome {
    int repetition = 0;
    bool aborted = false;
    std::string abort_reason;
    TrainingLog log;
    std::optional<BestPolicy> best;
};

/// Executes the experiment described by the config: `repetitions` independent
/// trainings (or one evaluation) with derived seeds, writing manifests,
/// learning curves, per-checkpoint policies and summaries under the output
/// directory. Returns a process exit status.
inline int run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::path out_root = cfg.output_dir.empty() ? fs::path("runs") : fs::path(cfg.output_dir);
    if (const char* env_root = std::getenv("ONEMAX_DAC_OUT"); env_root && cfg.output_dir.empty())
        out_root = fs::path(env_root);
    fs::create_directories(out_root);

    const EnvConfig env = cfg.env();
    const auto final_seeds = make_seed_list(cfg.master_seed, 0, "final-eval", cfg.final_eval_seeds);
    const int workers =
        cfg.algorithm == AlgorithmKind::Ppo ? cfg.ppo.eval_workers : cfg.ddqn.eval_workers;

    if (cfg.algorithm == AlgorithmKind::EvalOnly) {
        const Policy policy = resolve_policy(cfg.policy);
        const EvalResult res = evaluate(policy, env, final_seeds, workers);
        const EvalResult cont = evaluate(Policy::continuous_theory(), env, final_seeds, workers);
        const EvalResult disc = evaluate(Policy::discrete_theory(), env, final_seeds, workers);
        nlohmann::json summary;
        summary["config_echo"] = cfg.echo();
        summary["code_version"] = kVersion;
        summary["n"] = env.n;
        summary["seeds"] = final_seeds.size();
        auto emit = [&](const std::string& name, const EvalResult& r) {
            summary["results"][name] = {{"ert_over_n", r.mean_ert_over_n},
                                        {"std_over_n", r.std_over_n},
                                        {"successes", r.successes()}};
        };
        emit(cfg.policy, res);
        emit("pi_cont", cont);
        emit("pi_disc", disc);
        summary["gap_to_pi_disc"] = gap(res, disc);
        detail::write_text_file(out_root / "summary.json", summary.dump(2) + "\n");
        std::printf("%-24s ERT/n %.3f (%.2f)  successes %zu/%zu\n", cfg.policy.c_str(),
                    res.mean_ert_over_n, res.std_over_n, res.successes(), res.runtimes.size());
        return 0;
    }

    const EvalResult baseline_disc =
        evaluate(Policy::discrete_theory(), env, final_seeds, workers);
    const EvalResult baseline_cont =
        evaluate(Policy::continuous_theory(), env, final_seeds, workers);

    std::vector<RepetitionOutcome> outcomes;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        const fs::path run_dir = out_root / ("rep_" + std::to_string(rep));
        fs::create_directories(run_dir / "policies");
        const std::uint64_t training_seed =
            derive_seed(cfg.master_seed, static_cast<std::uint64_t>(rep), "training");
        RunManifest manifest = RunManifest::begin(cfg, rep, training_seed, run_dir);

        std::ofstream curve(run_dir / "curve.csv");
        curve << "step,quick_ert_over_n,pairwise_diff,mean_loss\n";
        std::vector<std::string> artifacts{"manifest.json", "curve.csv", "summary.json"};
        const CheckpointSink sink = [&](const CheckpointRecord& rec) {
            curve << rec.step << ',' << detail::format_double(rec.quick_ert_over_n) << ','
                  << rec.pairwise_diff << ',' << detail::format_double(rec.mean_loss) << '\n';
            curve.flush();
            char name[64];
            std::snprintf(name, sizeof(name), "policies/checkpoint_%08lld.csv",
                          static_cast<long long>(rec.step));
            save_tabular_policy(rec.policy, (run_dir / name).string());
            artifacts.emplace_back(name);
        };

        RepetitionOutcome outcome;
        outcome.repetition = rep;
        try {
            if (cfg.algorithm == AlgorithmKind::Ddqn) {
                DdqnConfig dc = cfg.ddqn;
                dc.seed = training_seed;
                DdqnTrainer trainer(dc);
                outcome.log = trainer.run_training(sink);
            } else {
                PpoConfig pc = cfg.ppo;
                pc.seed = training_seed;
                PpoTrainer trainer(pc);
                outcome.log = trainer.run_training(sink);
            }
        } catch (const TrainingDiverged& e) {
            outcome.aborted = true;
            outcome.abort_reason = e.what();
        }
        curve.close();

        nlohmann::json summary;
        summary["repetition"] = rep;
        summary["aborted"] = outcome.aborted;
        if (outcome.aborted) summary["abort_reason"] = outcome.abort_reason;
        summary["initial_quick_ert_over_n"] = outcome.log.initial_quick_ert_over_n;
        if (!outcome.aborted && !outcome.log.checkpoints.empty()) {
            std::vector<PolicyCandidate> candidates;
            LearningCurve learning_curve;
            for (const auto& c : outcome.log.checkpoints) {
                candidates.push_back({c.step, c.policy, c.quick_ert_over_n});
                learning_curve.points.push_back({c.step, c.quick_ert_over_n});
            }
            outcome.best = best_policy_selection(candidates, env, final_seeds, workers);
            save_tabular_policy(outcome.best->policy, (run_dir / "best_policy.csv").string());
            artifacts.emplace_back("best_policy.csv");

            summary["best"] = {{"step", outcome.best->step},
                               {"ert_over_n", outcome.best->result.mean_ert_over_n},
                               {"std_over_n", outcome.best->result.std_over_n},
                               {"successes", outcome.best->result.successes()},
                               {"gap_to_pi_disc", gap(outcome.best->result, baseline_disc)},
                               {"gap_to_pi_cont", gap(outcome.best->result, baseline_cont)}};
            summary["auc_vs_pi_disc"] = auc(learning_curve, baseline_disc.mean_ert_over_n);
            summary["hitting_rate"] = {
                {"full", hitting_rate(learning_curve, baseline_disc, 0.0)},
                {"last_half", hitting_rate(learning_curve, baseline_disc, 0.5)},
                {"last_quarter", hitting_rate(learning_curve, baseline_disc, 0.75)}};
        }
        if (outcome.log.resolved_bias) summary["resolved_bias"] = *outcome.log.resolved_bias;
        detail::write_text_file(run_dir / "summary.json", summary.dump(2) + "\n");
        manifest.finalize(run_dir, outcome.aborted ? "aborted" : "completed", artifacts,
                          outcome.log.resolved_bias, outcome.log.warmup_stats);
        outcomes.push_back(std::move(outcome));
    }

    // Experiment-level summary with the baseline comparison on shared seeds.
    nlohmann::json summary;
    summary["config_echo"] = cfg.echo();
    summary["code_version"] = kVersion;
    summary["baselines"] = {
        {"pi_cont",
         {{"ert_over_n", baseline_cont.mean_ert_over_n}, {"std_over_n", baseline_cont.std_over_n}}},
        {"pi_disc",
         {{"ert_over_n", baseline_disc.mean_ert_over_n}, {"std_over_n", baseline_disc.std_over_n}}}};
    bool any_aborted = false;
    for (const auto& o : outcomes) {
        nlohmann::json rep;
        rep["repetition"] = o.repetition;
        rep["aborted"] = o.aborted;
        if (o.best) {
            rep["best_ert_over_n"] = o.best->result.mean_ert_over_n;
            rep["best_step"] = o.best->step;
            rep["gap_to_pi_disc"] = gap(o.best->result, baseline_disc);
        }
        summary["repetitions"].push_back(rep);
        any_aborted = any_aborted || o.aborted;
        if (o.best)
            std::printf("rep %d: best ERT/n %.3f (step %lld, gap to pi_disc %+.2f%%)\n",
                        o.repetition, o.best->result.mean_ert_over_n, o.best->step,
                        100.0 * gap(o.best->result, baseline_disc));
        else
            std::printf("rep %d: aborted (%s)\n", o.repetition, o.abort_reason.c_str());
    }
    std::printf("baselines: pi_cont %.3f (%.2f), pi_disc %.3f (%.2f)\n",
                baseline_cont.mean_ert_over_n, baseline_cont.std_over_n,
                baseline_disc.mean_ert_over_n, baseline_disc.std_over_n);
    detail::write_text_file(out_root / "experiment_summary.json", summary.dump(2) + "\n");
    return any_aborted ? 1 : 0;
}

} // namespace dac
