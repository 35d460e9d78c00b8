// Command-line front end: train / eval / baselines / diag / shift-oracle.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dac/harness.hpp"
#include "dac/value_iteration.hpp"

namespace fs = std::filesystem;

namespace {

// A --config argument names either a file or a shipped preset. Presets are
// looked up as <name>.cfg in $ONEMAX_DAC_CONFIG_DIR, ./configs, and the
// configs directory next to the installed binary's source tree.
std::string resolve_config_path(const std::string& arg) {
    std::vector<fs::path> candidates{arg, arg + ".cfg"};
    std::vector<fs::path> roots;
    if (const char* dir = std::getenv("ONEMAX_DAC_CONFIG_DIR")) roots.emplace_back(dir);
    roots.emplace_back("configs");
    std::error_code ec;
    const fs::path exe = fs::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        roots.push_back(exe.parent_path() / "configs");
        roots.push_back(exe.parent_path().parent_path().parent_path() / "configs");
    }
    for (const auto& root : roots) {
        candidates.push_back(root / arg);
        candidates.push_back(root / (arg + ".cfg"));
    }
    for (const auto& c : candidates) {
        if (fs::exists(c) && fs::is_regular_file(c)) return c.string();
    }
    throw CLI::ValidationError("--config", "cannot resolve config '" + arg + "'");
}

void write_csv(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << content;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parameter-control laboratory for the population-size-adaptive GA on OneMax"};
    app.require_subcommand(1);

    // ---- train ----
    auto* train = app.add_subcommand("train", "Run RL training from a config file or preset");
    std::string train_config;
    train->add_option("--config", train_config, "config file path or preset name")->required();
    std::string ov_n, ov_seed, ov_steps, ov_reward, ov_gamma, ov_reps, ov_out;
    train->add_option("--n", ov_n, "override problem size");
    train->add_option("--seed", ov_seed, "override master seed");
    train->add_option("--steps", ov_steps, "override total training steps");
    train->add_option("--reward", ov_reward,
                      "override reward variant (naive|scaled|shifted_fixed|shifted_adaptive|"
                      "scaled_shifted_adaptive)");
    train->add_option("--gamma", ov_gamma, "override discount factor");
    train->add_option("--reps", ov_reps, "override repetition count");
    train->add_option("--out", ov_out, "override output directory");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Evaluate a policy (baseline name, const:<lambda>, "
                                            "or tabular policy CSV)");
    std::string eval_policy;
    int eval_n = 100;
    int eval_seeds = 1000;
    std::uint64_t eval_master = 1;
    std::string eval_out;
    int eval_workers = 10;
    eval->add_option("--policy", eval_policy, "cont | disc | random | const:<lambda> | <file.csv>")
        ->required();
    eval->add_option("--n", eval_n, "problem size")->required();
    eval->add_option("--seeds", eval_seeds, "number of evaluation seeds");
    eval->add_option("--master-seed", eval_master, "master seed for the evaluation seed list");
    eval->add_option("--out", eval_out, "output directory (default runs/eval)");
    eval->add_option("--workers", eval_workers, "evaluation worker threads");

    // ---- baselines ----
    auto* baselines = app.add_subcommand("baselines", "Theory-baseline ERT comparison table");
    int base_n = 100;
    int base_seeds = 1000;
    std::uint64_t base_master = 1;
    int base_workers = 10;
    std::vector<std::string> base_extra;
    baselines->add_option("--n", base_n, "problem size")->required();
    baselines->add_option("--seeds", base_seeds, "number of evaluation seeds");
    baselines->add_option("--master-seed", base_master, "master seed for the seed list");
    baselines->add_option("--workers", base_workers, "evaluation worker threads");
    baselines->add_option("--policy", base_extra, "extra policy rows (repeatable)");

    // ---- diag ----
    auto* diag = app.add_subcommand("diag", "Episode and return-variance diagnostics");
    diag->require_subcommand(1);
    auto* episodes = diag->add_subcommand("episodes", "Episode-length and fitness-interval stats");
    std::string ep_policy = "disc";
    int ep_n = 100;
    int ep_count = 1000;
    std::uint64_t ep_seed = 1;
    std::string ep_out;
    episodes->add_option("--policy", ep_policy, "policy under test");
    episodes->add_option("--n", ep_n, "problem size")->required();
    episodes->add_option("--episodes", ep_count, "episode count");
    episodes->add_option("--master-seed", ep_seed, "seed base");
    episodes->add_option("--out", ep_out, "write per-episode lengths CSV here");

    auto* variance = diag->add_subcommand("variance", "Per-step return variance probe");
    std::string var_policy = "disc";
    int var_n = 100;
    int var_count = 2000;
    std::uint64_t var_seed = 1;
    std::vector<double> var_gammas{0.99, 1.0};
    std::string var_out;
    variance->add_option("--policy", var_policy, "policy under test");
    variance->add_option("--n", var_n, "problem size")->required();
    variance->add_option("--episodes", var_count, "trajectory count");
    variance->add_option("--master-seed", var_seed, "seed base");
    variance->add_option("--gamma", var_gammas, "discount factors (repeatable)");
    variance->add_option("--out", var_out, "write variance CSV here");

    // ---- shift-oracle ----
    auto* oracle = app.add_subcommand("shift-oracle",
                                      "Tabular reward-shifting identity check on the fixed MDP");
    double oracle_gamma = 0.9;
    std::vector<double> oracle_biases{-5.0, -1.0, 0.0, 3.0};
    oracle->add_option("--gamma", oracle_gamma, "discount factor in (0,1)");
    oracle->add_option("--bias", oracle_biases, "reward shifts to check (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            std::vector<std::pair<std::string, std::string>> overrides;
            if (!ov_n.empty()) overrides.emplace_back("n", ov_n);
            if (!ov_seed.empty()) overrides.emplace_back("master_seed", ov_seed);
            if (!ov_steps.empty()) overrides.emplace_back("total_steps", ov_steps);
            if (!ov_reward.empty()) overrides.emplace_back("reward_variant", ov_reward);
            if (!ov_gamma.empty()) overrides.emplace_back("gamma", ov_gamma);
            if (!ov_reps.empty()) overrides.emplace_back("repetitions", ov_reps);
            if (!ov_out.empty()) overrides.emplace_back("output_dir", ov_out);
            const auto cfg =
                dac::ExperimentConfig::load(resolve_config_path(train_config), overrides);
            return dac::run_experiment(cfg);
        }

        if (*eval) {
            dac::KeyValues kv;
            kv.set("algorithm", "eval_only");
            kv.set("policy", eval_policy);
            kv.set("n", std::to_string(eval_n));
            kv.set("final_eval_seeds", std::to_string(eval_seeds));
            kv.set("master_seed", std::to_string(eval_master));
            kv.set("eval_workers", std::to_string(eval_workers));
            kv.set("output_dir", eval_out.empty() ? "runs/eval" : eval_out);
            return dac::run_experiment(dac::ExperimentConfig::from_key_values(std::move(kv)));
        }

        if (*baselines) {
            dac::EnvConfig env;
            env.n = base_n;
            const auto seeds = dac::make_seed_list(base_master, 0, "final-eval", base_seeds);
            const auto cont =
                dac::evaluate(dac::Policy::continuous_theory(), env, seeds, base_workers);
            const auto disc =
                dac::evaluate(dac::Policy::discrete_theory(), env, seeds, base_workers);
            std::printf("n=%d, %d seeds\n", base_n, base_seeds);
            std::printf("%-24s %8s %8s %10s\n", "policy", "ERT/n", "std/n", "successes");
            auto row = [&](const std::string& name, const dac::EvalResult& r) {
                std::printf("%-24s %8.3f %8.2f %7zu/%zu\n", name.c_str(), r.mean_ert_over_n,
                            r.std_over_n, r.successes(), r.runtimes.size());
            };
            row("pi_cont", cont);
            row("pi_disc", disc);
            for (const auto& desc : base_extra)
                row(desc, dac::evaluate(dac::resolve_policy(desc), env, seeds, base_workers));
            const auto t = dac::paired_t_test(cont.runtimes, disc.runtimes);
            std::printf("paired t-test pi_cont vs pi_disc: t=%.4f, p=%.4f (%ssignificant at 99%%)\n",
                        t.t, t.p_two_sided, t.p_two_sided < 0.01 ? "" : "not ");
            return 0;
        }

        if (*episodes) {
            dac::EnvConfig env;
            env.n = ep_n;
            const auto d = dac::episode_diagnostics(dac::resolve_policy(ep_policy), env, ep_count,
                                                    ep_seed);
            std::printf("%s at n=%d over %d episodes\n", ep_policy.c_str(), ep_n, ep_count);
            std::printf("episode length: median %.1f, mean %.1f\n", d.median_length,
                        d.mean_length);
            for (const auto& iv : d.intervals)
                std::printf("fitness interval [%g, %g): %.1f%% of steps\n", iv.lo, iv.hi,
                            100.0 * iv.fraction);
            if (!ep_out.empty()) {
                std::string csv = "episode,length\n";
                for (std::size_t i = 0; i < d.lengths.size(); ++i)
                    csv += std::to_string(i) + "," + std::to_string(d.lengths[i]) + "\n";
                write_csv(ep_out, csv);
                std::printf("wrote %s\n", ep_out.c_str());
            }
            return 0;
        }

        if (*variance) {
            dac::EnvConfig env;
            env.n = var_n;
            const auto policy = dac::resolve_policy(var_policy);
            std::string csv = "gamma,length_group,trajectories,step,variance\n";
            for (const double gamma : var_gammas) {
                const auto probe =
                    dac::variance_probe(policy, env, gamma, var_count, var_seed);
                const auto& g = probe.largest_group();
                std::printf("gamma=%.4g: largest group length %lld (%d trajectories), "
                            "variance at step 0: %.4f\n",
                            gamma, g.length, g.trajectories, g.variances.front());
                for (const auto& group : probe.groups)
                    for (std::size_t t = 0; t < group.variances.size(); ++t)
                        csv += std::to_string(gamma) + "," + std::to_string(group.length) + "," +
                               std::to_string(group.trajectories) + "," + std::to_string(t) + "," +
                               std::to_string(group.variances[t]) + "\n";
            }
            if (!var_out.empty()) {
                write_csv(var_out, csv);
                std::printf("wrote %s\n", var_out.c_str());
            }
            return 0;
        }

        if (*oracle) {
            bool all_ok = true;
            for (const double b : oracle_biases) {
                const auto r = dac::tabular_shift_oracle(oracle_gamma, b);
                const bool ok = r.max_offset_error < 1e-8 && r.greedy_identical;
                all_ok = all_ok && ok;
                std::printf("gamma=%.4g b=%+.2f: offset %.4f, max error %.2e, greedy %s  [%s]\n",
                            oracle_gamma, b, r.expected_offset, r.max_offset_error,
                            r.greedy_identical ? "identical" : "DIFFERS", ok ? "ok" : "FAIL");
            }
            return all_ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
