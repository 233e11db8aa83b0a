#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mtb/config.hpp"
#include "mtb/serialize.hpp"
#include "mtb/static_compare.hpp"
#include "mtb/trace_io.hpp"

namespace mtb {

inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

/// Fills unset hyperparameters with scale-aware defaults: trim parts from the
/// sparsity ratio, penalties from the noise scale at the expected forced-batch
/// sample counts.
inline BanditConfig build_bandit_config(const AlgorithmSpec& a, const EnvSpec& env,
                                        std::int64_t horizon) {
    BanditConfig cfg;
    cfg.horizon = horizon;
    cfg.q = a.q;
    cfg.h = a.h;
    const double zeta_default =
        std::sqrt(static_cast<double>(env.sparsity) / static_cast<double>(env.dim));
    cfg.zeta0 = a.zeta0.value_or(zeta_default);
    cfg.zeta10 = a.zeta10.value_or(zeta_default);
    cfg.eta0 = a.eta0.value_or(0.2);
    cfg.eta10 = a.eta10.value_or(0.2);
    const double b0 = std::ceil(a.q * std::log(static_cast<double>(horizon)));
    cfg.lambda0.resize(env.n_instances);
    cfg.lambda10.resize(env.n_instances);
    for (int j = 0; j < env.n_instances; ++j) {
        if (a.lambda0) {
            cfg.lambda0[j] = *a.lambda0;
        } else {
            auto expected = static_cast<std::int64_t>(
                std::max(1.0, b0 * env.arrival_probs[j] / env.n_arms));
            cfg.lambda0[j] = default_lambda(env.sigma[j], env.x_max, env.dim, expected);
        }
        // the per-batch path multiplies by sqrt(log(d n) / n); a noise-scale
        // base keeps the realized penalty near 2 sigma sqrt(log d / n)
        cfg.lambda10[j] = a.lambda10 ? *a.lambda10 : env.sigma[j] * env.x_max;
    }
    if (a.exclude_data_poor) {
        int poor = 0;
        for (int j = 1; j < env.n_instances; ++j) {
            if (env.arrival_probs[j] < env.arrival_probs[poor]) poor = j;
        }
        cfg.exclude_data_poor = poor;
    }
    return cfg;
}

inline PricingConfig build_pricing_config(const AlgorithmSpec& a, const PricingEnvSpec& env,
                                          std::int64_t horizon) {
    PricingConfig cfg;
    cfg.horizon = horizon;
    const double zeta_default = std::sqrt(static_cast<double>(env.sparsity) /
                                          static_cast<double>(env.stacked_dim()));
    cfg.zeta0 = a.zeta0.value_or(zeta_default);
    cfg.eta0 = a.eta0.value_or(0.2);
    cfg.lambda0.resize(env.n_instances);
    for (int j = 0; j < env.n_instances; ++j) {
        cfg.lambda0[j] = a.lambda0.value_or(0.01 * env.sigma[j]);
    }
    return cfg;
}

/// Per-instance threshold realizing at least `target` neighbors, then the
/// resulting learning pools.
inline std::vector<std::vector<int>> network_pools(const Eigen::MatrixXi& graph, int target,
                                                   std::optional<int> s_tilde) {
    const int n = static_cast<int>(graph.rows());
    std::vector<std::vector<int>> pools(n);
    for (int j = 0; j < n; ++j) {
        int threshold;
        if (s_tilde) {
            threshold = *s_tilde;
        } else {
            std::vector<int> row(n);
            for (int i = 0; i < n; ++i) row[i] = graph(j, i);
            std::sort(row.begin(), row.end());
            threshold = row[std::min(n, std::max(1, target)) - 1];
        }
        pools[j] = select_instances(graph, j, threshold);
    }
    return pools;
}

struct RunOutcome {
    RegretTrace trace;
    bool ok = false;
    std::string error;
    std::string path;
};

}  // namespace detail

/// Executes every (algorithm, seed) pair of a parsed experiment config,
/// writing one trace file per run, a ground-truth audit file per seed and a
/// summary over seeds. Returns 0 only when every run and write succeeded.
inline int run_experiment(const ExperimentConfig& cfg, const std::string& config_hash,
                          std::ostream& log = std::cerr) {
    auto issues = validate_config(cfg);
    if (!issues.empty()) {
        for (const auto& m : issues) log << "config error: " << m << "\n";
        return 2;
    }
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) {
        log << "cannot create output directory " << cfg.output_dir << ": " << ec.message() << "\n";
        return 2;
    }

    if (cfg.scenario == Scenario::static_estimators) {
        const std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
        auto result = run_static_comparison(cfg.static_spec, seed, cfg.workers);
        std::ofstream csv(cfg.output_dir + "/static_errors.csv");
        csv << "estimator,n,draw,l1_error\n";
        for (const auto& [name, grids] : result.errors) {
            for (std::size_t g = 0; g < grids.size(); ++g) {
                for (std::size_t dr = 0; dr < grids[g].size(); ++dr) {
                    csv << name << ',' << result.sample_grid[g] << ',' << dr << ','
                        << format_g17(grids[g][dr]) << '\n';
                }
            }
        }
        nlohmann::json summary;
        for (const auto& [name, grids] : result.errors) {
            nlohmann::json entry;
            entry["n"] = result.sample_grid;
            std::vector<double> means;
            for (std::size_t g = 0; g < grids.size(); ++g) means.push_back(result.mean_error(name, g));
            entry["mean_l1_error"] = means;
            entry["loglog_slope"] = result.loglog_slope(name);
            summary[name] = entry;
        }
        std::ofstream out(cfg.output_dir + "/summary.json");
        out << summary.dump(2) << '\n';
        return csv && out ? 0 : 1;
    }

    const int thin = cfg.thin > 0 ? cfg.thin : default_thin(cfg.horizon);
    const bool pricing = cfg.scenario == Scenario::pricing;

    struct Job {
        AlgorithmSpec algo;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& a : cfg.algorithms) {
        for (auto seed : cfg.seeds) jobs.push_back({a, seed});
    }
    std::vector<detail::RunOutcome> outcomes(jobs.size());

    auto run_job = [&](std::size_t idx) {
        const auto& job = jobs[idx];
        auto& out = outcomes[idx];
        try {
            if (pricing) {
                PricingEnvironment env(cfg.pricing_env, job.seed);
                PricingConfig pc = detail::build_pricing_config(job.algo, cfg.pricing_env, cfg.horizon);
                if (job.algo.name == "rmx") {
                    out.trace = run_rmx(env, pc, job.seed, config_hash);
                } else {
                    out.trace = run_pricing_baseline(
                        job.algo.name == "ols_pricing" ? BanditKind::ols : BanditKind::lasso, env,
                        pc, job.seed, config_hash);
                }
            } else {
                SyntheticEnvironment env(cfg.env, job.seed);
                BanditConfig bc = detail::build_bandit_config(job.algo, cfg.env, cfg.horizon);
                if (cfg.scenario == Scenario::network && job.algo.name == "rmbandit") {
                    int target = cfg.network_alpha
                                     ? optimal_subset_size(cfg.env.dim, *cfg.network_alpha,
                                                           cfg.env.n_instances)
                                     : 0;
                    bc.instance_subsets =
                        detail::network_pools(similarity_graph(env.truth()), target,
                                              cfg.network_s_tilde);
                }
                if (job.algo.name == "rmbandit") {
                    out.trace = run_rmbandit(env, bc, job.seed, config_hash);
                } else {
                    out.trace = run_baseline_bandit(
                        job.algo.name == "ols_bandit" ? BanditKind::ols : BanditKind::lasso, env,
                        bc, job.seed, config_hash);
                }
            }
            out.path = cfg.output_dir + "/" + out.trace.algorithm + "_seed" +
                       std::to_string(job.seed) + ".csv";
            write_trace(out.path, out.trace, thin);
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
        }
    };

    int workers = cfg.workers > 0 ? cfg.workers
                                  : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, static_cast<int>(jobs.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    // ground-truth audit files, one per seed
    if (!pricing) {
        for (auto seed : cfg.seeds) {
            SyntheticEnvironment env(cfg.env, seed);
            write_ground_truth(cfg.output_dir + "/ground_truth_seed" + std::to_string(seed) + ".json",
                               env.truth());
        }
    }

    bool all_ok = true;
    std::vector<RegretTrace> done;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].ok) {
            done.push_back(std::move(outcomes[i].trace));
        } else {
            all_ok = false;
            log << "run failed: " << jobs[i].algo.name << " seed " << jobs[i].seed << ": "
                << outcomes[i].error << "\n";
        }
    }
    if (!done.empty()) {
        auto stats = summarize_traces(done);
        nlohmann::json summary;
        for (const auto& [algo, s] : stats) {
            nlohmann::json entry;
            entry["n_seeds"] = s.n_seeds;
            entry["final_regret_mean"] = s.final_mean;
            entry["final_regret_ci95_half"] = s.final_ci_half;
            entry["mean_wallclock_s"] = s.mean_wallclock_s;
            std::vector<std::int64_t> ts;
            std::vector<double> means, cis;
            const int curve_thin = thin;
            for (const auto& p : s.curve) {
                if (p.t % curve_thin != 0 && p.t != s.curve.back().t) continue;
                ts.push_back(p.t);
                means.push_back(p.mean);
                cis.push_back(p.ci_half);
            }
            entry["curve"]["t"] = ts;
            entry["curve"]["mean_cum_regret"] = means;
            entry["curve"]["ci95_half"] = cis;
            summary[algo] = entry;
        }
        std::ofstream out(cfg.output_dir + "/summary.json");
        out << summary.dump(2) << '\n';
        if (!out) all_ok = false;
    }
    return all_ok ? 0 : 1;
}

/// Summary from trace files on disk (wall-clock is unknown in this path and
/// reported as zero).
inline int summarize_files(const std::vector<std::string>& paths, const std::string& out_path,
                           std::ostream& log = std::cerr) {
    if (paths.empty()) {
        log << "summarize: no trace files matched\n";
        return 2;
    }
    std::vector<RegretTrace> traces;
    for (const auto& p : paths) traces.push_back(read_trace(p));
    auto stats = summarize_traces(traces);
    nlohmann::json summary;
    for (const auto& [algo, s] : stats) {
        nlohmann::json entry;
        entry["n_seeds"] = s.n_seeds;
        entry["final_regret_mean"] = s.final_mean;
        entry["final_regret_ci95_half"] = s.final_ci_half;
        entry["mean_wallclock_s"] = s.mean_wallclock_s;
        std::vector<std::int64_t> ts;
        std::vector<double> means, cis;
        for (const auto& p : s.curve) {
            ts.push_back(p.t);
            means.push_back(p.mean);
            cis.push_back(p.ci_half);
        }
        entry["curve"]["t"] = ts;
        entry["curve"]["mean_cum_regret"] = means;
        entry["curve"]["ci95_half"] = cis;
        summary[algo] = entry;
    }
    std::ofstream out(out_path);
    out << summary.dump(2) << '\n';
    if (!out) {
        log << "summarize: cannot write " << out_path << "\n";
        return 1;
    }
    return 0;
}

}  // namespace mtb
