#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "mtb/config.hpp"
#include "mtb/environment.hpp"
#include "mtb/multitask.hpp"
#include "mtb/rng.hpp"

namespace mtb {

/// Mean L1 estimation error per estimator and per sample size, with the raw
/// per-draw values kept for slope fits and confidence intervals.
struct StaticComparisonResult {
    std::vector<std::int64_t> sample_grid;
    // estimator -> [grid index][draw] mean-over-tasks L1 error
    std::map<std::string, std::vector<std::vector<double>>> errors;

    double mean_error(const std::string& estimator, std::size_t grid_index) const {
        const auto& draws = errors.at(estimator)[grid_index];
        double acc = 0.0;
        for (double v : draws) acc += v;
        return acc / static_cast<double>(draws.size());
    }

    /// Least-squares slope of log(mean error) against log(n).
    double loglog_slope(const std::string& estimator) const {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(sample_grid.size());
        for (std::size_t g = 0; g < sample_grid.size(); ++g) {
            double lx = std::log(static_cast<double>(sample_grid[g]));
            double ly = std::log(mean_error(estimator, g));
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        return (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
};

namespace detail {

struct StaticProblem {
    Vector shared;
    std::vector<Vector> betas;  // per task
};

inline StaticProblem make_static_problem(const StaticEstimatorsSpec& spec, CounterRng& rng) {
    StaticProblem prob;
    Vector g(spec.dim);
    for (int i = 0; i < spec.dim; ++i) g(i) = rng.next_normal();
    double norm = g.lpNorm<1>();
    if (norm < 1e-12) g.setConstant(1.0 / spec.dim), norm = 1.0;
    prob.shared = g / norm;
    prob.betas.assign(spec.n_tasks, prob.shared);
    for (int j = 0; j < spec.n_tasks; ++j) {
        if (spec.construction == "poorly_aligned") {
            // distinct supports: task j owns coordinates j*s ... j*s + s - 1 (mod d)
            for (int i = 0; i < spec.sparsity; ++i) {
                int coord = (j * spec.sparsity + i) % spec.dim;
                double sign = rng.next_uniform() < 0.5 ? -1.0 : 1.0;
                prob.betas[j](coord) += sign * spec.bias_magnitude;
            }
        } else {
            std::vector<int> idx(spec.dim);
            for (int i = 0; i < spec.dim; ++i) idx[i] = i;
            for (int s = 0; s < spec.sparsity; ++s) {
                int pick = s + static_cast<int>(rng.next_uniform() * (spec.dim - s));
                if (pick >= spec.dim) pick = spec.dim - 1;
                std::swap(idx[s], idx[pick]);
                prob.betas[j](idx[s]) += spec.bias_magnitude * (2.0 * rng.next_uniform() - 1.0);
            }
        }
    }
    return prob;
}

}  // namespace detail

inline const std::vector<std::string>& static_estimator_names() {
    static const std::vector<std::string> names{"robust_multitask", "independent", "averaging",
                                                "pooling", "averaging_multitask"};
    return names;
}

/// Draws fresh data for every (sample size, draw) pair and scores the five
/// static estimators on identical datasets.
inline StaticComparisonResult run_static_comparison(const StaticEstimatorsSpec& spec,
                                                    std::uint64_t base_seed, int n_threads = 0) {
    spec.validate();
    StaticComparisonResult result;
    result.sample_grid = spec.sample_grid;
    for (const auto& name : static_estimator_names()) {
        result.errors[name].assign(spec.sample_grid.size(),
                                   std::vector<double>(spec.draws, 0.0));
    }

    const double zeta = spec.zeta.value_or(std::sqrt(static_cast<double>(spec.sparsity) /
                                                     static_cast<double>(spec.dim)));
    const double eta = spec.eta.value_or(0.2);

    auto run_draw = [&](std::size_t g, int draw) {
        CounterRng rng(base_seed + static_cast<std::uint64_t>(draw) * 7919 + g * 104729,
                       rng_stream::kGroundTruth);
        auto prob = detail::make_static_problem(spec, rng);
        const auto n = spec.sample_grid[g];

        std::vector<TaskDataset> tasks(spec.n_tasks);
        for (int j = 0; j < spec.n_tasks; ++j) {
            Matrix X(n, spec.dim);
            Vector Y(n);
            for (std::int64_t r = 0; r < n; ++r) {
                for (int c = 0; c < spec.dim; ++c) {
                    X(r, c) = std::clamp(rng.next_normal(), -spec.x_max, spec.x_max);
                }
                Y(r) = X.row(r).dot(prob.betas[j]) + spec.sigma * rng.next_normal();
            }
            tasks[j] = TaskDataset{j, std::move(X), std::move(Y)};
        }

        const double lambda = default_lambda(spec.sigma, spec.x_max, spec.dim, n);
        EstimatorHyper hyper = EstimatorHyper::uniform(
            tasks, lambda, TrimFraction::clamped(zeta + eta, spec.n_tasks));

        auto score_map = [&](const std::map<int, Vector>& est) {
            double acc = 0.0;
            for (int j = 0; j < spec.n_tasks; ++j) {
                acc += (est.at(j) - prob.betas[j]).lpNorm<1>();
            }
            return acc / spec.n_tasks;
        };
        auto score_single = [&](const Vector& est) {
            double acc = 0.0;
            for (int j = 0; j < spec.n_tasks; ++j) acc += (est - prob.betas[j]).lpNorm<1>();
            return acc / spec.n_tasks;
        };

        result.errors["robust_multitask"][g][draw] =
            score_map(fit_robust_multitask(tasks, hyper).per_instance);
        result.errors["independent"][g][draw] = score_map(fit_independent(tasks));
        result.errors["averaging"][g][draw] = score_single(fit_averaging(tasks));
        result.errors["pooling"][g][draw] = score_single(fit_pooling(tasks));
        result.errors["averaging_multitask"][g][draw] =
            score_map(fit_averaging_multitask(tasks, hyper.lambdas).per_instance);
    };

    int workers = n_threads > 0 ? n_threads
                                : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::pair<std::size_t, int>> jobs;
    for (std::size_t g = 0; g < spec.sample_grid.size(); ++g) {
        for (int draw = 0; draw < spec.draws; ++draw) jobs.emplace_back(g, draw);
    }
    if (workers <= 1) {
        for (auto [g, draw] : jobs) run_draw(g, draw);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (std::size_t i = next++; i < jobs.size(); i = next++) {
                    run_draw(jobs[i].first, jobs[i].second);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return result;
}

}  // namespace mtb
