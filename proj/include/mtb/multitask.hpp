#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtb/linreg.hpp"

namespace mtb {

/// One task's regression data: the contexts observed at that instance and the
/// rewards they produced.
struct TaskDataset {
    int instance_id = 0;
    Matrix X;
    Vector Y;
};

struct MultitaskFitResult {
    std::map<int, Vector> per_instance;  // debiased estimate for each task
    Vector shared;                       // element-wise trimmed mean of the task fits
    // diagnostics
    std::map<int, Vector> task_ols;
    std::map<int, LassoInfo> lasso_info;
    double omega_used = 0.0;
    int trim_count = 0;  // dropped per end when forming `shared`
};

struct EstimatorHyper {
    std::map<int, double> lambdas;  // per-instance L1 penalty
    TrimFraction omega;
    std::set<int> exclude_from_trim;  // data-poor instances whose first-stage fit is too noisy
    LassoOptions lasso;

    /// Same penalty for every instance.
    static EstimatorHyper uniform(const std::vector<TaskDataset>& tasks, double lambda,
                                  TrimFraction omega, std::set<int> exclude = {}) {
        EstimatorHyper h;
        for (const auto& t : tasks) h.lambdas[t.instance_id] = lambda;
        h.omega = omega;
        h.exclude_from_trim = std::move(exclude);
        return h;
    }
};

/// Penalty scale sqrt(32 sigma^2 x_max^2 log(4d/delta) / n): the choice that
/// makes the debiasing stage concentrate at the usual sparse-regression rate.
inline double default_lambda(double sigma, double x_max, int dim, Eigen::Index n,
                             double delta = 0.05) {
    if (n < 1) throw InvalidInput("default_lambda: need at least one sample");
    return std::sqrt(32.0 * sigma * sigma * x_max * x_max *
                     std::log(4.0 * static_cast<double>(dim) / delta) / static_cast<double>(n));
}

using Step1Estimator = std::function<Vector(const TaskDataset&)>;

namespace detail {

inline void check_tasks(const std::vector<TaskDataset>& tasks) {
    if (tasks.empty()) throw InvalidInput("multitask fit: no tasks");
    std::set<int> seen;
    const auto d = tasks.front().X.cols();
    for (const auto& t : tasks) {
        if (!seen.insert(t.instance_id).second) {
            throw InvalidInput("multitask fit: duplicate instance id " +
                               std::to_string(t.instance_id));
        }
        if (t.X.cols() != d) throw InvalidInput("multitask fit: mixed dimensions");
        check_design(t.X, t.Y, "multitask fit");
    }
}

}  // namespace detail

/// Two-stage fit with a pluggable first stage: per-task estimates are combined
/// coordinate-wise by a trimmed mean into a shared center, and each task is
/// then refit with an L1 penalty toward that center. The public entry points
/// below fix the first stage; the bandit engine supplies a rank-tolerant one.
inline MultitaskFitResult fit_robust_multitask_with(const Step1Estimator& step1,
                                                    const std::vector<TaskDataset>& tasks,
                                                    const EstimatorHyper& hyper) {
    detail::check_tasks(tasks);
    const auto d = tasks.front().X.cols();

    MultitaskFitResult out;
    std::vector<const TaskDataset*> pooled;
    for (const auto& t : tasks) {
        out.task_ols[t.instance_id] = step1(t);
        if (!hyper.exclude_from_trim.count(t.instance_id)) pooled.push_back(&t);
    }
    if (pooled.empty()) throw InvalidInput("multitask fit: every task excluded from the trim");

    // Stage 1: coordinate-wise trimmed mean over the non-excluded task fits.
    // A single surviving task degenerates to using its fit as the center.
    out.shared = Vector::Zero(d);
    std::vector<double> column(pooled.size());
    out.omega_used = hyper.omega.value();
    out.trim_count = hyper.omega.count(static_cast<int>(pooled.size()));
    for (Eigen::Index i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < pooled.size(); ++j) {
            column[j] = out.task_ols.at(pooled[j]->instance_id)(i);
        }
        out.shared(i) = trimmed_mean(column, hyper.omega);
    }

    // Stage 2: per-task debiasing toward the shared center.
    for (const auto& t : tasks) {
        auto it = hyper.lambdas.find(t.instance_id);
        if (it == hyper.lambdas.end()) {
            throw InvalidInput("multitask fit: no penalty for instance " +
                               std::to_string(t.instance_id));
        }
        LassoInfo info;
        out.per_instance[t.instance_id] =
            lasso_fit(t.X, t.Y, it->second, out.shared, hyper.lasso, &info);
        out.lasso_info[t.instance_id] = info;
    }
    return out;
}

/// Robust multitask estimator with the strict least-squares first stage.
inline MultitaskFitResult fit_robust_multitask(const std::vector<TaskDataset>& tasks,
                                               const EstimatorHyper& hyper) {
    return fit_robust_multitask_with(
        [](const TaskDataset& t) {
            try {
                return ols_fit(t.X, t.Y);
            } catch (const SingularDesign& e) {
                throw SingularDesign(std::string(e.what()) + " (instance " +
                                         std::to_string(t.instance_id) + ")",
                                     t.instance_id);
            }
        },
        tasks, hyper);
}

/// Each task fit on its own data only.
inline std::map<int, Vector> fit_independent(const std::vector<TaskDataset>& tasks) {
    detail::check_tasks(tasks);
    std::map<int, Vector> out;
    for (const auto& t : tasks) {
        try {
            out[t.instance_id] = ols_fit(t.X, t.Y);
        } catch (const SingularDesign& e) {
            throw SingularDesign(std::string(e.what()) + " (instance " +
                                     std::to_string(t.instance_id) + ")",
                                 t.instance_id);
        }
    }
    return out;
}

/// Plain average of the per-task least-squares fits.
inline Vector fit_averaging(const std::vector<TaskDataset>& tasks) {
    auto independent = fit_independent(tasks);
    Vector acc = Vector::Zero(tasks.front().X.cols());
    for (const auto& [id, beta] : independent) acc += beta;
    return acc / static_cast<double>(independent.size());
}

/// Single least-squares fit on the concatenation of all task data.
inline Vector fit_pooling(const std::vector<TaskDataset>& tasks, double singular_tol = 1e-10) {
    detail::check_tasks(tasks);
    const auto d = tasks.front().X.cols();
    Matrix gram = Matrix::Zero(d, d);
    Vector xty = Vector::Zero(d);
    Eigen::Index n = 0;
    for (const auto& t : tasks) {
        gram += t.X.transpose() * t.X;
        xty += t.X.transpose() * t.Y;
        n += t.X.rows();
    }
    if (n < d) throw SingularDesign("fit_pooling: pooled normal matrix is singular");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram / static_cast<double>(n));
    if (eig.eigenvalues().minCoeff() < singular_tol) {
        throw SingularDesign("fit_pooling: pooled normal matrix is singular");
    }
    return gram.ldlt().solve(xty);
}

/// Ablation of the robust fit that centers on the untrimmed mean.
inline MultitaskFitResult fit_averaging_multitask(const std::vector<TaskDataset>& tasks,
                                                  const std::map<int, double>& lambdas,
                                                  const LassoOptions& lasso = {}) {
    EstimatorHyper hyper;
    hyper.lambdas = lambdas;
    hyper.omega = TrimFraction(0.0);
    hyper.lasso = lasso;
    return fit_robust_multitask(tasks, hyper);
}

struct AlignmentSplit {
    std::vector<int> poor;  // coordinates deviating in fewer than a zeta fraction of tasks
    std::vector<int> well;  // everything else
};

/// Classifies coordinates by how many tasks disagree with the shared value.
inline AlignmentSplit count_aligned(const std::vector<Vector>& betas, const Vector& shared,
                                    double zeta, double equality_tol = 1e-9) {
    if (zeta <= 0.0) throw InvalidInput("count_aligned: zeta must be positive");
    const auto d = shared.size();
    for (const auto& b : betas) {
        if (b.size() != d) throw InvalidInput("count_aligned: length mismatch");
    }
    AlignmentSplit split;
    const double n = static_cast<double>(betas.size());
    for (Eigen::Index i = 0; i < d; ++i) {
        int deviating = 0;
        for (const auto& b : betas) {
            if (std::abs(b(i) - shared(i)) > equality_tol) ++deviating;
        }
        if (static_cast<double>(deviating) / n < zeta) {
            split.poor.push_back(static_cast<int>(i));
        } else {
            split.well.push_back(static_cast<int>(i));
        }
    }
    return split;
}

}  // namespace mtb
