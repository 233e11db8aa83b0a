#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mtb/errors.hpp"

namespace mtb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Per-end trim fraction for the trimmed mean. Valid values lie in [0, 1/2);
/// trimming drops floor(N * omega) samples from each end.
class TrimFraction {
public:
    TrimFraction() : omega_(0.0) {}
    explicit TrimFraction(double omega) : omega_(omega) {
        if (!(omega >= 0.0 && omega < 0.5)) {
            throw InvalidTrim("trim fraction must lie in [0, 1/2), got " + std::to_string(omega));
        }
    }

    double value() const { return omega_; }

    /// Number of samples dropped from each end of a sorted length-n sample.
    /// The 1e-9 nudge absorbs representation error in n * omega (e.g. 5 * 0.2).
    int count(int n) const {
        return static_cast<int>(std::floor(static_cast<double>(n) * omega_ + 1e-9));
    }

    /// Largest fraction that still leaves at least one sample out of n,
    /// i.e. the fraction realizing floor((n-1)/2) dropped per end.
    static TrimFraction max_feasible(int n) {
        if (n <= 2) return TrimFraction(0.0);
        return TrimFraction(static_cast<double>((n - 1) / 2) / static_cast<double>(n));
    }

    /// Clamp an unconstrained fraction (possibly >= 1/2, as produced by the
    /// bandit hyperparameter paths) to the most aggressive feasible trim.
    static TrimFraction clamped(double omega, int n) {
        if (omega < 0.0) omega = 0.0;
        TrimFraction cap = max_feasible(n);
        return omega < cap.value() ? TrimFraction(omega) : cap;
    }

private:
    double omega_;
};

/// Mean of the samples remaining after dropping the floor(N * omega) smallest
/// and largest values. Permutation invariant; robust to that many corruptions.
inline double trimmed_mean(const std::vector<double>& samples, TrimFraction omega) {
    const int n = static_cast<int>(samples.size());
    if (n == 0) throw InvalidInput("trimmed_mean: empty sample");
    for (double v : samples) {
        if (!std::isfinite(v)) throw InvalidInput("trimmed_mean: non-finite sample");
    }
    const int k = omega.count(n);
    if (n - 2 * k < 1) {
        throw InvalidTrim("trimmed_mean: trimming " + std::to_string(k) +
                          " per end leaves no sample out of " + std::to_string(n));
    }
    std::vector<double> sorted(samples);
    std::stable_sort(sorted.begin(), sorted.end());
    double acc = 0.0;
    for (int i = k; i < n - k; ++i) acc += sorted[i];
    return acc / static_cast<double>(n - 2 * k);
}

inline void check_design(const Matrix& X, const Vector& Y, const char* where) {
    if (X.rows() != Y.size()) {
        throw InvalidInput(std::string(where) + ": design has " + std::to_string(X.rows()) +
                           " rows but response has " + std::to_string(Y.size()));
    }
    if (X.cols() < 1) throw InvalidInput(std::string(where) + ": design needs at least one column");
    if (!X.allFinite() || !Y.allFinite()) {
        throw InvalidInput(std::string(where) + ": non-finite entries");
    }
}

/// Least-squares fit via the normal equations. Strict: fails with
/// SingularDesign when n < d or the sample covariance has an eigenvalue
/// below `singular_tol` (callers decide the fallback).
inline Vector ols_fit(const Matrix& X, const Vector& Y, double singular_tol = 1e-10) {
    check_design(X, Y, "ols_fit");
    const auto n = X.rows();
    const auto d = X.cols();
    if (n < d) {
        throw SingularDesign("ols_fit: " + std::to_string(n) + " samples for " +
                             std::to_string(d) + " coefficients");
    }
    Matrix gram = X.transpose() * X;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram / static_cast<double>(n));
    if (eig.eigenvalues().minCoeff() < singular_tol) {
        throw SingularDesign("ols_fit: sample covariance is numerically singular");
    }
    return gram.ldlt().solve(X.transpose() * Y);
}

/// Minimum-norm least-squares solution, defined for any n >= 1 (including
/// n < d). Coincides with ols_fit on well-conditioned designs. Used by the
/// bandit engine, whose early batches routinely hold fewer samples than
/// dimensions.
inline Vector least_squares_minnorm(const Matrix& X, const Vector& Y) {
    check_design(X, Y, "least_squares_minnorm");
    if (X.rows() == 0) throw InvalidInput("least_squares_minnorm: no samples");
    Matrix gram = X.transpose() * X;
    Vector xty = X.transpose() * Y;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector& ev = eig.eigenvalues();
    double cutoff = std::max(ev.maxCoeff() * 1e-12, 1e-300);
    Vector inv = ev.unaryExpr([cutoff](double v) { return v > cutoff ? 1.0 / v : 0.0; });
    // pinv(X) * Y == pinv(X'X) * X'Y
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * xty;
}

struct LassoOptions {
    double coord_tol = 1e-8;   // stop when the largest coordinate update is below this
    double kkt_tol = 1e-7;     // or when the stationarity residual is below this
    int max_sweeps = 10000;
};

struct LassoInfo {
    int sweeps = 0;
    double kkt_residual = 0.0;
    bool converged = false;
};

namespace detail {

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Cyclic coordinate descent for
//   min_gamma (1/n) ||X gamma - r||^2 + lambda ||gamma||_1
// working entirely on the Gram matrix. gamma starts at zero.
inline Vector lasso_cd_gram(const Matrix& gram, const Vector& xtr, Eigen::Index n,
                            double lambda, const LassoOptions& opt, LassoInfo* info) {
    const auto d = gram.rows();
    Vector gamma = Vector::Zero(d);
    Vector grad_part = Vector::Zero(d);  // gram * gamma, maintained incrementally
    const double thresh = 0.5 * lambda * static_cast<double>(n);

    auto kkt_residual = [&]() {
        // stationarity of (1/n)(2 gram gamma - 2 xtr) + lambda * subgrad(|.|)
        double worst = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            double g = 2.0 * (grad_part(i) - xtr(i)) / static_cast<double>(n);
            double r;
            if (gamma(i) > 0.0) {
                r = std::abs(g + lambda);
            } else if (gamma(i) < 0.0) {
                r = std::abs(g - lambda);
            } else {
                r = std::max(0.0, std::abs(g) - lambda);
            }
            worst = std::max(worst, r);
        }
        return worst;
    };

    int sweep = 0;
    bool converged = false;
    for (; sweep < opt.max_sweeps && !converged; ++sweep) {
        double max_update = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double gii = gram(i, i);
            if (gii <= 0.0) continue;  // empty column, coefficient pinned to the center
            const double old = gamma(i);
            const double rho = xtr(i) - (grad_part(i) - gii * old);
            const double next = soft_threshold(rho, thresh) / gii;
            if (next != old) {
                grad_part += gram.col(i) * (next - old);
                gamma(i) = next;
                max_update = std::max(max_update, std::abs(next - old));
            }
        }
        converged = max_update < opt.coord_tol || kkt_residual() < opt.kkt_tol;
    }
    const double final_res = kkt_residual();
    if (info) {
        info->sweeps = sweep;
        info->kkt_residual = final_res;
        info->converged = converged;
    }
    if (!converged) {
        throw ConvergenceFailure("lasso_fit: no convergence after " +
                                     std::to_string(opt.max_sweeps) + " sweeps",
                                 final_res);
    }
    return gamma;
}

}  // namespace detail

/// Solves min_beta (1/n) ||X beta - Y||^2 + lambda ||beta - center||_1 by
/// cyclic coordinate descent on the shifted variable gamma = beta - center.
/// With lambda = 0 and a full-rank design this coincides with ols_fit.
inline Vector lasso_fit(const Matrix& X, const Vector& Y, double lambda, const Vector& center,
                        const LassoOptions& opt = {}, LassoInfo* info = nullptr) {
    check_design(X, Y, "lasso_fit");
    if (X.rows() == 0) throw InvalidInput("lasso_fit: no samples");
    if (center.size() != X.cols()) throw InvalidInput("lasso_fit: center has wrong length");
    if (!center.allFinite() || !std::isfinite(lambda)) throw InvalidInput("lasso_fit: non-finite input");
    if (lambda < 0.0) throw InvalidInput("lasso_fit: negative penalty");

    Matrix gram = X.transpose() * X;
    Vector residual = Y - X * center;
    Vector xtr = X.transpose() * residual;
    Vector gamma = detail::lasso_cd_gram(gram, xtr, X.rows(), lambda, opt, info);
    return center + gamma;
}

/// Objective value of the center-penalized LASSO problem at beta.
inline double lasso_objective(const Matrix& X, const Vector& Y, double lambda,
                              const Vector& center, const Vector& beta) {
    return (X * beta - Y).squaredNorm() / static_cast<double>(X.rows()) +
           lambda * (beta - center).lpNorm<1>();
}

}  // namespace mtb
