#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mtb/linreg.hpp"
#include "mtb/rng.hpp"

namespace mtb {

/// Synthetic many-instance bandit world: arm count, dimension, traffic split,
/// per-instance noise, context clipping and the sparsity of the instance biases.
struct EnvSpec {
    int n_instances = 1;
    int n_arms = 2;
    int dim = 2;
    int sparsity = 0;                    // nonzeros per instance bias vector
    std::vector<double> arrival_probs;   // simplex over instances
    std::vector<double> sigma;           // per-instance noise std
    double x_max = 1.0;                  // per-coordinate context clip bound
    std::pair<double, double> bias_range{-0.5, 0.5};

    static EnvSpec uniform(int n_instances, int n_arms, int dim, int sparsity, double sigma_all) {
        EnvSpec s;
        s.n_instances = n_instances;
        s.n_arms = n_arms;
        s.dim = dim;
        s.sparsity = sparsity;
        s.arrival_probs.assign(n_instances, 1.0 / n_instances);
        s.sigma.assign(n_instances, sigma_all);
        return s;
    }

    /// Traffic split where `poor_instance` receives `ratio` times the traffic
    /// of each remaining (equally likely) instance.
    void set_data_poor(int poor_instance, double ratio) {
        const double rest = 1.0 / (ratio + static_cast<double>(n_instances - 1));
        arrival_probs.assign(n_instances, rest);
        arrival_probs[poor_instance] = ratio * rest;
    }

    void validate() const {
        if (n_instances < 1 || n_arms < 1 || dim < 1) throw InvalidConfig("env: counts must be positive");
        if (sparsity < 0 || sparsity > dim) throw InvalidConfig("env: sparsity must lie in [0, dim]");
        if (static_cast<int>(arrival_probs.size()) != n_instances) {
            throw InvalidConfig("env: arrival_probs length mismatch");
        }
        double total = 0.0;
        for (double p : arrival_probs) {
            if (!(p > 0.0)) throw InvalidConfig("env: arrival probabilities must be positive");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw InvalidConfig("env: arrival probabilities must sum to 1");
        if (static_cast<int>(sigma.size()) != n_instances) throw InvalidConfig("env: sigma length mismatch");
        for (double s : sigma) {
            if (s < 0.0) throw InvalidConfig("env: negative noise level");
        }
        if (!(x_max > 0.0)) throw InvalidConfig("env: x_max must be positive");
        if (!(bias_range.first <= bias_range.second)) throw InvalidConfig("env: empty bias range");
    }
};

/// True arm parameters: a shared vector per arm plus a sparse per-instance bias.
struct GroundTruth {
    std::vector<Vector> shared;               // [arm]
    std::vector<std::vector<Vector>> deltas;  // [instance][arm]

    Vector arm_param(int instance, int arm) const { return shared[arm] + deltas[instance][arm]; }
    int n_arms() const { return static_cast<int>(shared.size()); }
    int n_instances() const { return static_cast<int>(deltas.size()); }
};

/// Draws each shared arm vector from a standard gaussian and normalizes it to
/// unit L1 norm; instance 0 keeps the shared parameters exactly, the others
/// receive a bias on `sparsity` uniformly chosen coordinates with entries
/// uniform on bias_range.
inline GroundTruth generate_ground_truth(const EnvSpec& spec, CounterRng& rng) {
    spec.validate();
    GroundTruth truth;
    truth.shared.resize(spec.n_arms);
    for (int k = 0; k < spec.n_arms; ++k) {
        Vector b(spec.dim);
        for (int i = 0; i < spec.dim; ++i) b(i) = rng.next_normal();
        double norm = b.lpNorm<1>();
        if (norm < 1e-12) b.setConstant(1.0 / spec.dim), norm = 1.0;
        truth.shared[k] = b / norm;
    }
    truth.deltas.assign(spec.n_instances, std::vector<Vector>(spec.n_arms, Vector::Zero(spec.dim)));
    const double lo = spec.bias_range.first;
    const double span = spec.bias_range.second - spec.bias_range.first;
    for (int j = 1; j < spec.n_instances; ++j) {
        for (int k = 0; k < spec.n_arms; ++k) {
            // support: sparsity draws without replacement (partial Fisher-Yates)
            std::vector<int> idx(spec.dim);
            for (int i = 0; i < spec.dim; ++i) idx[i] = i;
            for (int s = 0; s < spec.sparsity; ++s) {
                int pick = s + static_cast<int>(rng.next_uniform() * (spec.dim - s));
                if (pick >= spec.dim) pick = spec.dim - 1;
                std::swap(idx[s], idx[pick]);
                truth.deltas[j][k](idx[s]) = lo + span * rng.next_uniform();
            }
        }
    }
    return truth;
}

inline int sample_arrival(const std::vector<double>& probs, CounterRng& rng) {
    double u = rng.next_uniform();
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < probs.size(); ++j) {
        acc += probs[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(probs.size()) - 1;
}

/// Standard gaussian context with every coordinate clipped to [-x_max, x_max].
inline Vector sample_context(int dim, double x_max, CounterRng& rng) {
    Vector x(dim);
    for (int i = 0; i < dim; ++i) {
        x(i) = std::clamp(rng.next_normal(), -x_max, x_max);
    }
    return x;
}

inline double sample_reward(const Vector& x, const Vector& arm_param, double sigma,
                            CounterRng& rng) {
    return x.dot(arm_param) + sigma * rng.next_normal();
}

/// Best arm under the true parameters; ties go to the lowest index.
inline int oracle_arm(const GroundTruth& truth, int instance, const Vector& x) {
    int best = 0;
    double best_val = x.dot(truth.arm_param(instance, 0));
    for (int k = 1; k < truth.n_arms(); ++k) {
        double v = x.dot(truth.arm_param(instance, k));
        if (v > best_val) {
            best_val = v;
            best = k;
        }
    }
    return best;
}

/// Expected-reward gap between the oracle arm and the chosen one.
inline double score_step(const GroundTruth& truth, int instance, const Vector& x, int chosen) {
    double best = x.dot(truth.arm_param(instance, oracle_arm(truth, instance, x)));
    return best - x.dot(truth.arm_param(instance, chosen));
}

// ---------------------------------------------------------------------------
// Similarity network over instances

/// Pairwise dissimilarity s_{i,j} = max over arms of the support size of
/// beta^j_k - beta^i_k. The max across arms keeps any threshold guarantee
/// valid arm by arm.
inline Eigen::MatrixXi similarity_graph(const GroundTruth& truth, double zero_tol = 1e-12) {
    const int n = truth.n_instances();
    Eigen::MatrixXi weights = Eigen::MatrixXi::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            int worst = 0;
            for (int k = 0; k < truth.n_arms(); ++k) {
                Vector diff = truth.deltas[j][k] - truth.deltas[i][k];
                int nnz = 0;
                for (Eigen::Index c = 0; c < diff.size(); ++c) {
                    if (std::abs(diff(c)) > zero_tol) ++nnz;
                }
                worst = std::max(worst, nnz);
            }
            weights(i, j) = weights(j, i) = worst;
        }
    }
    return weights;
}

/// Instances whose dissimilarity to `target` is at most `s_tilde`; always
/// contains the target itself and grows with the threshold.
inline std::vector<int> select_instances(const Eigen::MatrixXi& graph, int target, int s_tilde) {
    std::vector<int> out;
    for (int i = 0; i < graph.rows(); ++i) {
        if (graph(target, i) <= s_tilde) out.push_back(i);
    }
    return out;
}

/// Subset size ceil(d^(1/(alpha+1))) balancing bias against variance under a
/// power-law relation between neighborhood size and dissimilarity.
inline int optimal_subset_size(int dim, double alpha, int n_instances) {
    if (dim < 1 || alpha < 0.0 || n_instances < 1) {
        throw InvalidConfig("optimal_subset_size: bad arguments");
    }
    // tolerant ceil so the alpha -> infinity limit lands on 1, not 2
    double raw = std::ceil(std::pow(static_cast<double>(dim), 1.0 / (alpha + 1.0)) - 1e-9);
    return std::clamp(static_cast<int>(raw), 1, n_instances);
}

}  // namespace mtb
