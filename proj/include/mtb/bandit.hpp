#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtb/environment.hpp"
#include "mtb/linreg.hpp"
#include "mtb/multitask.hpp"
#include "mtb/schedule.hpp"

namespace mtb {

// ---------------------------------------------------------------------------
// Environment interface the runners consume. One arrival, one context and one
// reward draw per step, in that order, so algorithms compared under the same
// seed face identical sample paths.

class Environment {
public:
    virtual ~Environment() = default;
    virtual int n_instances() const = 0;
    virtual int n_arms() const = 0;
    virtual int dim() const = 0;
    virtual int next_arrival(std::int64_t t) = 0;
    virtual Vector next_context(std::int64_t t, int instance) = 0;
    virtual double realized_reward(std::int64_t t, int instance, int arm, const Vector& x) = 0;
    virtual double expected_reward(int instance, int arm, const Vector& x) const = 0;

    double best_expected(int instance, const Vector& x) const {
        double best = expected_reward(instance, 0, x);
        for (int k = 1; k < n_arms(); ++k) best = std::max(best, expected_reward(instance, k, x));
        return best;
    }
};

/// The clipped-gaussian synthetic world. Arrival, context and noise draws live
/// on separate sub-streams of the seed; an optional perturbation set shifts
/// the noise at chosen steps without touching any stream alignment.
class SyntheticEnvironment : public Environment {
public:
    SyntheticEnvironment(const EnvSpec& spec, std::uint64_t seed)
        : spec_(spec),
          arrival_rng_(seed, rng_stream::kArrival),
          context_rng_(seed, rng_stream::kContext),
          noise_rng_(seed, rng_stream::kNoise) {
        spec_.validate();
        CounterRng truth_rng(seed, rng_stream::kGroundTruth);
        truth_ = generate_ground_truth(spec_, truth_rng);
    }

    SyntheticEnvironment(const EnvSpec& spec, GroundTruth truth, std::uint64_t seed)
        : spec_(spec),
          truth_(std::move(truth)),
          arrival_rng_(seed, rng_stream::kArrival),
          context_rng_(seed, rng_stream::kContext),
          noise_rng_(seed, rng_stream::kNoise) {
        spec_.validate();
    }

    int n_instances() const override { return spec_.n_instances; }
    int n_arms() const override { return spec_.n_arms; }
    int dim() const override { return spec_.dim; }

    int next_arrival(std::int64_t) override { return sample_arrival(spec_.arrival_probs, arrival_rng_); }

    Vector next_context(std::int64_t, int) override {
        return sample_context(spec_.dim, spec_.x_max, context_rng_);
    }

    double realized_reward(std::int64_t t, int instance, int arm, const Vector& x) override {
        double y = sample_reward(x, truth_.arm_param(instance, arm), spec_.sigma[instance], noise_rng_);
        if (perturb_steps_.count(t)) y += perturb_offset_;
        return y;
    }

    double expected_reward(int instance, int arm, const Vector& x) const override {
        return x.dot(truth_.arm_param(instance, arm));
    }

    void set_noise_perturbation(std::set<std::int64_t> steps, double offset) {
        perturb_steps_ = std::move(steps);
        perturb_offset_ = offset;
    }

    const GroundTruth& truth() const { return truth_; }
    const EnvSpec& spec() const { return spec_; }

private:
    EnvSpec spec_;
    GroundTruth truth_;
    CounterRng arrival_rng_;
    CounterRng context_rng_;
    CounterRng noise_rng_;
    std::set<std::int64_t> perturb_steps_;
    double perturb_offset_ = 0.0;
};

// ---------------------------------------------------------------------------
// Policy primitives

/// Round-robin forced pull: 1-indexed arm ((arrivals mod K) + 1), where
/// `arrival_count` counts arrivals at the instance including the current one.
inline int forced_arm(std::int64_t arrival_count, int n_arms) {
    return static_cast<int>(arrival_count % n_arms) + 1;
}

/// Arms whose screening-estimate reward sits within h/2 of the best one.
/// Never empty: always contains the screening argmax.
inline std::vector<int> filter_arms(const Vector& x, const std::vector<Vector>& forced_estimates,
                                    double h) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> vals(forced_estimates.size());
    for (std::size_t k = 0; k < forced_estimates.size(); ++k) {
        vals[k] = x.dot(forced_estimates[k]);
        best = std::max(best, vals[k]);
    }
    std::vector<int> kept;
    for (std::size_t k = 0; k < vals.size(); ++k) {
        if (vals[k] >= best - 0.5 * h) kept.push_back(static_cast<int>(k));
    }
    return kept;
}

/// Highest estimated reward within the surviving set; ties go to the lowest
/// arm index. Arms lacking a refined estimate fall back to their screening one.
inline int choose_arm(const Vector& x, const std::vector<int>& candidates,
                      const std::vector<const Vector*>& refined,
                      const std::vector<Vector>& fallback) {
    int best_arm = candidates.front();
    double best_val = -std::numeric_limits<double>::infinity();
    for (int k : candidates) {
        const Vector& est = refined[k] ? *refined[k] : fallback[k];
        double v = x.dot(est);
        if (v > best_val) {
            best_val = v;
            best_arm = k;
        }
    }
    return best_arm;
}

// ---------------------------------------------------------------------------
// Hyperparameter paths (natural logs): the refit penalty shrinks with the
// per-instance batch count while the trim widens with the smallest one.

inline double refit_lambda(double lambda10, int dim, std::int64_t batch_count) {
    const double n = static_cast<double>(batch_count);
    return lambda10 * std::sqrt(std::log(static_cast<double>(dim) * n) / n);
}

inline double refit_eta(double eta10, int dim, std::int64_t min_batch_count) {
    return eta10 *
           std::sqrt(std::log(static_cast<double>(dim) * static_cast<double>(min_batch_count)));
}

// ---------------------------------------------------------------------------
// Runner configuration and outputs

struct BanditConfig {
    std::int64_t horizon = 0;
    double q = 1.0;
    double h = 1.0;
    double zeta0 = 0.0, eta0 = 0.0;    // screening-stage trim parts
    double zeta10 = 0.0, eta10 = 0.0;  // refit-stage trim parts
    std::vector<double> lambda0;       // per instance; scalar broadcast via set_lambdas
    std::vector<double> lambda10;
    std::optional<int> exclude_data_poor;
    std::optional<std::vector<std::vector<int>>> instance_subsets;  // learning pool per instance
    LassoOptions lasso;

    void set_lambdas(int n_instances, double l0, double l10) {
        lambda0.assign(n_instances, l0);
        lambda10.assign(n_instances, l10);
    }

    void validate(int n_instances, int n_arms) const {
        if (horizon < 1) throw InvalidConfig("bandit config: horizon must be positive");
        if (n_arms < 1) throw InvalidConfig("bandit config: need at least one arm");
        if (!(q > 0.0) || !(h > 0.0)) throw InvalidConfig("bandit config: q and h must be positive");
        if (zeta0 < 0 || eta0 < 0 || zeta10 < 0 || eta10 < 0) {
            throw InvalidConfig("bandit config: trim parts must be nonnegative");
        }
        if (static_cast<int>(lambda0.size()) != n_instances ||
            static_cast<int>(lambda10.size()) != n_instances) {
            throw InvalidConfig("bandit config: per-instance penalties must have length N");
        }
        for (double l : lambda0) {
            if (l < 0 || !std::isfinite(l)) throw InvalidConfig("bandit config: bad lambda0");
        }
        for (double l : lambda10) {
            if (l < 0 || !std::isfinite(l)) throw InvalidConfig("bandit config: bad lambda10");
        }
        if (exclude_data_poor && (*exclude_data_poor < 0 || *exclude_data_poor >= n_instances)) {
            throw InvalidConfig("bandit config: exclude_data_poor out of range");
        }
        if (instance_subsets) {
            if (static_cast<int>(instance_subsets->size()) != n_instances) {
                throw InvalidConfig("bandit config: instance_subsets must cover every instance");
            }
            for (int j = 0; j < n_instances; ++j) {
                bool self = false;
                for (int i : (*instance_subsets)[j]) {
                    if (i < 0 || i >= n_instances) {
                        throw InvalidConfig("bandit config: instance subset index out of range");
                    }
                    self |= (i == j);
                }
                if (!self) throw InvalidConfig("bandit config: an instance must belong to its own subset");
            }
        }
    }
};

struct TraceStep {
    std::int64_t t;
    int instance;
    int arm;  // 0-indexed
    double regret;
    double cum_global;
    double cum_instance;
};

struct RegretTrace {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::string config_hash;
    double wallclock_s = 0.0;
    std::vector<TraceStep> steps;

    double final_regret() const { return steps.empty() ? 0.0 : steps.back().cum_global; }
};

/// Optional window into runner internals for invariant tests.
struct BanditDebug {
    std::vector<std::vector<Vector>> forced_after_b0;  // [instance][arm]
    std::vector<std::vector<Vector>> forced_at_end;
    std::vector<double> omega_refit;   // effective trim fraction used per batch
    std::vector<double> eta_refit;     // path value before clamping
    BatchSchedule schedule;
    // test hook: replaces the forced estimates right after they are fit
    std::function<void(std::vector<std::vector<Vector>>&)> override_forced;
};

enum class BanditKind { robust_multitask, ols, lasso };

/// Center used by the lasso baseline's per-instance fits.
enum class LassoCenterMode { zero, own_ols };

namespace detail {

// Row-major growing design buffer; cheap to append, converts on fit.
struct SampleBuffer {
    std::vector<double> xs;
    std::vector<double> ys;
    int n = 0;

    void add(const Vector& x, double y) {
        xs.insert(xs.end(), x.data(), x.data() + x.size());
        ys.push_back(y);
        ++n;
    }
    void clear() {
        xs.clear();
        ys.clear();
        n = 0;
    }
    Matrix design(int d) const {
        return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(xs.data(), n, d);
    }
    Vector response() const { return Eigen::Map<const Vector>(ys.data(), n); }
};

class BanditRunner {
public:
    BanditRunner(Environment& env, const BanditConfig& cfg, BanditKind kind,
                 LassoCenterMode lasso_center = LassoCenterMode::zero)
        : env_(env), cfg_(cfg), kind_(kind), lasso_center_(lasso_center) {
        cfg_.validate(env.n_instances(), env.n_arms());
        n_ = env.n_instances();
        k_ = env.n_arms();
        d_ = env.dim();
        schedule_ = build_schedule(cfg_.horizon, cfg_.q);
        pools_.resize(n_);
        for (int j = 0; j < n_; ++j) {
            if (cfg_.instance_subsets) {
                pools_[j] = (*cfg_.instance_subsets)[j];
            } else {
                pools_[j].resize(n_);
                for (int i = 0; i < n_; ++i) pools_[j][i] = i;
            }
        }
    }

    RegretTrace run(std::uint64_t seed, const std::string& algorithm,
                    const std::string& config_hash = "", BanditDebug* debug = nullptr) {
        auto t0 = std::chrono::steady_clock::now();
        RegretTrace trace;
        trace.algorithm = algorithm;
        trace.seed = seed;
        trace.config_hash = config_hash;
        trace.steps.reserve(static_cast<std::size_t>(cfg_.horizon));

        forced_est_.assign(n_, std::vector<Vector>(k_, Vector::Zero(d_)));
        refit_est_.assign(n_, std::vector<Vector>(k_));
        refit_valid_.assign(n_, std::vector<char>(k_, 0));
        forced_buf_.assign(n_, std::vector<SampleBuffer>(k_));
        batch_buf_.assign(n_, std::vector<SampleBuffer>(k_));
        batch_arrivals_.assign(n_, 0);
        arrivals_.assign(n_, 0);

        double cum_global = 0.0;
        std::vector<double> cum_instance(n_, 0.0);
        if (debug) debug->schedule = schedule_;

        for (std::int64_t t = 1; t <= cfg_.horizon; ++t) {
            const int j = env_.next_arrival(t);
            const Vector x = env_.next_context(t, j);
            ++arrivals_[j];

            int arm;
            if (t <= schedule_.b0_size) {
                arm = forced_arm(arrivals_[j], k_) - 1;
            } else {
                auto kept = filter_arms(x, forced_est_[j], cfg_.h);
                std::vector<const Vector*> refined(k_, nullptr);
                for (int k = 0; k < k_; ++k) {
                    if (refit_valid_[j][k]) refined[k] = &refit_est_[j][k];
                }
                arm = choose_arm(x, kept, refined, forced_est_[j]);
            }

            const double y = env_.realized_reward(t, j, arm, x);
            if (t <= schedule_.b0_size) {
                forced_buf_[j][arm].add(x, y);
            } else {
                batch_buf_[j][arm].add(x, y);
                ++batch_arrivals_[j];
            }

            const double regret = env_.best_expected(j, x) - env_.expected_reward(j, arm, x);
            cum_global += regret;
            cum_instance[j] += regret;
            trace.steps.push_back({t, j, arm, regret, cum_global, cum_instance[j]});

            if (t == schedule_.b0_size) {
                fit_forced();
                if (debug) {
                    if (debug->override_forced) debug->override_forced(forced_est_);
                    debug->forced_after_b0 = forced_est_;
                }
            } else if (t > schedule_.b0_size && schedule_.is_batch_end(t)) {
                fit_batch(debug);
                for (auto& per_arm : batch_buf_) {
                    for (auto& buf : per_arm) buf.clear();
                }
                batch_arrivals_.assign(n_, 0);
            }
        }

        if (debug) debug->forced_at_end = forced_est_;
        trace.wallclock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return trace;
    }

private:
    // Robust multitask fit of one arm across instances: rank-tolerant
    // least-squares per instance, trimmed-mean center per learning pool,
    // then the penalized refit. Writes into `out` only for instances with data.
    void fit_arm_multitask(const std::vector<std::vector<SampleBuffer>*>& buf_of_instance, int arm,
                           const std::vector<double>& lambda, double omega_path,
                           std::vector<std::vector<Vector>>& out,
                           std::vector<std::vector<char>>* valid) {
        std::vector<char> has_data(n_, 0);
        std::vector<Vector> stage1(n_);
        std::vector<Matrix> designs(n_);
        std::vector<Vector> responses(n_);
        for (int j = 0; j < n_; ++j) {
            const SampleBuffer& buf = (*buf_of_instance[j])[arm];
            if (buf.n == 0) continue;
            designs[j] = buf.design(d_);
            responses[j] = buf.response();
            stage1[j] = least_squares_minnorm(designs[j], responses[j]);
            has_data[j] = 1;
        }
        for (int j = 0; j < n_; ++j) {
            if (!has_data[j]) continue;  // no fresh data, keep the previous estimate
            std::vector<int> members;
            for (int i : pools_[j]) {
                if (has_data[i] && !(cfg_.exclude_data_poor && *cfg_.exclude_data_poor == i)) {
                    members.push_back(i);
                }
            }
            if (members.empty()) {
                // only excluded instances hold data for this arm; ignore the exclusion
                for (int i : pools_[j]) {
                    if (has_data[i]) members.push_back(i);
                }
            }
            const TrimFraction omega =
                TrimFraction::clamped(omega_path, static_cast<int>(members.size()));
            Vector center(d_);
            std::vector<double> column(members.size());
            for (int c = 0; c < d_; ++c) {
                for (std::size_t i = 0; i < members.size(); ++i) column[i] = stage1[members[i]](c);
                center(c) = trimmed_mean(column, omega);
            }
            out[j][arm] = lasso_fit(designs[j], responses[j], lambda[j], center, cfg_.lasso);
            if (valid) (*valid)[j][arm] = 1;
        }
    }

    // Independent per-instance fit for the baseline kinds.
    void fit_arm_single(const std::vector<std::vector<SampleBuffer>*>& buf_of_instance, int arm,
                        const std::vector<double>& lambda, std::vector<std::vector<Vector>>& out,
                        std::vector<std::vector<char>>* valid) {
        for (int j = 0; j < n_; ++j) {
            const SampleBuffer& buf = (*buf_of_instance[j])[arm];
            if (buf.n == 0) continue;
            Matrix X = buf.design(d_);
            Vector Y = buf.response();
            if (kind_ == BanditKind::ols) {
                out[j][arm] = least_squares_minnorm(X, Y);
            } else {
                Vector center = lasso_center_ == LassoCenterMode::own_ols
                                    ? least_squares_minnorm(X, Y)
                                    : Vector::Zero(d_);
                out[j][arm] = lasso_fit(X, Y, lambda[j], center, cfg_.lasso);
            }
            if (valid) (*valid)[j][arm] = 1;
        }
    }

    void fit_forced() {
        std::vector<std::vector<SampleBuffer>*> bufs(n_);
        for (int j = 0; j < n_; ++j) bufs[j] = &forced_buf_[j];
        const double omega0 = cfg_.zeta0 + cfg_.eta0;
        for (int arm = 0; arm < k_; ++arm) {
            if (kind_ == BanditKind::robust_multitask) {
                fit_arm_multitask(bufs, arm, cfg_.lambda0, omega0, forced_est_, nullptr);
            } else {
                fit_arm_single(bufs, arm, cfg_.lambda0, forced_est_, nullptr);
            }
        }
    }

    void fit_batch(BanditDebug* debug) {
        // per-instance arrival counts in this batch drive the penalty and trim paths
        std::int64_t min_count = 0;
        for (int j = 0; j < n_; ++j) {
            if (batch_arrivals_[j] > 0 && (min_count == 0 || batch_arrivals_[j] < min_count)) {
                min_count = batch_arrivals_[j];
            }
        }
        if (min_count == 0) return;  // no data anywhere in this batch
        const double eta1m = refit_eta(cfg_.eta10, d_, min_count);
        const double omega1m = cfg_.zeta10 + eta1m;
        std::vector<double> lambda(n_, 0.0);
        for (int j = 0; j < n_; ++j) {
            if (batch_arrivals_[j] > 0) {
                lambda[j] = refit_lambda(cfg_.lambda10[j], d_, batch_arrivals_[j]);
            }
        }
        if (debug) {
            debug->eta_refit.push_back(eta1m);
            debug->omega_refit.push_back(omega1m);
        }
        std::vector<std::vector<SampleBuffer>*> bufs(n_);
        for (int j = 0; j < n_; ++j) bufs[j] = &batch_buf_[j];
        for (int arm = 0; arm < k_; ++arm) {
            if (kind_ == BanditKind::robust_multitask) {
                fit_arm_multitask(bufs, arm, lambda, omega1m, refit_est_, &refit_valid_);
            } else {
                fit_arm_single(bufs, arm, lambda, refit_est_, &refit_valid_);
            }
        }
    }

    Environment& env_;
    BanditConfig cfg_;
    BanditKind kind_;
    LassoCenterMode lasso_center_;
    int n_ = 0, k_ = 0, d_ = 0;
    BatchSchedule schedule_;
    std::vector<std::vector<int>> pools_;
    std::vector<std::vector<Vector>> forced_est_;
    std::vector<std::vector<Vector>> refit_est_;
    std::vector<std::vector<char>> refit_valid_;
    std::vector<std::vector<SampleBuffer>> forced_buf_;
    std::vector<std::vector<SampleBuffer>> batch_buf_;
    std::vector<std::int64_t> batch_arrivals_;
    std::vector<std::int64_t> arrivals_;
};

}  // namespace detail

inline RegretTrace run_rmbandit(Environment& env, const BanditConfig& cfg, std::uint64_t seed,
                                const std::string& config_hash = "",
                                BanditDebug* debug = nullptr) {
    detail::BanditRunner runner(env, cfg, BanditKind::robust_multitask);
    return runner.run(seed, "rmbandit", config_hash, debug);
}

inline RegretTrace run_baseline_bandit(BanditKind kind, Environment& env, const BanditConfig& cfg,
                                       std::uint64_t seed, const std::string& config_hash = "",
                                       BanditDebug* debug = nullptr,
                                       LassoCenterMode lasso_center = LassoCenterMode::zero) {
    if (kind == BanditKind::robust_multitask) {
        throw InvalidConfig("run_baseline_bandit: use run_rmbandit for the multitask kind");
    }
    detail::BanditRunner runner(env, cfg, kind, lasso_center);
    return runner.run(seed, kind == BanditKind::ols ? "ols_bandit" : "lasso_bandit", config_hash,
                      debug);
}

/// Always pulls the true best arm; its trace is identically zero.
inline RegretTrace run_oracle(Environment& env, std::int64_t horizon, std::uint64_t seed) {
    RegretTrace trace;
    trace.algorithm = "oracle";
    trace.seed = seed;
    double cum = 0.0;
    std::vector<double> cum_inst(env.n_instances(), 0.0);
    for (std::int64_t t = 1; t <= horizon; ++t) {
        int j = env.next_arrival(t);
        Vector x = env.next_context(t, j);
        int best = 0;
        double best_val = env.expected_reward(j, 0, x);
        for (int k = 1; k < env.n_arms(); ++k) {
            double v = env.expected_reward(j, k, x);
            if (v > best_val) {
                best_val = v;
                best = k;
            }
        }
        env.realized_reward(t, j, best, x);
        double regret = env.best_expected(j, x) - best_val;
        cum += regret;
        cum_inst[j] += regret;
        trace.steps.push_back({t, j, best, regret, cum, cum_inst[j]});
    }
    return trace;
}

}  // namespace mtb
