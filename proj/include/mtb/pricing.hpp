#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtb/bandit.hpp"
#include "mtb/linreg.hpp"
#include "mtb/rng.hpp"

namespace mtb {

// ---------------------------------------------------------------------------
// Demand model: observed demand is x'b0 + p * (x'b1) + noise, so expected
// revenue at price p is the concave quadratic p * (x'b0 + p * x'b1) whenever
// x'b1 < 0. The generator keeps the slope negative over the whole context box
// so every optimum is a genuine interior maximizer.

struct PricingEnvSpec {
    int n_instances = 1;
    int n_features = 2;  // includes the leading intercept coordinate
    int sparsity = 0;    // nonzeros of each instance's stacked bias
    std::vector<double> arrival_probs;
    std::vector<double> sigma;
    double x_max = 1.0;
    double p_min = 0.0;
    double p_max = 1000.0;
    std::pair<double, double> experimental_prices{200.0, 600.0};
    // generator scales
    double base_demand = 10.0;     // intercept of the shared demand vector
    double demand_spread = 2.0;    // L1 mass on the remaining demand coordinates
    double base_slope = 0.0125;    // magnitude of the shared sensitivity intercept (negative)
    double slope_spread = 0.003;   // L1 mass on the remaining sensitivity coordinates
    double demand_bias = 0.25;     // bias entries on demand coordinates ~ U[-a, a]
    double slope_bias = 0.001;     // bias entries on sensitivity coordinates ~ U[-a, a]

    int stacked_dim() const { return 2 * n_features; }

    void validate() const {
        if (n_instances < 1 || n_features < 1) throw InvalidConfig("pricing env: counts must be positive");
        if (sparsity < 0 || sparsity > stacked_dim()) throw InvalidConfig("pricing env: bad sparsity");
        if (static_cast<int>(arrival_probs.size()) != n_instances ||
            static_cast<int>(sigma.size()) != n_instances) {
            throw InvalidConfig("pricing env: per-instance vectors must have length N");
        }
        double total = 0.0;
        for (double p : arrival_probs) {
            if (!(p > 0)) throw InvalidConfig("pricing env: arrival probabilities must be positive");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw InvalidConfig("pricing env: arrival probs must sum to 1");
        if (!(p_min < experimental_prices.first &&
              experimental_prices.first < experimental_prices.second &&
              experimental_prices.second < p_max)) {
            throw InvalidConfig("pricing env: need p_min < p1 < p2 < p_max");
        }
        // price sensitivity must stay negative for every context in the box
        double slope_wiggle = slope_spread + sparsity * slope_bias;
        if (!(base_slope > slope_wiggle)) {
            throw InvalidConfig("pricing env: sensitivity can change sign; shrink slope_spread/slope_bias");
        }
        double demand_wiggle = demand_spread + sparsity * demand_bias;
        if (!(base_demand > demand_wiggle)) {
            throw InvalidConfig("pricing env: demand level can change sign; shrink demand_spread/demand_bias");
        }
    }
};

struct PricingGroundTruth {
    std::vector<Vector> beta0;  // per instance, length n_features
    std::vector<Vector> beta1;

    Vector stacked(int j) const {
        Vector out(beta0[j].size() + beta1[j].size());
        out << beta0[j], beta1[j];
        return out;
    }
};

inline PricingGroundTruth generate_pricing_truth(const PricingEnvSpec& spec, CounterRng& rng) {
    spec.validate();
    const int d = spec.n_features;
    auto scaled_tail = [&](double head, double spread) {
        Vector v(d);
        v(0) = head;
        if (d > 1) {
            Vector tail(d - 1);
            for (int i = 0; i < d - 1; ++i) tail(i) = rng.next_normal();
            double norm = tail.lpNorm<1>();
            if (norm < 1e-12) tail.setZero(), norm = 1.0;
            v.tail(d - 1) = tail * (spread / norm);
        }
        return v;
    };
    Vector shared0 = scaled_tail(spec.base_demand, spec.demand_spread);
    Vector shared1 = scaled_tail(-spec.base_slope, spec.slope_spread);

    PricingGroundTruth truth;
    truth.beta0.assign(spec.n_instances, shared0);
    truth.beta1.assign(spec.n_instances, shared1);
    const int stacked = spec.stacked_dim();
    for (int j = 1; j < spec.n_instances; ++j) {
        std::vector<int> idx(stacked);
        for (int i = 0; i < stacked; ++i) idx[i] = i;
        for (int s = 0; s < spec.sparsity; ++s) {
            int pick = s + static_cast<int>(rng.next_uniform() * (stacked - s));
            if (pick >= stacked) pick = stacked - 1;
            std::swap(idx[s], idx[pick]);
            int coord = idx[s];
            if (coord < d) {
                truth.beta0[j](coord) += spec.demand_bias * (2.0 * rng.next_uniform() - 1.0);
            } else {
                truth.beta1[j](coord - d) += spec.slope_bias * (2.0 * rng.next_uniform() - 1.0);
            }
        }
    }
    return truth;
}

class PricingEnvironment {
public:
    PricingEnvironment(const PricingEnvSpec& spec, std::uint64_t seed)
        : spec_(spec),
          arrival_rng_(seed, rng_stream::kArrival),
          context_rng_(seed, rng_stream::kContext),
          noise_rng_(seed, rng_stream::kNoise) {
        spec_.validate();
        CounterRng truth_rng(seed, rng_stream::kGroundTruth);
        truth_ = generate_pricing_truth(spec_, truth_rng);
    }

    int n_instances() const { return spec_.n_instances; }
    int n_features() const { return spec_.n_features; }

    int next_arrival(std::int64_t) { return sample_arrival(spec_.arrival_probs, arrival_rng_); }

    /// Intercept plus clipped-gaussian features.
    Vector next_context(std::int64_t) {
        Vector x(spec_.n_features);
        x(0) = 1.0;
        for (int i = 1; i < spec_.n_features; ++i) {
            x(i) = std::clamp(context_rng_.next_normal(), -spec_.x_max, spec_.x_max);
        }
        return x;
    }

    double realized_demand(std::int64_t t, int instance, const Vector& x, double price) {
        double y = expected_demand(instance, x, price) + spec_.sigma[instance] * noise_rng_.next_normal();
        if (perturb_steps_.count(t)) y += perturb_offset_;
        return y;
    }

    double expected_demand(int instance, const Vector& x, double price) const {
        return x.dot(truth_.beta0[instance]) + price * x.dot(truth_.beta1[instance]);
    }

    void set_noise_perturbation(std::set<std::int64_t> steps, double offset) {
        perturb_steps_ = std::move(steps);
        perturb_offset_ = offset;
    }

    const PricingGroundTruth& truth() const { return truth_; }
    const PricingEnvSpec& spec() const { return spec_; }

private:
    PricingEnvSpec spec_;
    PricingGroundTruth truth_;
    CounterRng arrival_rng_;
    CounterRng context_rng_;
    CounterRng noise_rng_;
    std::set<std::int64_t> perturb_steps_;
    double perturb_offset_ = 0.0;
};

// ---------------------------------------------------------------------------
// Policy pieces

/// Experimentation schedule on per-instance arrival counts: the E^2-th arrival
/// charges the first experimental price, the (E^2+1)-th the second.
inline std::optional<int> is_forced_period(std::int64_t arrival_count) {
    if (arrival_count < 1) throw InvalidInput("is_forced_period: counts start at 1");
    auto root = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(arrival_count))));
    for (auto e = std::max<std::int64_t>(1, root - 1); e <= root + 1; ++e) {
        if (e * e == arrival_count) return 1;
        if (e * e + 1 == arrival_count && e >= 1) return 2;
    }
    return std::nullopt;
}

/// Revenue-maximizing price under estimated coefficients, clamped to the
/// feasible interval. A nonnegative estimated sensitivity makes estimated
/// revenue nondecreasing in price on the interval, so the cap is charged.
inline double optimal_price(const Vector& x, const Vector& beta0_hat, const Vector& beta1_hat,
                            double p_min, double p_max) {
    if (beta0_hat.size() != x.size() || beta1_hat.size() != x.size()) {
        throw InvalidInput("optimal_price: estimate length mismatch");
    }
    const double level = x.dot(beta0_hat);
    const double slope = x.dot(beta1_hat);
    if (slope >= 0.0) return p_max;
    return std::clamp(level / (-2.0 * slope), p_min, p_max);
}

/// Exact maximizer of p (a + p b) over [p_min, p_max] under true coefficients.
inline double oracle_price(double level, double slope, double p_min, double p_max) {
    if (slope < 0.0) return std::clamp(level / (-2.0 * slope), p_min, p_max);
    double lo = p_min * (level + p_min * slope);
    double hi = p_max * (level + p_max * slope);
    return hi >= lo ? p_max : p_min;
}

struct PricingConfig {
    std::int64_t horizon = 0;
    double zeta0 = 0.0;
    double eta0 = 0.0;
    std::vector<double> lambda0;  // per instance
    LassoOptions lasso;

    void validate(int n_instances) const {
        if (horizon < 1) throw InvalidConfig("pricing config: horizon must be positive");
        if (zeta0 < 0 || eta0 < 0) throw InvalidConfig("pricing config: trim parts must be nonnegative");
        if (static_cast<int>(lambda0.size()) != n_instances) {
            throw InvalidConfig("pricing config: per-instance penalties must have length N");
        }
        for (double l : lambda0) {
            if (l < 0 || !std::isfinite(l)) throw InvalidConfig("pricing config: bad lambda0");
        }
    }
};

struct PricingDebug {
    std::vector<std::int64_t> update_times;
    std::vector<double> omega_used;
    std::vector<double> prices;  // charged price per step
};

namespace detail {

class PricingRunner {
public:
    PricingRunner(PricingEnvironment& env, const PricingConfig& cfg, BanditKind kind,
                  LassoCenterMode lasso_center = LassoCenterMode::zero)
        : env_(env), cfg_(cfg), kind_(kind), lasso_center_(lasso_center) {
        cfg_.validate(env.n_instances());
        n_ = env.n_instances();
        d_ = env.spec().stacked_dim();
    }

    RegretTrace run(std::uint64_t seed, const std::string& algorithm,
                    const std::string& config_hash = "", PricingDebug* debug = nullptr) {
        auto t0 = std::chrono::steady_clock::now();
        const auto& spec = env_.spec();
        RegretTrace trace;
        trace.algorithm = algorithm;
        trace.seed = seed;
        trace.config_hash = config_hash;
        trace.steps.reserve(static_cast<std::size_t>(cfg_.horizon));

        estimates_.assign(n_, Vector::Zero(d_));
        forced_buf_.assign(n_, SampleBuffer{});
        arrivals_.assign(n_, 0);

        std::int64_t next_update_e = 1;
        std::int64_t next_update =
            static_cast<std::int64_t>(n_) * (next_update_e * next_update_e + 1);
        double cum_global = 0.0;
        std::vector<double> cum_inst(n_, 0.0);

        for (std::int64_t t = 1; t <= cfg_.horizon; ++t) {
            const int j = env_.next_arrival(t);
            const Vector x = env_.next_context(t);
            const auto experiment = is_forced_period(++arrivals_[j]);

            double price;
            if (experiment) {
                price = *experiment == 1 ? spec.experimental_prices.first
                                         : spec.experimental_prices.second;
            } else {
                price = optimal_price(x, estimates_[j].head(spec.n_features),
                                      estimates_[j].tail(spec.n_features), spec.p_min, spec.p_max);
            }

            // scheduled refit uses only observations strictly before t
            if (t == next_update) {
                refit(debug);
                if (debug) debug->update_times.push_back(t);
                ++next_update_e;
                next_update = static_cast<std::int64_t>(n_) * (next_update_e * next_update_e + 1);
            }

            const double y = env_.realized_demand(t, j, x, price);
            if (experiment) {
                Vector row(d_);
                row << x, price * x;
                forced_buf_[j].add(row, y);
            }

            const double level = x.dot(env_.truth().beta0[j]);
            const double slope = x.dot(env_.truth().beta1[j]);
            const double star = oracle_price(level, slope, spec.p_min, spec.p_max);
            const double regret =
                star * (level + star * slope) - price * (level + price * slope);
            cum_global += regret;
            cum_inst[j] += regret;
            trace.steps.push_back({t, j, experiment ? *experiment : 0, regret, cum_global,
                                   cum_inst[j]});
            if (debug) debug->prices.push_back(price);
        }

        trace.wallclock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return trace;
    }

private:
    void refit(PricingDebug* debug) {
        std::int64_t min_count = 0;
        for (int j = 0; j < n_; ++j) {
            if (forced_buf_[j].n > 0 && (min_count == 0 || forced_buf_[j].n < min_count)) {
                min_count = forced_buf_[j].n;
            }
        }
        if (min_count == 0) return;

        std::vector<char> has_data(n_, 0);
        std::vector<Vector> stage1(n_);
        std::vector<Matrix> designs(n_);
        std::vector<Vector> responses(n_);
        for (int j = 0; j < n_; ++j) {
            if (forced_buf_[j].n == 0) continue;
            designs[j] = forced_buf_[j].design(d_);
            responses[j] = forced_buf_[j].response();
            if (kind_ != BanditKind::lasso) stage1[j] = least_squares_minnorm(designs[j], responses[j]);
            has_data[j] = 1;
        }

        const double eta_t =
            cfg_.eta0 * std::sqrt(std::log(static_cast<double>(d_) * static_cast<double>(min_count)));
        const double omega_path = cfg_.zeta0 + eta_t;

        std::vector<int> members;
        TrimFraction omega;
        if (kind_ == BanditKind::robust_multitask) {
            for (int j = 0; j < n_; ++j) {
                if (has_data[j]) members.push_back(j);
            }
            omega = TrimFraction::clamped(omega_path, static_cast<int>(members.size()));
            if (debug) debug->omega_used.push_back(omega.value());
        }

        for (int j = 0; j < n_; ++j) {
            if (!has_data[j]) continue;
            const double nj = static_cast<double>(forced_buf_[j].n);
            const double lambda = cfg_.lambda0[j] * std::pow(nj, 0.25) *
                                  std::sqrt(std::log(static_cast<double>(d_) * nj));
            switch (kind_) {
                case BanditKind::robust_multitask: {
                    Vector center(d_);
                    std::vector<double> column(members.size());
                    for (int c = 0; c < d_; ++c) {
                        for (std::size_t i = 0; i < members.size(); ++i) {
                            column[i] = stage1[members[i]](c);
                        }
                        center(c) = trimmed_mean(column, omega);
                    }
                    estimates_[j] = lasso_fit(designs[j], responses[j], lambda, center, cfg_.lasso);
                    break;
                }
                case BanditKind::ols:
                    estimates_[j] = stage1[j];
                    break;
                case BanditKind::lasso: {
                    Vector center = lasso_center_ == LassoCenterMode::own_ols
                                        ? least_squares_minnorm(designs[j], responses[j])
                                        : Vector::Zero(d_);
                    estimates_[j] = lasso_fit(designs[j], responses[j], lambda, center, cfg_.lasso);
                    break;
                }
            }
        }
    }

    PricingEnvironment& env_;
    PricingConfig cfg_;
    BanditKind kind_;
    LassoCenterMode lasso_center_;
    int n_ = 0, d_ = 0;
    std::vector<Vector> estimates_;
    std::vector<SampleBuffer> forced_buf_;
    std::vector<std::int64_t> arrivals_;
};

}  // namespace detail

inline RegretTrace run_rmx(PricingEnvironment& env, const PricingConfig& cfg, std::uint64_t seed,
                           const std::string& config_hash = "", PricingDebug* debug = nullptr) {
    detail::PricingRunner runner(env, cfg, BanditKind::robust_multitask);
    return runner.run(seed, "rmx", config_hash, debug);
}

/// Same schedule and policy with per-instance estimators: plain least squares
/// (ols) or an L1 fit toward zero (lasso).
inline RegretTrace run_pricing_baseline(BanditKind kind, PricingEnvironment& env,
                                        const PricingConfig& cfg, std::uint64_t seed,
                                        const std::string& config_hash = "",
                                        PricingDebug* debug = nullptr) {
    if (kind == BanditKind::robust_multitask) {
        throw InvalidConfig("run_pricing_baseline: use run_rmx for the multitask kind");
    }
    detail::PricingRunner runner(env, cfg, kind);
    return runner.run(seed, kind == BanditKind::ols ? "ols_pricing" : "lasso_pricing", config_hash,
                      debug);
}

}  // namespace mtb
