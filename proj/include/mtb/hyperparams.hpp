#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mtb/errors.hpp"
#include "mtb/schedule.hpp"

namespace mtb {

/// Problem-level constants entering the theory-driven hyperparameter choices.
/// p_star, psi, rho and the margin h are properties of the environment; c is
/// the free analysis constant and must satisfy zeta + eta < 1/2 - c.
struct ProblemConstants {
    double x_max = 1.0;
    std::vector<double> sigma;  // per instance
    std::vector<double> arrival_probs;
    double p_star = 0.1;
    double psi = 0.1;
    double psi_prime = 0.1;  // compatibility constant, data-poor variant only
    double rho = 1.0;
    double h = 1.0;
    int s = 1;
    int d = 1;
    int K = 2;
    int N = 1;
    double c = 0.05;
    std::int64_t horizon = 2;  // enters eta0 through the forced-batch size
};

struct TheoreticalHyper {
    double zeta0 = 0.0;
    double zeta10 = 0.0;
    double eta0 = 0.0;
    double eta10 = 0.0;
    std::vector<double> lambda0;   // per instance
    std::vector<double> lambda10;  // per instance
    double q = 0.0;
    bool degenerate_trim = false;  // zeta >= 1, e.g. when s = d
};

namespace detail {

inline void check_constants(const ProblemConstants& pc) {
    if (pc.x_max <= 0 || pc.p_star <= 0 || pc.psi <= 0 || pc.rho <= 0 || pc.h <= 0 ||
        pc.c <= 0 || pc.s <= 0 || pc.d <= 0 || pc.K <= 0 || pc.N <= 0) {
        throw InvalidConfig("theoretical hyperparameters: constants must be positive");
    }
    if (static_cast<int>(pc.sigma.size()) != pc.N ||
        static_cast<int>(pc.arrival_probs.size()) != pc.N) {
        throw InvalidConfig("theoretical hyperparameters: per-instance vectors must have length N");
    }
    for (double s : pc.sigma) {
        if (s <= 0) throw InvalidConfig("theoretical hyperparameters: sigma must be positive");
    }
    for (double p : pc.arrival_probs) {
        if (p <= 0) throw InvalidConfig("theoretical hyperparameters: arrival probs must be positive");
    }
}

}  // namespace detail

/// Standard-regime choices. All logs are natural.
inline TheoreticalHyper theoretical_hyperparams(const ProblemConstants& pc) {
    detail::check_constants(pc);
    TheoreticalHyper out;
    const double d = pc.d;
    const double s = pc.s;
    const double K = pc.K;
    const double N = pc.N;

    out.zeta0 = out.zeta10 = std::sqrt(s / d);
    out.degenerate_trim = out.zeta0 >= 1.0;
    out.eta10 = std::sqrt(9.0 / (pc.rho * N));

    // q: worst case over the four sample-size requirements
    double max_sig_over_p = 0.0;
    double min_p = pc.arrival_probs[0];
    for (int j = 0; j < pc.N; ++j) {
        max_sig_over_p = std::max(max_sig_over_p, pc.sigma[j] * pc.sigma[j] / pc.arrival_probs[j]);
        min_p = std::min(min_p, pc.arrival_probs[j]);
    }
    const double x2 = pc.x_max * pc.x_max;
    const double q1 = std::pow(384.0 * std::sqrt(3.0), 2) * x2 * max_sig_over_p * K * d * d *
                      std::log(d) * std::log(N) /
                      (pc.c * pc.c * pc.h * pc.h * pc.p_star * pc.psi * N);
    const double q2 = std::pow(192.0, 3) * x2 * x2 * max_sig_over_p * K * s * d * std::log(d) /
                      (pc.h * pc.h * pc.p_star * pc.p_star * pc.psi * pc.psi);
    const double q3 = 96.0 * x2 * K * d * std::log(d * N) / (pc.p_star * pc.psi * min_p);
    const double q4 = 60.0 * K * std::log(N) / (pc.p_star * min_p);
    out.q = std::max({q1, q2, q3, q4});

    // eta0 depends on the forced-batch size |B0| = q ln T
    const double b0 = out.q * std::log(static_cast<double>(pc.horizon));
    double min_rate = std::numeric_limits<double>::infinity();
    double max_inv_rate = 0.0;
    for (int j = 0; j < pc.N; ++j) {
        double rate = std::sqrt(pc.p_star * pc.psi * pc.arrival_probs[j] * b0 /
                                (K * pc.sigma[j] * pc.sigma[j]));
        min_rate = std::min(min_rate, rate);
        max_inv_rate = std::max(max_inv_rate, 1.0 / rate);
    }
    const double ch_term = pc.c * pc.h / (128.0 * pc.x_max * d);
    const double log_arg = 384.0 * pc.x_max * d / (pc.c * pc.h) * max_inv_rate;
    if (log_arg <= 1.0) {
        // the eta0 expression needs N = Omega(log d log T log log T); below that
        // regime its square root turns negative
        throw InvalidConfig(
            "theoretical hyperparameters: eta0 is undefined for these constants "
            "(too few instances for the asymptotic regime)");
    }
    out.eta0 = ch_term * min_rate / std::sqrt(2.0 * std::log(log_arg));

    out.lambda0.assign(pc.N, pc.p_star * pc.psi * pc.h / (192.0 * pc.x_max * std::sqrt(s * d)));
    out.lambda10.resize(pc.N);
    for (int j = 0; j < pc.N; ++j) {
        out.lambda10[j] = std::sqrt(64.0 * pc.sigma[j] * pc.sigma[j] * x2 / pc.p_star);
    }
    return out;
}

/// Data-poor variant: a single neighbor supplies the shared model, so the
/// trim degenerates (zeta = 1, eta = 0) and the forced-stage penalty changes
/// scale. `poor` is the target instance, `rich` its donor.
inline TheoreticalHyper theoretical_hyperparams_data_poor(const ProblemConstants& pc, int poor,
                                                          int rich) {
    detail::check_constants(pc);
    if (poor < 0 || poor >= pc.N || rich < 0 || rich >= pc.N || poor == rich) {
        throw InvalidConfig("theoretical hyperparameters: bad instance pair");
    }
    TheoreticalHyper out;
    out.zeta0 = out.zeta10 = 1.0;
    out.eta0 = out.eta10 = 0.0;
    out.degenerate_trim = true;

    const double d = pc.d;
    const double s = pc.s;
    const double K = pc.K;
    const double x2 = pc.x_max * pc.x_max;
    const double sig_l = pc.sigma[rich];
    const double sig_j = pc.sigma[poor];
    const double p_l = pc.arrival_probs[rich];
    const double p_j = pc.arrival_probs[poor];
    const double C = std::max(0.5, pc.psi_prime * pc.psi_prime / (512.0 * s * x2));

    const double q1 = std::pow(128.0 * std::sqrt(3.0), 2) * sig_l * sig_l * x2 * K * d * d *
                      std::log(d) / (pc.h * pc.h * pc.p_star * pc.psi * p_l);
    const double q2 = std::pow(2048.0 * std::sqrt(3.0), 2) * x2 * x2 * sig_j * sig_j * K * s * s *
                      std::log(d) / (pc.h * pc.h * p_j * pc.p_star * pc.p_star * pc.psi * pc.psi);
    const double q3 = 96.0 * x2 * K * d * std::log(d) / (pc.p_star * pc.psi * p_l);
    const double q4 = 4.0 * K / (C * C * pc.p_star * p_j);
    const double q5 = 20.0 * K / (pc.p_star * p_j);
    const double q6 = 12.0 * K * std::log(d) / (C * C * pc.p_star * p_j);
    out.q = std::max({q1, q2, q3, q4, q5, q6});

    out.lambda0.assign(pc.N, pc.p_star * pc.psi * pc.h / (256.0 * pc.x_max * s));
    out.lambda10.resize(pc.N);
    for (int j = 0; j < pc.N; ++j) {
        out.lambda10[j] = std::sqrt(64.0 * pc.sigma[j] * pc.sigma[j] * x2 / pc.p_star);
    }
    return out;
}

}  // namespace mtb
