#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtb/bandit.hpp"
#include "mtb/environment.hpp"
#include "mtb/multitask.hpp"
#include "mtb/pricing.hpp"

namespace mtb {

enum class Scenario { standard, data_poor, network, pricing, static_estimators };

inline Scenario scenario_from_string(const std::string& s) {
    if (s == "standard") return Scenario::standard;
    if (s == "data_poor") return Scenario::data_poor;
    if (s == "network") return Scenario::network;
    if (s == "pricing") return Scenario::pricing;
    if (s == "static_estimators") return Scenario::static_estimators;
    throw InvalidConfig("config: unknown scenario '" + s + "'");
}

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::standard: return "standard";
        case Scenario::data_poor: return "data_poor";
        case Scenario::network: return "network";
        case Scenario::pricing: return "pricing";
        case Scenario::static_estimators: return "static_estimators";
    }
    return "?";
}

/// One simulated policy plus its hyperparameter overrides. Omitted entries
/// fall back to scale-aware defaults derived from the environment.
struct AlgorithmSpec {
    std::string name;  // rmbandit | ols_bandit | lasso_bandit | rmx | ols_pricing | lasso_pricing
    double q = 1.0;
    double h = 1.0;
    std::optional<double> zeta0, eta0, zeta10, eta10;
    std::optional<double> lambda0, lambda10;  // scalar, broadcast over instances
    bool exclude_data_poor = false;
};

/// Monte-Carlo comparison of the static estimators on a fresh synthetic
/// problem per draw. The poorly_aligned construction gives every task a
/// distinct bias support (round-robin over coordinates).
struct StaticEstimatorsSpec {
    int n_tasks = 12;
    int dim = 24;
    int sparsity = 2;
    std::vector<std::int64_t> sample_grid{100, 400, 1600};
    int draws = 200;
    double sigma = 0.1;
    double x_max = 1.0;
    double bias_magnitude = 0.5;  // nonzero bias entries are +/- this value
    std::string construction = "poorly_aligned";  // or "random_support"
    std::optional<double> zeta;   // defaults to sqrt(s/d)
    std::optional<double> eta;    // defaults to 0.2

    void validate() const {
        if (n_tasks < 1 || dim < 1) throw InvalidConfig("static: counts must be positive");
        if (sparsity < 0 || sparsity > dim) throw InvalidConfig("static: bad sparsity");
        if (sample_grid.empty()) throw InvalidConfig("static: empty sample grid");
        for (auto n : sample_grid) {
            if (n < dim + 2) throw InvalidConfig("static: sample sizes must exceed dim + 1");
        }
        if (draws < 1) throw InvalidConfig("static: draws must be positive");
        if (sigma < 0 || bias_magnitude < 0) throw InvalidConfig("static: negative scale");
        if (construction != "poorly_aligned" && construction != "random_support") {
            throw InvalidConfig("static: unknown construction '" + construction + "'");
        }
    }
};

struct ExperimentConfig {
    Scenario scenario = Scenario::standard;
    std::int64_t horizon = 0;
    std::vector<std::uint64_t> seeds;
    EnvSpec env;
    PricingEnvSpec pricing_env;
    StaticEstimatorsSpec static_spec;
    std::vector<AlgorithmSpec> algorithms;
    std::optional<double> network_alpha;
    std::optional<int> network_s_tilde;
    std::string output_dir = "out";
    int thin = 0;  // 0 = auto
    int workers = 0;  // 0 = hardware concurrency
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw InvalidConfig("config: unknown key '" + key + "' in " + where);
        }
    }
}

inline EnvSpec parse_env(const nlohmann::json& j) {
    require_keys(j,
                 {"n_instances", "n_arms", "dim", "sparsity", "arrival_probs", "sigma", "x_max",
                  "bias_range", "data_poor"},
                 "env");
    EnvSpec env;
    env.n_instances = j.at("n_instances").get<int>();
    env.n_arms = j.at("n_arms").get<int>();
    env.dim = j.at("dim").get<int>();
    env.sparsity = j.value("sparsity", 0);
    env.x_max = j.value("x_max", 1.0);
    if (j.contains("bias_range")) {
        auto r = j.at("bias_range").get<std::vector<double>>();
        if (r.size() != 2) throw InvalidConfig("config: env.bias_range needs two entries");
        env.bias_range = {r[0], r[1]};
    }
    if (j.contains("sigma")) {
        if (j.at("sigma").is_number()) {
            env.sigma.assign(env.n_instances, j.at("sigma").get<double>());
        } else {
            env.sigma = j.at("sigma").get<std::vector<double>>();
        }
    } else {
        env.sigma.assign(env.n_instances, 0.05);
    }
    if (j.contains("arrival_probs")) {
        env.arrival_probs = j.at("arrival_probs").get<std::vector<double>>();
    } else {
        env.arrival_probs.assign(env.n_instances, 1.0 / env.n_instances);
    }
    if (j.contains("data_poor")) {
        require_keys(j.at("data_poor"), {"instance", "traffic_ratio"}, "env.data_poor");
        env.set_data_poor(j.at("data_poor").at("instance").get<int>(),
                          j.at("data_poor").at("traffic_ratio").get<double>());
    }
    return env;
}

inline PricingEnvSpec parse_pricing_env(const nlohmann::json& j) {
    require_keys(j,
                 {"n_instances", "n_features", "sparsity", "arrival_probs", "sigma", "x_max",
                  "p_min", "p_max", "experimental_prices", "base_demand", "demand_spread",
                  "base_slope", "slope_spread", "demand_bias", "slope_bias"},
                 "pricing_env");
    PricingEnvSpec env;
    env.n_instances = j.at("n_instances").get<int>();
    env.n_features = j.at("n_features").get<int>();
    env.sparsity = j.value("sparsity", 0);
    env.x_max = j.value("x_max", 1.0);
    env.p_min = j.value("p_min", 0.0);
    env.p_max = j.value("p_max", 1000.0);
    if (j.contains("experimental_prices")) {
        auto r = j.at("experimental_prices").get<std::vector<double>>();
        if (r.size() != 2) throw InvalidConfig("config: experimental_prices needs two entries");
        env.experimental_prices = {r[0], r[1]};
    }
    env.base_demand = j.value("base_demand", env.base_demand);
    env.demand_spread = j.value("demand_spread", env.demand_spread);
    env.base_slope = j.value("base_slope", env.base_slope);
    env.slope_spread = j.value("slope_spread", env.slope_spread);
    env.demand_bias = j.value("demand_bias", env.demand_bias);
    env.slope_bias = j.value("slope_bias", env.slope_bias);
    if (j.contains("sigma")) {
        if (j.at("sigma").is_number()) {
            env.sigma.assign(env.n_instances, j.at("sigma").get<double>());
        } else {
            env.sigma = j.at("sigma").get<std::vector<double>>();
        }
    } else {
        env.sigma.assign(env.n_instances, 0.05);
    }
    if (j.contains("arrival_probs")) {
        env.arrival_probs = j.at("arrival_probs").get<std::vector<double>>();
    } else {
        env.arrival_probs.assign(env.n_instances, 1.0 / env.n_instances);
    }
    return env;
}

inline StaticEstimatorsSpec parse_static(const nlohmann::json& j) {
    require_keys(j,
                 {"n_tasks", "dim", "sparsity", "sample_grid", "draws", "sigma", "x_max",
                  "bias_magnitude", "construction", "zeta", "eta"},
                 "static");
    StaticEstimatorsSpec s;
    s.n_tasks = j.value("n_tasks", s.n_tasks);
    s.dim = j.value("dim", s.dim);
    s.sparsity = j.value("sparsity", s.sparsity);
    if (j.contains("sample_grid")) s.sample_grid = j.at("sample_grid").get<std::vector<std::int64_t>>();
    s.draws = j.value("draws", s.draws);
    s.sigma = j.value("sigma", s.sigma);
    s.x_max = j.value("x_max", s.x_max);
    s.bias_magnitude = j.value("bias_magnitude", s.bias_magnitude);
    s.construction = j.value("construction", s.construction);
    if (j.contains("zeta")) s.zeta = j.at("zeta").get<double>();
    if (j.contains("eta")) s.eta = j.at("eta").get<double>();
    return s;
}

inline AlgorithmSpec parse_algorithm(const nlohmann::json& j) {
    require_keys(j,
                 {"name", "q", "h", "zeta0", "eta0", "zeta10", "eta10", "lambda0", "lambda10",
                  "exclude_data_poor"},
                 "algorithms[]");
    AlgorithmSpec a;
    a.name = j.at("name").get<std::string>();
    a.q = j.value("q", 1.0);
    a.h = j.value("h", 1.0);
    if (j.contains("zeta0")) a.zeta0 = j.at("zeta0").get<double>();
    if (j.contains("eta0")) a.eta0 = j.at("eta0").get<double>();
    if (j.contains("zeta10")) a.zeta10 = j.at("zeta10").get<double>();
    if (j.contains("eta10")) a.eta10 = j.at("eta10").get<double>();
    if (j.contains("lambda0")) a.lambda0 = j.at("lambda0").get<double>();
    if (j.contains("lambda10")) a.lambda10 = j.at("lambda10").get<double>();
    a.exclude_data_poor = j.value("exclude_data_poor", false);
    return a;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
    detail::require_keys(doc,
                         {"scenario", "horizon", "seeds", "env", "pricing_env", "static",
                          "algorithms", "network", "output_dir", "thin", "workers"},
                         "top level");
    ExperimentConfig cfg;
    cfg.scenario = scenario_from_string(doc.at("scenario").get<std::string>());
    cfg.horizon = doc.value("horizon", std::int64_t{0});
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("env")) cfg.env = detail::parse_env(doc.at("env"));
    if (doc.contains("pricing_env")) cfg.pricing_env = detail::parse_pricing_env(doc.at("pricing_env"));
    if (doc.contains("static")) cfg.static_spec = detail::parse_static(doc.at("static"));
    if (doc.contains("algorithms")) {
        for (const auto& a : doc.at("algorithms")) {
            cfg.algorithms.push_back(detail::parse_algorithm(a));
        }
    }
    if (doc.contains("network")) {
        detail::require_keys(doc.at("network"), {"alpha", "s_tilde"}, "network");
        if (doc.at("network").contains("alpha")) {
            cfg.network_alpha = doc.at("network").at("alpha").get<double>();
        }
        if (doc.at("network").contains("s_tilde")) {
            cfg.network_s_tilde = doc.at("network").at("s_tilde").get<int>();
        }
    }
    cfg.output_dir = doc.value("output_dir", std::string("out"));
    cfg.thin = doc.value("thin", 0);
    cfg.workers = doc.value("workers", 0);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("config: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidConfig("config: " + std::string(e.what()));
    }
    return parse_experiment_config(doc);
}

/// Structural checks beyond parsing; an empty list means the config is valid.
inline std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> issues;
    auto check_env = [&](const auto& env, const char* name) {
        try {
            env.validate();
        } catch (const std::exception& e) {
            issues.push_back(std::string(name) + ": " + e.what());
        }
    };
    if (cfg.scenario == Scenario::static_estimators) {
        try {
            cfg.static_spec.validate();
        } catch (const std::exception& e) {
            issues.push_back(std::string("static: ") + e.what());
        }
        return issues;
    }
    if (cfg.seeds.empty()) issues.push_back("seeds: at least one seed is required");
    if (cfg.algorithms.empty()) issues.push_back("algorithms: at least one algorithm is required");
    if (cfg.horizon < 2) issues.push_back("horizon: must be at least 2");

    if (cfg.scenario == Scenario::pricing) {
        check_env(cfg.pricing_env, "pricing_env");
        for (const auto& a : cfg.algorithms) {
            if (a.name != "rmx" && a.name != "ols_pricing" && a.name != "lasso_pricing") {
                issues.push_back("algorithms: '" + a.name + "' is not a pricing policy");
            }
        }
        return issues;
    }

    check_env(cfg.env, "env");
    for (const auto& a : cfg.algorithms) {
        if (a.name != "rmbandit" && a.name != "ols_bandit" && a.name != "lasso_bandit") {
            issues.push_back("algorithms: '" + a.name + "' is not a bandit policy");
            continue;
        }
        if (cfg.horizon >= 2 && a.q > 0) {
            double b0 = a.q * std::log(static_cast<double>(cfg.horizon));
            if (b0 > static_cast<double>(cfg.horizon)) {
                issues.push_back("algorithms: " + a.name + ": forced batch q ln T exceeds the horizon");
            }
            if (b0 < 1.0) issues.push_back("algorithms: " + a.name + ": q ln T is below one step");
        } else if (a.q <= 0) {
            issues.push_back("algorithms: " + a.name + ": q must be positive");
        }
        if (a.h <= 0) issues.push_back("algorithms: " + a.name + ": h must be positive");
        double zeta0 = a.zeta0.value_or(0.0), eta0 = a.eta0.value_or(0.0);
        if (zeta0 < 0 || eta0 < 0) issues.push_back("algorithms: " + a.name + ": negative trim part");
        if (a.exclude_data_poor && cfg.scenario != Scenario::data_poor) {
            issues.push_back("algorithms: " + a.name +
                             ": exclude_data_poor requires the data_poor scenario");
        }
    }
    if (cfg.scenario == Scenario::data_poor) {
        bool heterogeneous = false;
        for (double p : cfg.env.arrival_probs) {
            heterogeneous |= std::abs(p - cfg.env.arrival_probs[0]) > 1e-12;
        }
        if (!heterogeneous) {
            issues.push_back("env: data_poor scenario expects uneven arrival probabilities");
        }
    }
    if (cfg.scenario == Scenario::network && !cfg.network_alpha && !cfg.network_s_tilde) {
        issues.push_back("network: set alpha or s_tilde");
    }
    if (cfg.thin < 0) issues.push_back("thin: must be nonnegative");
    if (cfg.workers < 0) issues.push_back("workers: must be nonnegative");
    return issues;
}

}  // namespace mtb
