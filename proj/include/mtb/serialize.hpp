#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "mtb/environment.hpp"
#include "mtb/pricing.hpp"

namespace mtb {

/// Ground truth as a structured document: shared vectors in full, biases as
/// explicit (support, value) pairs so audits can re-check sparsity directly.
inline nlohmann::json ground_truth_to_json(const GroundTruth& truth) {
    nlohmann::json doc;
    doc["arms"] = nlohmann::json::array();
    for (int k = 0; k < truth.n_arms(); ++k) {
        nlohmann::json arm;
        arm["shared"] = std::vector<double>(truth.shared[k].data(),
                                            truth.shared[k].data() + truth.shared[k].size());
        arm["deltas"] = nlohmann::json::array();
        for (int j = 0; j < truth.n_instances(); ++j) {
            nlohmann::json entry;
            entry["instance"] = j;
            std::vector<int> support;
            std::vector<double> values;
            const Vector& delta = truth.deltas[j][k];
            for (Eigen::Index c = 0; c < delta.size(); ++c) {
                if (delta(c) != 0.0) {
                    support.push_back(static_cast<int>(c));
                    values.push_back(delta(c));
                }
            }
            entry["support"] = support;
            entry["values"] = values;
            arm["deltas"].push_back(entry);
        }
        doc["arms"].push_back(arm);
    }
    return doc;
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& doc) {
    GroundTruth truth;
    const auto& arms = doc.at("arms");
    if (arms.empty()) throw InvalidInput("ground truth: no arms");
    const int n_instances = static_cast<int>(arms.front().at("deltas").size());
    for (const auto& arm : arms) {
        std::vector<double> shared = arm.at("shared").get<std::vector<double>>();
        truth.shared.push_back(Eigen::Map<const Vector>(shared.data(), shared.size()));
    }
    const int dim = static_cast<int>(truth.shared.front().size());
    truth.deltas.assign(n_instances,
                        std::vector<Vector>(truth.shared.size(), Vector::Zero(dim)));
    for (std::size_t k = 0; k < arms.size(); ++k) {
        for (const auto& entry : arms[k].at("deltas")) {
            int j = entry.at("instance").get<int>();
            auto support = entry.at("support").get<std::vector<int>>();
            auto values = entry.at("values").get<std::vector<double>>();
            if (support.size() != values.size()) {
                throw InvalidInput("ground truth: support/value length mismatch");
            }
            for (std::size_t i = 0; i < support.size(); ++i) {
                truth.deltas[j][k](support[i]) = values[i];
            }
        }
    }
    return truth;
}

inline void write_ground_truth(const std::string& path, const GroundTruth& truth) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("write_ground_truth: cannot open " + path);
    out << ground_truth_to_json(truth).dump(2) << '\n';
}

}  // namespace mtb
