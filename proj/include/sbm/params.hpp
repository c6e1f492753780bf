#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace sbm {

// Sparse two-community model: edge probability (c + delta * s_i * s_j) / N, prior P(+1) = p.
struct ModelParams {
    int N = 0;
    double c = 1.0;
    double delta = 0.0;
    double p = 0.5;

    double mbar() const { return 2.0 * p - 1.0; }

    // Every violated constraint, empty when valid.
    std::vector<std::string> violations() const;
    void validate() const;
    // Finite-N models also need c + |delta| < N so that observation probabilities are below 1.
    void validate_finite() const;
};

nlohmann::json to_json(const ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j);

}  // namespace sbm
