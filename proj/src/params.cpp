#include "sbm/params.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sbm {

std::vector<std::string> ModelParams::violations() const {
    std::vector<std::string> out;
    if (N < 0) out.push_back("N must be non-negative");
    if (!(c > 0.0)) out.push_back("c must be positive");
    if (!(std::abs(delta) < c)) out.push_back("|delta| must be smaller than c");
    if (!(p > 0.0 && p < 1.0)) out.push_back("p must lie in (0, 1)");
    return out;
}

void ModelParams::validate() const {
    auto v = violations();
    if (v.empty()) return;
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "; " : "") << v[i];
    throw std::invalid_argument(os.str());
}

void ModelParams::validate_finite() const {
    validate();
    if (N < 2) throw std::invalid_argument("N must be at least 2");
    if (!(static_cast<double>(N) > c + std::abs(delta)))
        throw std::invalid_argument("N must exceed c + |delta|");
}

nlohmann::json to_json(const ModelParams& p) {
    return {{"N", p.N}, {"c", p.c}, {"delta", p.delta}, {"p", p.p}};
}

ModelParams params_from_json(const nlohmann::json& j) {
    ModelParams p;
    p.N = j.value("N", 0);
    p.c = j.value("c", 1.0);
    p.delta = j.value("delta", 0.0);
    p.p = j.value("p", 0.5);
    return p;
}

}  // namespace sbm
