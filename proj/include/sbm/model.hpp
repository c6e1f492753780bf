#pragma once

#include "sbm/measures.hpp"
#include "sbm/params.hpp"
#include "sbm/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace sbm {

using Spins = std::vector<std::int8_t>;

struct Edge {
    int i = 0;
    int j = 0;
    bool observed = false;
};

struct EdgeList {
    enum class Mode { binomial, poisson };
    Mode mode = Mode::poisson;
    double t = 0.0;
    std::vector<Edge> edges;
};

struct Observation {
    int site = 0;
    double x = 0.0;
    bool observed = false;
};

struct ChannelData {
    double s = 0.0;
    std::vector<Observation> obs;
};

struct PerturbationSpec {
    double gamma = -1.0 / 16.0;
    double eta = 0.9;
    int K_plus = 8;
    // Fixed lambda_0..lambda_{K_plus}; drawn uniformly from their boxes when empty.
    std::vector<double> lambda;

    std::vector<std::string> violations() const;
};

struct ExpObservation {
    int site = 0;
    double e = 0.0;
};

struct PerturbationData {
    double gamma = 0.0;
    double eta = 0.0;
    double eps_N = 0.0;
    double s_N = 0.0;
    std::vector<double> lambda;                       // lambda_0 .. lambda_{K_plus}
    std::vector<double> Z0;                           // N standard normals
    std::vector<std::vector<ExpObservation>> channels;  // channels[k-1] for k = 1..K_plus

    int K_plus() const { return static_cast<int>(channels.size()); }
    double lambda0_N() const { return eps_N * lambda[0]; }
};

// Every Hamiltonian in this model is a function of single spins and spin products, so an
// instance compiles to constant + sum_i h_i s_i + sum_{i<j} J_ij s_i s_j.
struct CompiledIsing {
    int N = 0;
    double constant = 0.0;
    std::vector<double> h;
    std::vector<double> J;  // dense N x N, symmetric, zero diagonal

    double coupling(int i, int j) const { return J[static_cast<std::size_t>(i) * N + j]; }
    double energy(const Spins& s) const;
};

struct Instance {
    ModelParams params;
    double t = 0.0;
    AtomicMeasure mu;
    Spins signal;
    EdgeList edges;
    std::optional<ChannelData> channel;
    std::optional<PerturbationData> perturbation;
    std::uint64_t seed = 0;
    CompiledIsing ising;
};

// log[(c + delta z)^G (1 - (c + delta z)/N)^(1-G)] with z a spin product or spin times type.
double observation_term(const ModelParams& prm, double z, bool observed);

Spins sample_signal(const ModelParams& prm, Rng& rng);
Edge draw_poisson_edge(const ModelParams& prm, const Spins& signal, Rng& rng);
Observation draw_observation(const ModelParams& prm, const Spins& signal, int site, double x, Rng& rng);
EdgeList sample_binomial_edges(const ModelParams& prm, const Spins& signal, Rng& rng);
PerturbationData sample_perturbation(const ModelParams& prm, const Spins& signal, const PerturbationSpec& spec,
                                     Rng& rng);

// Draws a type from the normalized measure.
class TypeSampler {
public:
    explicit TypeSampler(const AtomicMeasure& mu);
    double operator()(Rng& rng) const;

private:
    std::vector<double> cdf_;
    std::vector<double> pos_;
};

Instance sample_instance(const ModelParams& prm, double t, const AtomicMeasure& mu,
                         const std::optional<PerturbationSpec>& perturb, std::uint64_t seed);

// Builds an instance from explicit parts and compiles its Ising form.
Instance assemble_instance(const ModelParams& prm, Spins signal, EdgeList edges,
                           std::optional<ChannelData> channel, std::optional<PerturbationData> perturbation,
                           std::uint64_t seed = 0);

CompiledIsing compile(const Instance& inst);

// Term-by-term sum of edge, channel and perturbation terms.
double hamiltonian(const Spins& s, const Instance& inst);
double hamiltonian_original(const Spins& s, const ModelParams& prm, const EdgeList& edges);
double gaussian_perturbation(const Spins& s, const Spins& signal, const PerturbationData& pd);
double exponential_perturbation(const Spins& s, const Spins& signal, const PerturbationData& pd);

// H(s with s_i = +1) - H(s with s_i = -1) from the terms touching i.
double local_field(int i, const Spins& s, const Instance& inst);

nlohmann::json instance_envelope(const Instance& inst);

}  // namespace sbm
