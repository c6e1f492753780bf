#pragma once

#include "sbm/inference.hpp"
#include "sbm/measures.hpp"
#include "sbm/params.hpp"

#include <cstdint>
#include <string>

namespace sbm {

struct SamplerOptions {
    Method method = Method::exact;
    int cap = kDefaultEnumerationCap;
    McmcOptions mcmc;  // seed is replaced per instance
    // Ordered pairs (i, j) sampled per instance in MCMC mode; 0 uses all N^2 pairs.
    int n_pairs = 0;
    int n_disorder = 200;
    std::uint64_t seed = 0;
};

struct FreeEnergyResult {
    double value = 0.0;
    double std_error = 0.0;
    int N = 0;
    double t = 0.0;
    double mass = 0.0;
    std::string method;
    int n_disorder = 0;
    double f0 = 0.0;
    double f0_se = 0.0;
    double integral = 0.0;
    double integral_se = 0.0;
    bool mixing_warning = false;
    // (H(s*) - log Z) / N averaged over the same instances, when available.
    bool has_paired_mi = false;
    double mi_paired = 0.0;
    double mi_paired_se = 0.0;
};

// Per-site free energy by enumeration, averaged over disorder.
FreeEnergyResult free_energy_exact(const ModelParams& prm, double t, const AtomicMeasure& mu, int n_disorder,
                                   std::uint64_t seed, int cap = kDefaultEnumerationCap);

// phi(w) = (w/N) log w + (1 - w/N) log(1 - w/N), the mean log-likelihood of one observation.
double observation_entropy_term(double w, int N);

// Closed form at delta = 0: (t (N-1)/2 + s N) phi(c).
double delta0_free_energy(const ModelParams& prm, double t, double mass);

// t = 0: the Hamiltonian factorizes over sites.
FreeEnergyResult free_energy_t0(const ModelParams& prm, const AtomicMeasure& mu, int n_disorder, std::uint64_t seed);
// Exact log Z of an instance without couplings.
double log_partition_t0(const Instance& inst);

struct DerivativeEstimate {
    GibbsEstimate estimate;  // exact finite-N form
    MeanSe asymptotic;       // asymptotic form with the O(1/N) term dropped
    MeanSe taylor;           // power-series form of the asymptotic expression
    MeanSe asymptotic_minus_taylor;
};

// d/dt of the free energy: ((N-1)/2) E_{i,j} [(w1/N) log w1 + w0 log w0] with
// w1 = c + delta <s_i s_j>, w0 = 1 - w1/N and (i, j) uniform ordered pairs.
DerivativeEstimate dF_dt_gibbs(const ModelParams& prm, double t, const AtomicMeasure& mu, const SamplerOptions& opts,
                               int taylor_terms = 40);

// Gateaux derivative density in the direction delta_x:
// E_i [w1 log w1] + N E_i [w0 log w0] with w1 = c + delta <s_i> x.
DerivativeEstimate gateaux_density_gibbs(const ModelParams& prm, double t, const AtomicMeasure& mu, double x,
                                         const SamplerOptions& opts);

double gateaux_density_bound(const ModelParams& prm);
double gateaux_density_derivative_bound(const ModelParams& prm);

// F(0, mu) plus the Gauss-Legendre integral of dF/dt over [0, t].
FreeEnergyResult free_energy_thermo(const ModelParams& prm, double t, const AtomicMeasure& mu, int n_nodes,
                                    const SamplerOptions& opts);

enum class MiForm { paired, finite_n, asymptotic };

struct MutualInformation {
    double value = 0.0;
    double se = 0.0;
    MiForm form = MiForm::finite_n;
};

// E H(s*) / N in closed form.
double planted_energy_density(const ModelParams& prm, double t, const AtomicMeasure& mu);

MutualInformation mutual_information(const ModelParams& prm, const FreeEnergyResult& fe,
                                     MiForm form = MiForm::paired, const AtomicMeasure& mu = {});
// q (c+delta) log(c+delta)/2 + (1-q) (c-delta) log(c-delta)/2 - c/2 - delta mbar^2/2.
double mi_asymptotic_constant(const ModelParams& prm);

struct PoissonBinomialGap {
    double gap = 0.0;
    double se = 0.0;
    double mean_difference = 0.0;  // F_poisson - F_binomial
    double f_poisson = 0.0;
    double f_binomial = 0.0;
    int n_disorder = 0;
};

// Poisson vs binomial free energy with coupled disorder: each unordered pair carries a
// Poi((N-1)/N) number of Poisson edges, the first of which reuses the binomial bit.
PoissonBinomialGap appendix_a_gap(const ModelParams& prm, int n_disorder, std::uint64_t seed,
                            int cap = kDefaultEnumerationCap);

// Binomial edge list and Poisson edge list coupled as above.
std::pair<EdgeList, EdgeList> coupled_edge_lists(const ModelParams& prm, const Spins& signal, Rng& rng);

}  // namespace sbm
