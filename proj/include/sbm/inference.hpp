#pragma once

#include "sbm/model.hpp"
#include "sbm/stats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sbm {

enum class Method { exact, mcmc };

std::string to_string(Method m);

struct GibbsEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    Method method = Method::exact;
    long burn_in = 0;
    long thinning = 1;
    double tau = 0.0;  // integrated autocorrelation time estimate, in sweeps
    bool mixing_warning = false;
};

constexpr int kDefaultEnumerationCap = 22;

// Full enumeration of the posterior exp(H(s)) P*(s) / Z over {-1,+1}^N. Configuration
// index bit i set means s_i = +1.
class ExactPosterior {
public:
    explicit ExactPosterior(const Instance& inst, int cap = kDefaultEnumerationCap);

    int N() const { return N_; }
    // log of the integral of exp(H) dP*.
    double log_Z() const { return log_Z_; }
    const std::vector<double>& probabilities() const { return prob_; }

    static Spins config(std::uint64_t index, int N);

    double expect(const std::function<double(const Spins&)>& f) const;
    std::vector<double> magnetizations() const;
    // <s_i s_j> for all pairs, unit diagonal.
    Eigen::MatrixXd correlations() const;
    // <s_i s_j> for fixed j and all i.
    std::vector<double> correlations_with(int j) const;

private:
    int N_;
    double log_Z_;
    std::vector<double> prob_;
};

// Log-weights H(s) + log P*(s) of every configuration, computed along a Gray code.
std::vector<double> enumerate_log_weights(const Instance& inst, int cap = kDefaultEnumerationCap);

GibbsEstimate exact_gibbs(const Instance& inst, const std::function<double(const Spins&)>& f,
                          int cap = kDefaultEnumerationCap);
// Average over n independent replicas; the product space must satisfy n N <= cap.
GibbsEstimate exact_gibbs_replicas(const Instance& inst, int n_replicas,
                                   const std::function<double(const std::vector<Spins>&)>& f,
                                   int cap = kDefaultEnumerationCap);

struct McmcOptions {
    enum class Init { random, planted };
    long n_sweeps = 20000;
    long burn_in = 2000;
    int n_replicas = 1;
    int n_batches = 50;
    std::uint64_t seed = 0;
    // Planted starts from the signal, which is itself an exact posterior sample.
    Init init = Init::random;

    void validate() const;
};

// Heat-bath single-site dynamics with cached couplings sums u_i = sum_j J_ij s_j.
class McmcChain {
public:
    McmcChain(const Instance& inst, Rng rng, Spins start);

    void sweep();
    const Spins& spins() const { return s_; }
    // log-odds of s_i = +1 given the rest.
    double conditional_log_odds(int i) const;

private:
    void flip(int i);

    const Instance* inst_;
    Rng rng_;
    Spins s_;
    std::vector<double> u_;
    double prior_log_odds_;
};

using ReplicaObservable = std::function<void(const std::vector<Spins>& replicas, std::vector<double>& out)>;

// Runs n_replicas independent chains and records n_obs observables after every sweep
// past burn-in; returns one estimate per observable with batch-means errors.
std::vector<GibbsEstimate> mcmc_observables(const Instance& inst, const McmcOptions& opts, std::size_t n_obs,
                                            const ReplicaObservable& obs);

GibbsEstimate mcmc_gibbs(const Instance& inst, const std::function<double(const std::vector<Spins>&)>& f,
                         const McmcOptions& opts);

// Magnetizations and selected pair correlations from a single chain.
struct GibbsMoments {
    std::vector<GibbsEstimate> magnetization;
    std::vector<GibbsEstimate> pair_correlation;
    bool mixing_warning = false;
};
GibbsMoments mcmc_moments(const Instance& inst, const std::vector<std::pair<int, int>>& pairs,
                          const McmcOptions& opts);

// (1/N) sum_i prod_l s^l_i over the listed configurations.
double multi_overlap(const std::vector<const Spins*>& configs);
double multi_overlap(const std::vector<Spins>& replicas, const std::vector<int>& indices);

struct NishimoriResidual {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double se = 0.0;

    bool within(double k_se) const { return residual <= k_se * se + 1e-12; }
};

// Per-instance paired values; the residual is |mean(lhs - rhs)| with the SE of the difference.
NishimoriResidual nishimori_residual(std::string name, const std::vector<double>& lhs,
                                     const std::vector<double>& rhs);

// Exact-enumeration battery: R_{1,2} vs R_{1,*}, <s_1> vs mbar, R_{1,2,3} vs R_{1,2,*}.
std::vector<NishimoriResidual> nishimori_suite(const ModelParams& prm, double t, const AtomicMeasure& mu,
                                               int n_disorder, std::uint64_t seed,
                                               int cap = kDefaultEnumerationCap);

// L_0 = (s.s* + s.Z_0 / (2 sqrt(lambda_{0,N}))) / N and
// L_k = (1/s_N) sum_j s_{i_jk} (1/(1 + lambda_k s_{i_jk}) - e_jk / (1 + lambda_k s*_{i_jk})^2).
double perturbation_L(const Spins& s, const Instance& inst, int k);

GibbsEstimate perturbation_L(const Instance& inst, int k, Method method, const McmcOptions& opts);

// Per-instance Gibbs averages needed by the overlap, integration-by-parts and
// Franz-de Sanctis diagnostics.
struct PerturbationStats {
    double R12 = 0.0, R12_sq = 0.0;
    double R1star = 0.0;
    double L0 = 0.0, L0_sq = 0.0;
    std::vector<double> Lk, Lk_sq;  // index k - 1
    double sigma_dot_Z = 0.0;
    double sqrt_lambda0N = 0.0;
    double s_N = 0.0;
    std::vector<double> lambda;
    Spins signal;
    std::vector<double> m;       // <s_i>
    std::vector<double> corr_j;  // <s_i s_j> for the tracked site j
    int site_j = 0;
    bool mixing_warning = false;
};

PerturbationStats perturbation_stats(const Instance& inst, Method method, const McmcOptions& opts, int site_j = 1);

struct OverlapConcentrationReport {
    int n_instances = 0;
    MeanSe R12_var;              // E<(R12 - E<R12>)^2>
    MeanSe L0_var;               // E<(L0 - E<L0>)^2>
    MeanSe overlap_margin;       // 4 L0_var - R12_var
    std::vector<MeanSe> Lk_mean;
    std::vector<MeanSe> Lk_var;
    NishimoriResidual ibp;       // E<s.Z_0> vs N sqrt(lambda_{0,N}) (1 - E<R_{1,*}>)
};

OverlapConcentrationReport overlap_concentration_report(const std::vector<PerturbationStats>& stats);

struct FranzDeSanctisResult {
    int k = 1;
    int n = 1;
    std::string f_name;
    double lhs_diff = 0.0;
    double lhs_se = 0.0;
    double bound = 0.0;
    double bound_se = 0.0;

    double combined_se() const { return std::sqrt(lhs_se * lhs_se + bound_se * bound_se); }
    bool within(double k_se) const { return lhs_diff <= bound + k_se * combined_se(); }
};

enum class FdsFunction { one, site_product };

// The uniform auxiliary index is averaged exactly over all sites; the exponential variable
// is averaged over n_aux_e draws per instance.
FranzDeSanctisResult franz_de_sanctis_residual(const std::vector<PerturbationStats>& stats, int k, int n,
                                               FdsFunction f, int n_aux_e, std::uint64_t seed);

}  // namespace sbm
