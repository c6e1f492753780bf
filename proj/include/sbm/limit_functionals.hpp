#pragma once

#include "sbm/measures.hpp"
#include "sbm/params.hpp"
#include "sbm/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sbm {

struct McValue {
    double value = 0.0;
    double se = 0.0;
    long n = 0;
};

// Generalized Poisson process with mean measure (c + delta sign x) dmu(x): the total count is
// Poisson and each point picks an atom from the normalized intensity.
class PoissonProcessSampler {
public:
    PoissonProcessSampler(const AtomicMeasure& mu, const ModelParams& prm);

    struct Draw {
        long count = 0;
        double log_plus = 0.0;   // sum over points of log(c + delta x)
        double log_minus = 0.0;  // sum over points of log(c - delta x)
    };

    Draw draw(int sign, Rng& rng) const;
    std::vector<double> draw_points(int sign, Rng& rng) const;
    // Integral of x dmu, the tilt argument mu[-1,1] E x_1.
    double first_moment() const { return first_moment_; }
    double intensity(int sign) const { return sign > 0 ? total_[0] : total_[1]; }

private:
    std::size_t pick(int sign, Rng& rng) const;

    ModelParams prm_;
    std::vector<double> pos_, lp_, lm_;
    std::vector<double> cdf_[2];
    double total_[2] = {0.0, 0.0};
    double first_moment_ = 0.0;
};

// log of p e^{-delta M} prod(c + delta x) + (1-p) e^{delta M} prod(c - delta x).
double single_site_log_integral(const ModelParams& prm, double M, double log_plus, double log_minus);
// Mean of the single-site posterior: tanh of half the log-odds.
double single_site_mean(const ModelParams& prm, double M, double log_plus, double log_minus);

// Monte Carlo psi, stratified by the sign of the root (n_mc/2 draws each).
McValue psi(const AtomicMeasure& mu, const ModelParams& prm, long n_mc, std::uint64_t seed);
// Exact psi by summing over Poisson multiplicities; at most `max_atoms` atoms off the origin.
double psi_exact(const AtomicMeasure& mu, const ModelParams& prm, int max_atoms = 3);

// Weighted samples of the single-site posterior mean: the law of Gamma(mu).
struct GammaSamples {
    std::vector<double> m;
    std::vector<double> weight;  // sums to 1
    std::vector<int> sign;
};
GammaSamples gamma_samples(const AtomicMeasure& mu, const ModelParams& prm, long n, std::uint64_t seed,
                           bool stratified = true);

// Equal-weight empirical Gamma(mu) with the root sign drawn from the prior.
AtomicMeasure gamma_map(const AtomicMeasure& mu, const ModelParams& prm, long n_samples, std::uint64_t seed);
// Gamma(mu) binned onto D_K with linear, mean-preserving splitting.
AtomicMeasure gamma_map_binned(const AtomicMeasure& mu, const ModelParams& prm, long n_samples, int K,
                               std::uint64_t seed);

// p E<h>_+ + (1-p) E<h>_- - c - delta mbar x with h = (c + delta s x) log(c + delta s x).
McValue psi_gateaux_density(const AtomicMeasure& mu, double x, const ModelParams& prm, long n_mc,
                            std::uint64_t seed);
std::vector<McValue> psi_gateaux_grid(const AtomicMeasure& mu, const std::vector<double>& xs,
                                      const ModelParams& prm, long n_mc, std::uint64_t seed);

struct FixedPointOptions {
    double damping = 0.5;
    int max_iter = 200;
    double tol = 2e-3;          // Wasserstein distance between iterates
    int K = 6;
    long n_samples = 200000;
    std::uint64_t seed = 0;
    double distinct_tol = 0.05;  // solutions closer than this in W are merged
};

struct FixedPointSolution {
    std::string start;
    AtomicMeasure nu;
    std::vector<double> history;  // W distance between consecutive iterates
    double residual = 0.0;        // W(nu, Gamma(mu + t nu)) with a fresh seed
    bool converged = false;
};

struct FixedPointReport {
    std::vector<FixedPointSolution> runs;
    std::vector<std::size_t> distinct;  // indices into runs
};

// Damped iteration nu <- (1 - a) nu + a Gamma(mu + t nu) on D_K from several starts.
FixedPointReport fixed_point(double t, const AtomicMeasure& mu, const ModelParams& prm,
                             const FixedPointOptions& opts);
FixedPointSolution fixed_point_from(double t, const AtomicMeasure& mu, const ModelParams& prm,
                                    const AtomicMeasure& start, const std::string& name,
                                    const FixedPointOptions& opts);

// (c + delta z) log(c + delta z).
double xlogx_kernel(double z, const ModelParams& prm);
// E (c + delta x1 x2) log(c + delta x1 x2) for x1, x2 independent from nu.
double pair_entropy(const AtomicMeasure& nu, const ModelParams& prm);

McValue parisi(const AtomicMeasure& nu, const ModelParams& prm, long n_mc, std::uint64_t seed);
// The same functional with the finite-N initial condition psi_N.
McValue parisi_finite_n(const AtomicMeasure& nu, const ModelParams& prm, int n_disorder, std::uint64_t seed);

// Euclidean projection onto {w >= 0, sum w = 1, sum k w = mean} (exact up to bisection in the
// multiplier of the mean constraint) and onto the simplex.
std::vector<double> project_mean_slice(const std::vector<double>& v, const std::vector<double>& k, double mean);
std::vector<double> project_simplex(const std::vector<double>& v);

struct OptimizerOptions {
    int K = 6;
    int max_iter = 150;
    long n_grad = 100000;
    long n_value = 200000;
    long n_final = 1000000;
    double step = 0.5;
    int gamma_bins = 4096;
    std::uint64_t seed = 0;
    bool include_fixed_point_start = true;
    FixedPointOptions fixed_point;
};

struct TracePoint {
    int restart = 0;
    int iteration = 0;
    double value = 0.0;
    double se = 0.0;
    double constraint_residual = 0.0;
    double step = 0.0;
};

struct VariationalResult {
    double value = 0.0;
    double se = 0.0;
    AtomicMeasure optimizer;
    std::vector<std::string> restart_names;
    std::vector<double> restart_values;
    int best_restart = 0;
    double first_order_residual = 0.0;
    std::vector<TracePoint> trace;
    std::string label;
};

// Objective over probability weights w on D_K of the form
// psi(base + scale nu_w) - (coef/2) w.Q w + constant.
struct GridObjective {
    AtomicMeasure base;
    double scale = 1.0;
    double coef = 1.0;
    double constant = 0.0;
    std::function<double(double)> kernel;  // Q_{ab} = kernel(a b)
    bool mean_constraint = false;
    double mean = 0.0;
};

VariationalResult maximize_on_grid(const GridObjective& obj, const ModelParams& prm,
                                   const std::vector<std::pair<std::string, std::vector<double>>>& starts,
                                   const OptimizerOptions& opts);

// Gradient of a grid objective at w: scale D psi(base + scale nu_w, k) - coef (Q w)_k.
std::vector<double> grid_objective_gradient(const GridObjective& obj, const ModelParams& prm,
                                            const std::vector<double>& w, int K, long n, int bins,
                                            std::uint64_t seed);

// Maximizes Par over probability measures on D_K with mean mbar.
VariationalResult optimize_parisi(const ModelParams& prm, const OptimizerOptions& opts);

// Standard multistart seeds on D_K: delta at mbar (split onto neighbours), uniform, and two skews.
std::vector<std::pair<std::string, std::vector<double>>> standard_starts(int K, double mean);

}  // namespace sbm
