#pragma once

#include "sbm/kernel.hpp"
#include "sbm/limit_functionals.hpp"
#include "sbm/measures.hpp"
#include "sbm/params.hpp"

#include <json.hpp>

#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbm {

enum class Boundary { neumann, extrapolate };
std::string to_string(Boundary b);

struct CflViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dense grid over the box [0, x_max]^{|D_K|} for df/dt = H(grad f).
struct HJGridSpec {
    ModelParams params;
    int K = 0;
    double b = 0.0;
    double R = 0.0;  // 0 selects hj_radius_threshold(params, b)
    double x_max = 4.0;
    double h = 0.05;
    double tau = 0.0;  // 0 selects the largest CFL-stable step that divides T
    double T = 1.0;
    Boundary boundary = Boundary::neumann;
    int save_every = 1;  // keep every n-th time slice (the last one is always kept)
    bool require_psd = false;

    // Every violated constraint, empty when valid.
    std::vector<std::string> violations() const;
};

nlohmann::json to_json(const HJGridSpec& s);

// Smallest admissible radius: Lip_TV(psi_b) + sup|g + b| + sup|g'| + 1.
double hj_radius_threshold(const ModelParams& prm, double b);
// Largest stable time step: tau |D_K| R' / h <= 1.
double cfl_time_step(const HJGridSpec& spec);

using GridFunction = std::function<double(const std::vector<double>&)>;

// psi(mu_x) + b ||x||_1 with mu_x = (1/|D_K|) sum_k x_k delta_k, exact psi.
GridFunction shifted_initial_condition(const ModelParams& prm, int K, double b);

struct HJSolution {
    HJGridSpec spec;
    double tau = 0.0;
    double R = 0.0;
    double feasible_radius = 0.0;
    int n_steps = 0;
    std::size_t dim = 0;
    std::size_t nodes_per_axis = 0;
    bool kernel_psd = false;
    std::vector<double> times;
    std::vector<std::vector<double>> slices;  // row-major, last axis fastest
    std::vector<double> lipschitz;            // discrete ||f(t, .)||_{Lip,1} per slice

    std::size_t node_count() const { return slices.empty() ? 0 : slices.front().size(); }
    std::vector<double> node(std::size_t index) const;
    // Multilinear interpolation of a slice at x inside the box.
    double value_at(const std::vector<double>& x, std::size_t slice) const;
    double final_value_at(const std::vector<double>& x) const { return value_at(x, slices.size() - 1); }
    // Rows (t, x_1..x_d, value).
    void write_csv(std::ostream& os) const;
};

// Forward-Euler monotone scheme f <- f + tau H(D+ f) with forward differences.
HJSolution solve_grid(const HJGridSpec& spec, const GridFunction& initial);

struct HopfLaxOptions {
    int K = 6;
    OptimizerOptions optimizer;  // K is overwritten
};

// sup over probability measures nu on D_K of psi(mu + t nu) - (t/2) int G_nu dnu.
VariationalResult hopf_lax(double t, const AtomicMeasure& mu, const ModelParams& prm, const HopfLaxOptions& opts);

struct CharacteristicsResult {
    double value = 0.0;
    double se = 0.0;
    AtomicMeasure nu;
    std::vector<double> values;          // one per distinct fixed point
    std::vector<double> ses;
    std::vector<AtomicMeasure> solutions;
    bool multiple = false;               // more than one distinct fixed point
    bool converged = true;               // every run converged
    std::string label;
};

// Value psi(mu + t nu) - (t/2) int G_nu dnu maximized over the fixed points nu = Gamma(mu + t nu).
CharacteristicsResult characteristics_solve(double t, const AtomicMeasure& mu, const ModelParams& prm, long n_mc,
                                            const FixedPointOptions& fp);

enum class Route { grid, hopf_lax, characteristics };
std::string to_string(Route r);
Route route_from_string(const std::string& s);

struct AssembleOptions {
    HJGridSpec grid;  // params, b, R, K and T are overwritten
    HopfLaxOptions hopf_lax;
    FixedPointOptions fixed_point;
    long n_mc = 200000;
};

struct AssembledValue {
    double value = 0.0;
    double se = 0.0;
    double shifted = 0.0;  // value before removing b ||x||_1 + b t / 2
    double shift = 0.0;
    std::string label;
};

// f(t, mu) from the shifted solution at x^{(K)}(mu) minus b ||x||_1 + b t / 2.
AssembledValue assemble_f(double t, const AtomicMeasure& mu, const ModelParams& prm, Route route, double b, double R,
                          int K, const AssembleOptions& opts = {});

}  // namespace sbm
