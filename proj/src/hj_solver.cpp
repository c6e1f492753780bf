#include "sbm/hj_solver.hpp"

#include "sbm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace sbm {

std::string to_string(Boundary b) { return b == Boundary::neumann ? "neumann" : "extrapolate"; }

std::string to_string(Route r) {
    switch (r) {
        case Route::grid: return "grid";
        case Route::hopf_lax: return "hopf_lax";
        case Route::characteristics: return "characteristics";
    }
    return "unknown";
}

Route route_from_string(const std::string& s) {
    if (s == "grid") return Route::grid;
    if (s == "hopf_lax" || s == "hopf-lax") return Route::hopf_lax;
    if (s == "characteristics") return Route::characteristics;
    throw std::invalid_argument("unknown route: " + s);
}

namespace {

constexpr std::size_t kMaxNodes = 20000000;

std::size_t axis_nodes(double x_max, double h) { return static_cast<std::size_t>(std::llround(x_max / h)) + 1; }

double sup_abs_shifted_g(const ModelParams& prm, double b) {
    double m = 0.0;
    for (int i = 0; i <= 2000; ++i) m = std::max(m, std::abs(g(-1.0 + i * 1e-3, prm) + b));
    return m;
}

}  // namespace

std::vector<std::string> HJGridSpec::violations() const {
    std::vector<std::string> v = params.violations();
    if (K < 0 || K > 1) v.push_back("grid scheme needs K in {0, 1}");
    if (params.delta > 0.0) v.push_back("grid scheme is refused for delta > 0");
    if (!(h > 0.0)) v.push_back("h must be positive");
    if (!(x_max > 0.0)) v.push_back("x_max must be positive");
    if (h > 0.0 && x_max > 0.0 && std::abs(x_max / h - std::round(x_max / h)) > 1e-9)
        v.push_back("x_max must be a multiple of h");
    if (!(T >= 0.0)) v.push_back("T must be non-negative");
    if (!(tau >= 0.0)) v.push_back("tau must be non-negative");
    if (!(R >= 0.0)) v.push_back("R must be non-negative");
    if (save_every < 1) v.push_back("save_every must be at least 1");
    if (v.empty()) {
        const double nodes = std::pow(static_cast<double>(axis_nodes(x_max, h)), std::ldexp(2.0, K));
        if (nodes > static_cast<double>(kMaxNodes)) v.push_back("grid has too many nodes");
        ShiftedKernel sk = shifted_matrix(K, b, params);
        if (!(sk.min_shifted_g > 0.0)) v.push_back("b must make g + b strictly positive");
    }
    return v;
}

nlohmann::json to_json(const HJGridSpec& s) {
    return {{"params", to_json(s.params)}, {"K", s.K},       {"b", s.b},
            {"R", s.R},                    {"x_max", s.x_max}, {"h", s.h},
            {"tau", s.tau},                {"T", s.T},       {"boundary", to_string(s.boundary)},
            {"save_every", s.save_every},  {"require_psd", s.require_psd}};
}

double hj_radius_threshold(const ModelParams& prm, double b) {
    prm.validate();
    const double c = prm.c, ad = std::abs(prm.delta);
    const double lip_psi = 2.0 * c * (2.0 + std::abs(std::log(2.0 * c)) + std::abs(std::log(c - ad))) + b;
    const double sup_gp = ad * std::max(std::abs(std::log(c + ad)), std::abs(std::log(c - ad)));
    return lip_psi + sup_abs_shifted_g(prm, b) + sup_gp + 1.0;
}

namespace {

ExtendedNonlinearity make_nonlinearity(const HJGridSpec& spec, double R) {
    return ExtendedNonlinearity(shifted_matrix(spec.K, spec.b, spec.params), R, spec.require_psd);
}

double effective_R(const HJGridSpec& spec) {
    return spec.R > 0.0 ? spec.R : hj_radius_threshold(spec.params, spec.b);
}

}  // namespace

double cfl_time_step(const HJGridSpec& spec) {
    ExtendedNonlinearity H = make_nonlinearity(spec, effective_R(spec));
    const double n = std::ldexp(2.0, spec.K);
    return spec.h / (n * H.feasible_radius());
}

GridFunction shifted_initial_condition(const ModelParams& prm, int K, double b) {
    return [prm, K, b](const std::vector<double>& x) {
        DyadicWeights w{K, x};
        return psi_exact(measure_from_weights(w), prm, static_cast<int>(x.size())) + b * norm_l1(w);
    };
}

std::vector<double> HJSolution::node(std::size_t index) const {
    std::vector<double> x(dim);
    for (std::size_t k = dim; k-- > 0;) {
        x[k] = static_cast<double>(index % nodes_per_axis) * spec.h;
        index /= nodes_per_axis;
    }
    return x;
}

double HJSolution::value_at(const std::vector<double>& x, std::size_t slice) const {
    if (x.size() != dim) throw std::invalid_argument("point has the wrong dimension");
    if (slice >= slices.size()) throw std::out_of_range("no such time slice");
    const auto& f = slices[slice];
    std::vector<std::size_t> lo(dim);
    std::vector<double> frac(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        if (x[k] < -1e-12 || x[k] > spec.x_max + 1e-12) throw std::out_of_range("point outside the grid box");
        const double u = std::clamp(x[k] / spec.h, 0.0, static_cast<double>(nodes_per_axis - 1));
        lo[k] = std::min(static_cast<std::size_t>(std::floor(u)), nodes_per_axis - 2);
        frac[k] = u - static_cast<double>(lo[k]);
    }
    double acc = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t{1} << dim); ++corner) {
        double wgt = 1.0;
        std::size_t idx = 0;
        for (std::size_t k = 0; k < dim; ++k) {
            const bool up = (corner >> k) & 1;
            wgt *= up ? frac[k] : 1.0 - frac[k];
            idx = idx * nodes_per_axis + lo[k] + (up ? 1 : 0);
        }
        if (wgt != 0.0) acc += wgt * f[idx];
    }
    return acc;
}

void HJSolution::write_csv(std::ostream& os) const {
    os << "t";
    for (std::size_t k = 0; k < dim; ++k) os << ",x" << k;
    os << ",value\n";
    os << std::setprecision(17);
    for (std::size_t s = 0; s < slices.size(); ++s)
        for (std::size_t i = 0; i < slices[s].size(); ++i) {
            os << times[s];
            for (double v : node(i)) os << ',' << v;
            os << ',' << slices[s][i] << '\n';
        }
}

namespace {

double discrete_lipschitz(const std::vector<double>& f, std::size_t dim, std::size_t M, double h) {
    double m = 0.0;
    std::size_t stride = 1;
    for (std::size_t k = dim; k-- > 0;) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            if ((i / stride) % M == M - 1) continue;
            m = std::max(m, std::abs(f[i + stride] - f[i]) / h);
        }
        stride *= M;
    }
    return static_cast<double>(dim) * m;
}

}  // namespace

HJSolution solve_grid(const HJGridSpec& spec, const GridFunction& initial) {
    auto v = spec.violations();
    if (!v.empty()) {
        std::string msg = "invalid grid spec:";
        for (const auto& s : v) msg += " " + s + ";";
        throw std::invalid_argument(msg);
    }
    HJSolution sol;
    sol.spec = spec;
    sol.R = effective_R(spec);
    ExtendedNonlinearity H = make_nonlinearity(spec, sol.R);
    sol.feasible_radius = H.feasible_radius();
    sol.kernel_psd = H.kernel_psd();
    sol.dim = H.kernel().dim();
    sol.nodes_per_axis = axis_nodes(spec.x_max, spec.h);
    const double n = static_cast<double>(sol.dim);
    const double tau_max = spec.h / (n * sol.feasible_radius);
    if (spec.tau == 0.0) {
        sol.n_steps = spec.T > 0.0 ? static_cast<int>(std::ceil(spec.T / tau_max - 1e-12)) : 0;
        sol.tau = sol.n_steps > 0 ? spec.T / sol.n_steps : 0.0;
    } else {
        sol.n_steps = static_cast<int>(std::llround(spec.T / spec.tau));
        if (std::abs(sol.n_steps * spec.tau - spec.T) > 1e-9 * std::max(1.0, spec.T))
            throw std::invalid_argument("tau must divide T");
        if (spec.tau > tau_max * (1.0 + 1e-12))
            throw CflViolation("CFL condition violated: tau |D_K| R' / h = " +
                               std::to_string(spec.tau / tau_max) + " > 1");
        sol.tau = spec.tau;
    }
    const std::size_t M = sol.nodes_per_axis, dim = sol.dim;
    std::size_t total = 1;
    for (std::size_t k = 0; k < dim; ++k) total *= M;
    std::vector<std::size_t> stride(dim);
    for (std::size_t k = dim, s = 1; k-- > 0; s *= M) stride[k] = s;

    std::vector<double> f(total);
    parallel_for(total, [&](std::size_t i) { f[i] = initial(sol.node(i)); });
    sol.times.push_back(0.0);
    sol.slices.push_back(f);
    sol.lipschitz.push_back(discrete_lipschitz(f, dim, M, spec.h));

    std::vector<double> next(total);
    const double h = spec.h, tau = sol.tau;
    const bool neumann = spec.boundary == Boundary::neumann;
    for (int step = 1; step <= sol.n_steps; ++step) {
        parallel_for(total, [&](std::size_t i) {
            std::vector<double> y(dim);
            for (std::size_t k = 0; k < dim; ++k) {
                const bool top = (i / stride[k]) % M == M - 1;
                if (!top)
                    y[k] = (f[i + stride[k]] - f[i]) / h;
                else
                    y[k] = neumann ? 0.0 : (f[i] - f[i - stride[k]]) / h;
            }
            next[i] = f[i] + tau * H(y);
        });
        f.swap(next);
        if (step % spec.save_every == 0 || step == sol.n_steps) {
            sol.times.push_back(step * tau);
            sol.slices.push_back(f);
            sol.lipschitz.push_back(discrete_lipschitz(f, dim, M, spec.h));
        }
    }
    return sol;
}

namespace {

std::string regime_label(const ModelParams& prm) { return prm.delta <= 0.0 ? "proven" : "candidate"; }

// Exact psi when the measure is small enough, otherwise Monte Carlo.
McValue psi_value(const AtomicMeasure& mu, const ModelParams& prm, long n_mc, std::uint64_t seed) {
    std::size_t off_origin = 0;
    const AtomicMeasure nf = mu.normal_form();
    for (const auto& a : nf.atoms())
        if (a.position != 0.0) ++off_origin;
    if (off_origin <= 3) return {psi_exact(mu, prm, 3), 0.0, 0};
    return psi(mu, prm, n_mc, seed);
}

}  // namespace

VariationalResult hopf_lax(double t, const AtomicMeasure& mu, const ModelParams& prm, const HopfLaxOptions& opts) {
    if (!(t >= 0.0)) throw std::invalid_argument("t must be non-negative");
    prm.validate();
    OptimizerOptions oo = opts.optimizer;
    oo.K = opts.K;
    if (t == 0.0) {
        VariationalResult r;
        McValue v = psi_value(mu, prm, oo.n_final, oo.seed);
        r.value = v.value;
        r.se = v.se;
        r.optimizer = AtomicMeasure::dirac(0.0);
        r.label = regime_label(prm);
        return r;
    }
    GridObjective obj;
    obj.base = mu;
    obj.scale = t;
    obj.coef = t;
    obj.kernel = [prm](double z) { return g(z, prm); };
    DyadicGrid grid(opts.K);
    const double mean = std::clamp(prm.mbar(), grid.points().front(), grid.points().back());
    auto starts = standard_starts(opts.K, mean);
    std::vector<double> low(grid.size(), 0.0);
    low.front() = 1.0;
    starts.emplace_back("vertex_low", low);
    if (oo.include_fixed_point_start) {
        FixedPointOptions fo = oo.fixed_point;
        fo.K = opts.K;
        fo.seed = stream_seed(oo.seed, 5);
        DyadicWeights uw{opts.K, std::vector<double>(grid.size(), 1.0)};
        auto fp = fixed_point_from(t, mu, prm, measure_from_weights(uw), "uniform", fo);
        starts.emplace_back("fixed_point", bin_mean_preserving(fp.nu, opts.K));
    }
    VariationalResult r = maximize_on_grid(obj, prm, starts, oo);
    r.label = regime_label(prm);
    return r;
}

CharacteristicsResult characteristics_solve(double t, const AtomicMeasure& mu, const ModelParams& prm, long n_mc,
                                            const FixedPointOptions& fp) {
    if (!(t >= 0.0)) throw std::invalid_argument("t must be non-negative");
    prm.validate();
    CharacteristicsResult res;
    res.label = regime_label(prm);
    if (t == 0.0) {
        McValue v = psi_value(mu, prm, n_mc, fp.seed);
        res.value = v.value;
        res.se = v.se;
        res.nu = gamma_map_binned(mu, prm, fp.n_samples, fp.K, fp.seed);
        res.values = {v.value};
        res.ses = {v.se};
        res.solutions = {res.nu};
        return res;
    }
    FixedPointReport rep = fixed_point(t, mu, prm, fp);
    std::vector<std::size_t> use = rep.distinct;
    for (const auto& run : rep.runs) res.converged = res.converged && run.converged;
    if (use.empty())
        for (std::size_t i = 0; i < rep.runs.size(); ++i) use.push_back(i);
    res.value = -1e300;
    for (std::size_t i : use) {
        const AtomicMeasure& nu = rep.runs[i].nu;
        McValue v = psi(mu + nu.scaled(t), prm, n_mc, stream_seed(fp.seed, 0xc4a7));
        double quad = 0.0;
        for (const auto& a : nu.atoms())
            for (const auto& b : nu.atoms()) quad += a.weight * b.weight * g(a.position * b.position, prm);
        const double val = v.value - 0.5 * t * quad;
        res.values.push_back(val);
        res.ses.push_back(v.se);
        res.solutions.push_back(nu);
        if (val > res.value) {
            res.value = val;
            res.se = v.se;
            res.nu = nu;
        }
    }
    res.multiple = rep.distinct.size() > 1;
    return res;
}

AssembledValue assemble_f(double t, const AtomicMeasure& mu, const ModelParams& prm, Route route, double b, double R,
                          int K, const AssembleOptions& opts) {
    if (!(t >= 0.0)) throw std::invalid_argument("t must be non-negative");
    DyadicWeights x = project_to_dyadic(mu, K);
    AssembledValue out;
    out.shift = b * norm_l1(x) + 0.5 * b * t;
    out.label = regime_label(prm);
    switch (route) {
        case Route::grid: {
            HJGridSpec spec = opts.grid;
            spec.params = prm;
            spec.K = K;
            spec.b = b;
            spec.R = R;
            spec.T = t;
            double need = 2.0 * norm_l1(x);
            for (double v : x.x) need = std::max(need, 2.0 * v);
            if (spec.x_max < need) spec.x_max = spec.h * std::ceil(need / spec.h);
            spec.save_every = std::numeric_limits<int>::max();
            HJSolution sol = solve_grid(spec, shifted_initial_condition(prm, K, b));
            out.shifted = sol.final_value_at(x.x);
            out.value = out.shifted - out.shift;
            break;
        }
        case Route::hopf_lax: {
            HopfLaxOptions ho = opts.hopf_lax;
            ho.K = K;
            VariationalResult r = hopf_lax(t, mu, prm, ho);
            out.shifted = r.value + out.shift;
            out.value = out.shifted - out.shift;
            out.se = r.se;
            if (std::abs(out.value - r.value) > 1e-12 * std::max(1.0, std::abs(r.value)))
                throw std::logic_error("shift does not cancel on the Hopf-Lax route");
            out.label = r.label;
            break;
        }
        case Route::characteristics: {
            FixedPointOptions fo = opts.fixed_point;
            fo.K = K;
            CharacteristicsResult r = characteristics_solve(t, mu, prm, opts.n_mc, fo);
            out.shifted = r.value + out.shift;
            out.value = out.shifted - out.shift;
            out.se = r.se;
            break;
        }
    }
    return out;
}

}  // namespace sbm
