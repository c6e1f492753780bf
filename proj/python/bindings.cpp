#include "sbm/free_energy.hpp"
#include "sbm/hj_solver.hpp"
#include "sbm/inference.hpp"
#include "sbm/kernel.hpp"
#include "sbm/limit_functionals.hpp"
#include "sbm/parallel.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace sbm;
using namespace pybind11::literals;

namespace {

ModelParams make_params(double c, double delta, double p, int N) {
    ModelParams prm;
    prm.N = N;
    prm.c = c;
    prm.delta = delta;
    prm.p = p;
    prm.validate();
    return prm;
}

py::dict variational_dict(const VariationalResult& r) {
    std::vector<std::pair<double, double>> atoms;
    for (const auto& a : r.optimizer.atoms()) atoms.emplace_back(a.position, a.weight);
    return py::dict("value"_a = r.value, "se"_a = r.se, "optimizer"_a = atoms, "restarts"_a = r.restart_names,
                    "restart_values"_a = r.restart_values, "best_restart"_a = r.best_restart,
                    "first_order_residual"_a = r.first_order_residual, "label"_a = r.label);
}

OptimizerOptions optimizer_options(int K, int max_iter, long n_grad, long n_value, long n_final,
                                   bool fixed_point_start, std::uint64_t seed) {
    OptimizerOptions o;
    o.K = K;
    o.max_iter = max_iter;
    o.n_grad = n_grad;
    o.n_value = n_value;
    o.n_final = n_final;
    o.include_fixed_point_start = fixed_point_start;
    o.seed = seed;
    o.fixed_point.seed = stream_seed(seed, 17);
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sparse two-community block model: free energies, limit functionals and HJ solvers";

    m.def("set_thread_count", &set_thread_count, "n"_a);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init(&make_params), "c"_a = 3.0, "delta"_a = -1.0, "p"_a = 0.5, "N"_a = 0)
        .def_readwrite("N", &ModelParams::N)
        .def_readwrite("c", &ModelParams::c)
        .def_readwrite("delta", &ModelParams::delta)
        .def_readwrite("p", &ModelParams::p)
        .def_property_readonly("mbar", &ModelParams::mbar)
        .def("violations", &ModelParams::violations)
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(c=" + std::to_string(p.c) + ", delta=" + std::to_string(p.delta) +
                   ", p=" + std::to_string(p.p) + ", N=" + std::to_string(p.N) + ")";
        });

    py::class_<AtomicMeasure>(m, "AtomicMeasure")
        .def(py::init<>())
        .def(py::init([](const std::vector<std::pair<double, double>>& atoms) {
                 std::vector<Atom> a;
                 for (const auto& [x, w] : atoms) a.push_back({x, w});
                 return AtomicMeasure(std::move(a));
             }),
             "atoms"_a)
        .def_static("dirac", &AtomicMeasure::dirac, "position"_a, "weight"_a = 1.0)
        .def_property_readonly("atoms",
                               [](const AtomicMeasure& mu) {
                                   std::vector<std::pair<double, double>> out;
                                   for (const auto& a : mu.atoms()) out.emplace_back(a.position, a.weight);
                                   return out;
                               })
        .def("mass", &AtomicMeasure::mass)
        .def("mean", &AtomicMeasure::mean)
        .def("normal_form", &AtomicMeasure::normal_form)
        .def("__add__", &AtomicMeasure::operator+)
        .def("scaled", &AtomicMeasure::scaled, "factor"_a);

    m.def("wasserstein", &wasserstein, "mu"_a, "nu"_a);
    m.def("project_to_dyadic", [](const AtomicMeasure& mu, int K) { return project_to_dyadic(mu, K).x; }, "mu"_a,
          "K"_a);

    m.def("g", &g, "z"_a, "params"_a);
    m.def("choose_b", &choose_b, "params"_a);
    m.def("c_infinity", &c_infinity, "mu"_a, "params"_a);
    m.def(
        "shifted_matrix",
        [](int K, double b, const ModelParams& prm) {
            ShiftedKernel k = shifted_matrix(K, b, prm);
            return py::dict("matrix"_a = k.matrix, "min_eigenvalue"_a = k.min_eigenvalue(), "psd"_a = k.is_psd());
        },
        "K"_a, "b"_a, "params"_a);

    m.def(
        "psi",
        [](const AtomicMeasure& mu, const ModelParams& prm, long n_mc, std::uint64_t seed) {
            McValue v = psi(mu, prm, n_mc, seed);
            return py::make_tuple(v.value, v.se);
        },
        "mu"_a, "params"_a, "n_mc"_a = 200000, "seed"_a = 0);
    m.def("psi_exact", &psi_exact, "mu"_a, "params"_a, "max_atoms"_a = 3);
    m.def("gamma_map", &gamma_map, "mu"_a, "params"_a, "n_samples"_a = 100000, "seed"_a = 0);
    m.def(
        "parisi",
        [](const AtomicMeasure& nu, const ModelParams& prm, long n_mc, std::uint64_t seed) {
            McValue v = parisi(nu, prm, n_mc, seed);
            return py::make_tuple(v.value, v.se);
        },
        "nu"_a, "params"_a, "n_mc"_a = 200000, "seed"_a = 0);

    m.def(
        "free_energy_exact",
        [](const ModelParams& prm, double t, const AtomicMeasure& mu, int n_disorder, std::uint64_t seed) {
            FreeEnergyResult r;
            {
                py::gil_scoped_release release;
                r = free_energy_exact(prm, t, mu, n_disorder, seed);
            }
            MutualInformation mi = mutual_information(prm, r);
            return py::dict("value"_a = r.value, "se"_a = r.std_error, "mi"_a = mi.value, "mi_se"_a = mi.se);
        },
        "params"_a, "t"_a = 1.0, "mu"_a = AtomicMeasure{}, "n_disorder"_a = 200, "seed"_a = 0);
    m.def(
        "free_energy_t0",
        [](const ModelParams& prm, const AtomicMeasure& mu, int n_disorder, std::uint64_t seed) {
            FreeEnergyResult r = free_energy_t0(prm, mu, n_disorder, seed);
            return py::make_tuple(r.value, r.std_error);
        },
        "params"_a, "mu"_a, "n_disorder"_a = 200, "seed"_a = 0);
    m.def("delta0_free_energy", &delta0_free_energy, "params"_a, "t"_a, "mass"_a);
    m.def("mi_asymptotic_constant", &mi_asymptotic_constant, "params"_a);

    m.def(
        "nishimori_suite",
        [](const ModelParams& prm, double t, const AtomicMeasure& mu, int n_disorder, std::uint64_t seed) {
            std::vector<NishimoriResidual> res;
            {
                py::gil_scoped_release release;
                res = nishimori_suite(prm, t, mu, n_disorder, seed);
            }
            py::list out;
            for (const auto& r : res)
                out.append(py::dict("name"_a = r.name, "lhs"_a = r.lhs, "rhs"_a = r.rhs, "residual"_a = r.residual,
                                    "se"_a = r.se));
            return out;
        },
        "params"_a, "t"_a, "mu"_a, "n_disorder"_a, "seed"_a = 0);

    m.def(
        "optimize_parisi",
        [](const ModelParams& prm, int K, int max_iter, long n_grad, long n_value, long n_final,
           bool fixed_point_start, std::uint64_t seed) {
            VariationalResult r;
            {
                py::gil_scoped_release release;
                r = optimize_parisi(prm, optimizer_options(K, max_iter, n_grad, n_value, n_final, fixed_point_start,
                                                           seed));
            }
            return variational_dict(r);
        },
        "params"_a, "K"_a = 6, "max_iter"_a = 150, "n_grad"_a = 100000, "n_value"_a = 200000,
        "n_final"_a = 1000000, "fixed_point_start"_a = true, "seed"_a = 0);
    m.def(
        "hopf_lax",
        [](double t, const AtomicMeasure& mu, const ModelParams& prm, int K, int max_iter, long n_grad,
           long n_value, long n_final, bool fixed_point_start, std::uint64_t seed) {
            HopfLaxOptions ho;
            ho.K = K;
            ho.optimizer = optimizer_options(K, max_iter, n_grad, n_value, n_final, fixed_point_start, seed);
            VariationalResult r;
            {
                py::gil_scoped_release release;
                r = hopf_lax(t, mu, prm, ho);
            }
            return variational_dict(r);
        },
        "t"_a, "mu"_a, "params"_a, "K"_a = 6, "max_iter"_a = 150, "n_grad"_a = 100000, "n_value"_a = 200000,
        "n_final"_a = 1000000, "fixed_point_start"_a = true, "seed"_a = 0);
    m.def(
        "characteristics_solve",
        [](double t, const AtomicMeasure& mu, const ModelParams& prm, long n_mc, int K, long n_samples,
           std::uint64_t seed) {
            FixedPointOptions fo;
            fo.K = K;
            fo.n_samples = n_samples;
            fo.seed = seed;
            CharacteristicsResult r;
            {
                py::gil_scoped_release release;
                r = characteristics_solve(t, mu, prm, n_mc, fo);
            }
            return py::dict("value"_a = r.value, "se"_a = r.se, "nu"_a = r.nu, "values"_a = r.values,
                            "multiple"_a = r.multiple, "converged"_a = r.converged, "label"_a = r.label);
        },
        "t"_a, "mu"_a, "params"_a, "n_mc"_a = 200000, "K"_a = 6, "n_samples"_a = 200000, "seed"_a = 0);

    m.def(
        "solve_grid",
        [](const ModelParams& prm, double b, double T, double h, double x_max, double R, int K,
           const std::string& boundary) {
            HJGridSpec s;
            s.params = prm;
            s.K = K;
            s.b = b;
            s.R = R;
            s.T = T;
            s.h = h;
            s.x_max = x_max;
            s.boundary = boundary == "extrapolate" ? Boundary::extrapolate : Boundary::neumann;
            s.save_every = std::numeric_limits<int>::max();
            HJSolution sol;
            {
                py::gil_scoped_release release;
                sol = solve_grid(s, shifted_initial_condition(prm, K, b));
            }
            const auto M = static_cast<py::ssize_t>(sol.nodes_per_axis);
            std::vector<py::ssize_t> shape(sol.dim, M);
            py::array_t<double> initial(shape), final(shape);
            std::copy(sol.slices.front().begin(), sol.slices.front().end(), initial.mutable_data());
            std::copy(sol.slices.back().begin(), sol.slices.back().end(), final.mutable_data());
            return py::dict("initial"_a = initial, "final"_a = final, "tau"_a = sol.tau, "R"_a = sol.R,
                            "n_steps"_a = sol.n_steps, "kernel_psd"_a = sol.kernel_psd, "h"_a = h);
        },
        "params"_a, "b"_a, "T"_a = 1.0, "h"_a = 0.05, "x_max"_a = 4.0, "R"_a = 0.0, "K"_a = 0,
        "boundary"_a = "neumann");
    m.def(
        "assemble_f",
        [](double t, const AtomicMeasure& mu, const ModelParams& prm, const std::string& route, double b, double R,
           int K) {
            AssembledValue v;
            {
                py::gil_scoped_release release;
                v = assemble_f(t, mu, prm, route_from_string(route), b, R, K);
            }
            return py::dict("value"_a = v.value, "se"_a = v.se, "shifted"_a = v.shifted, "shift"_a = v.shift,
                            "label"_a = v.label);
        },
        "t"_a, "mu"_a, "params"_a, "route"_a, "b"_a, "R"_a = 0.0, "K"_a = 0);

    m.def(
        "appendix_a_gap",
        [](const ModelParams& prm, int n_disorder, std::uint64_t seed) {
            PoissonBinomialGap gp;
            {
                py::gil_scoped_release release;
                gp = appendix_a_gap(prm, n_disorder, seed);
            }
            return py::dict("gap"_a = gp.gap, "se"_a = gp.se, "f_poisson"_a = gp.f_poisson,
                            "f_binomial"_a = gp.f_binomial);
        },
        "params"_a, "n_disorder"_a = 200, "seed"_a = 0);
}
