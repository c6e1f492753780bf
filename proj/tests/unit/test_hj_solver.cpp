#include "sbm/hj_solver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace sbm;

namespace {

ModelParams params(double c, double delta, double p = 0.5) {
    ModelParams prm;
    prm.c = c;
    prm.delta = delta;
    prm.p = p;
    return prm;
}

HJGridSpec small_spec() {
    HJGridSpec s;
    s.params = params(3.0, -1.0);
    s.K = 0;
    s.b = choose_b(s.params);
    s.x_max = 1.0;
    s.h = 0.125;
    s.T = 0.05;
    return s;
}

}  // namespace

TEST_CASE("spec validation lists every violation") {
    HJGridSpec s = small_spec();
    CHECK(s.violations().empty());
    s.K = 2;
    s.h = -1.0;
    s.params.delta = 1.0;
    CHECK(s.violations().size() >= 3);
    CHECK_THROWS(solve_grid(s, [](const std::vector<double>&) { return 0.0; }));
}

TEST_CASE("explicit time step above the CFL bound is refused") {
    HJGridSpec s = small_spec();
    s.tau = 2.0 * cfl_time_step(s);
    s.T = s.tau * 4;
    CHECK_THROWS_AS(solve_grid(s, [](const std::vector<double>&) { return 0.0; }), CflViolation);
}

TEST_CASE("constant data stays constant") {
    HJGridSpec s = small_spec();
    auto sol = solve_grid(s, [](const std::vector<double>&) { return 1.5; });
    for (double v : sol.slices.back()) CHECK(v == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(sol.times.back() == doctest::Approx(s.T));
}

TEST_CASE("affine data is transported exactly") {
    HJGridSpec s = small_spec();
    s.boundary = Boundary::extrapolate;
    const std::vector<double> a{0.3, -0.2};
    auto f0 = [&](const std::vector<double>& x) { return 0.7 + a[0] * x[0] + a[1] * x[1]; };
    auto sol = solve_grid(s, f0);
    ExtendedNonlinearity H(shifted_matrix(0, s.b, s.params), sol.R);
    // Gradient in x coordinates; the nonlinearity takes it directly.
    const double rate = H(a);
    for (std::size_t i = 0; i < sol.node_count(); ++i)
        CHECK(sol.slices.back()[i] == doctest::Approx(f0(sol.node(i)) + s.T * rate).epsilon(1e-12));
}

TEST_CASE("discrete comparison principle") {
    HJGridSpec s = small_spec();
    auto u0 = [](const std::vector<double>& x) { return std::sin(3 * x[0]) - x[1]; };
    auto v0 = [&](const std::vector<double>& x) { return u0(x) + 0.1 + 0.2 * x[0] * x[1]; };
    auto u = solve_grid(s, u0), v = solve_grid(s, v0);
    for (std::size_t k = 0; k < u.slices.size(); ++k)
        for (std::size_t i = 0; i < u.node_count(); ++i) CHECK(u.slices[k][i] <= v.slices[k][i]);
}

TEST_CASE("grid solutions do not depend on R above the threshold") {
    HJGridSpec s = small_spec();
    const double R0 = hj_radius_threshold(s.params, s.b);
    HJGridSpec s2 = s;
    s2.R = 2 * R0;
    s.R = R0;
    s.tau = s2.tau = cfl_time_step(s2) > 0 ? s.T / std::ceil(s.T / cfl_time_step(s2)) : 0.0;
    auto f0 = shifted_initial_condition(s.params, 0, s.b);
    auto a = solve_grid(s, f0), b = solve_grid(s2, f0);
    for (std::size_t i = 0; i < a.node_count(); ++i)
        CHECK(std::abs(a.slices.back()[i] - b.slices.back()[i]) <= 1e-10);
}

TEST_CASE("interpolation and CSV export") {
    HJGridSpec s = small_spec();
    auto sol = solve_grid(s, [](const std::vector<double>& x) { return x[0] + 2 * x[1]; });
    CHECK(sol.value_at({0.0625, 0.5}, 0) == doctest::Approx(1.0625));
    std::ostringstream os;
    sol.write_csv(os);
    CHECK(os.str().rfind("t,x0,x1,value", 0) == 0);
}

TEST_CASE("shifted initial condition at the origin") {
    auto prm = params(3.0, -1.0);
    auto f0 = shifted_initial_condition(prm, 0, 2.0);
    CHECK(f0({0.0, 0.0}) == doctest::Approx(0.0));
    // x = (0, 2) is the unit mass at the origin.
    CHECK(f0({0.0, 2.0}) == doctest::Approx(3 * std::log(3.0) - 3 + 2.0).epsilon(1e-10));
}

TEST_CASE("Hopf-Lax and characteristics at t = 0 return psi") {
    auto prm = params(3.0, -1.0);
    AtomicMeasure mu({{-0.5, 0.5}, {0.5, 0.25}});
    const double ex = psi_exact(mu, prm);
    HopfLaxOptions ho;
    ho.K = 3;
    CHECK(hopf_lax(0.0, mu, prm, ho).value == doctest::Approx(ex));
    FixedPointOptions fo;
    fo.K = 3;
    fo.n_samples = 10000;
    auto ch = characteristics_solve(0.0, mu, prm, 100000, fo);
    CHECK(ch.value == doctest::Approx(ex));
}

TEST_CASE("assembly at mu = 0 removes only b t / 2") {
    auto prm = params(3.0, -1.0);
    HopfLaxOptions ho;
    AssembleOptions ao;
    auto v = assemble_f(0.0, AtomicMeasure::zero(), prm, Route::hopf_lax, 4.0, 0.0, 2, ao);
    CHECK(v.shift == doctest::Approx(0.0));
    CHECK(v.value == doctest::Approx(0.0));
    ao.hopf_lax.optimizer.max_iter = 5;
    ao.hopf_lax.optimizer.n_grad = 5000;
    ao.hopf_lax.optimizer.n_value = 5000;
    ao.hopf_lax.optimizer.n_final = 5000;
    ao.hopf_lax.optimizer.include_fixed_point_start = false;
    auto w = assemble_f(0.5, AtomicMeasure::zero(), prm, Route::hopf_lax, 4.0, 0.0, 1, ao);
    CHECK(w.shift == doctest::Approx(1.0));
    CHECK(w.shifted - w.value == doctest::Approx(1.0));
}

TEST_CASE("Hopf-Lax value is nondecreasing in t") {
    auto prm = params(3.0, -1.0);
    HopfLaxOptions ho;
    ho.K = 2;
    ho.optimizer.max_iter = 40;
    ho.optimizer.n_grad = 20000;
    ho.optimizer.n_value = 40000;
    ho.optimizer.n_final = 200000;
    ho.optimizer.include_fixed_point_start = false;
    double prev = -1e300;
    for (double t : {0.0, 0.5, 1.0}) {
        auto r = hopf_lax(t, AtomicMeasure::zero(), prm, ho);
        CHECK(r.value >= prev - 3.0 * r.se - 1e-3);
        prev = r.value;
    }
}

TEST_CASE("route names") {
    CHECK(route_from_string("grid") == Route::grid);
    CHECK(to_string(Route::characteristics) == "characteristics");
    CHECK_THROWS(route_from_string("bogus"));
}
