#include "sbm/limit_functionals.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace sbm;

namespace {

ModelParams params(double c, double delta, double p = 0.5) {
    ModelParams prm;
    prm.c = c;
    prm.delta = delta;
    prm.p = p;
    return prm;
}

}  // namespace

TEST_CASE("psi at simple measures") {
    auto prm = params(3.0, -1.0, 0.7);
    CHECK(psi(AtomicMeasure::zero(), prm, 1000, 1).value == doctest::Approx(0.0));
    CHECK(psi_exact(AtomicMeasure::zero(), prm) == doctest::Approx(0.0));
    // A unit atom at the origin: psi = E[N log c] - c with N ~ Poi(c).
    CHECK(psi_exact(AtomicMeasure::dirac(0.0), prm) == doctest::Approx(3.0 * std::log(3.0) - 3.0).epsilon(1e-10));
    auto mc = psi(AtomicMeasure::dirac(0.0), prm, 20000, 2);
    CHECK(mc.value == doctest::Approx(3.0 * std::log(3.0) - 3.0).epsilon(1e-10));
}

TEST_CASE("exact psi agrees with Monte Carlo") {
    auto prm = params(3.0, -1.5, 0.6);
    for (const auto& mu : {AtomicMeasure::dirac(-1.0), AtomicMeasure({{-0.5, 0.7}, {0.25, 0.4}}),
                           AtomicMeasure({{-1.0, 0.5}, {0.0, 0.2}, {1.0, 0.5}})}) {
        const double ex = psi_exact(mu, prm);
        auto mc = psi(mu, prm, 400000, 3);
        CHECK(std::abs(ex - mc.value) <= 4.0 * mc.se + 1e-12);
    }
    CHECK_THROWS(psi_exact(AtomicMeasure({{-1.0, 0.1}, {-0.5, 0.1}, {0.5, 0.1}, {1.0, 0.1}}), prm));
}

TEST_CASE("single-site helpers") {
    auto prm = params(3.0, -1.0, 0.5);
    CHECK(single_site_log_integral(prm, 0.0, 0.0, 0.0) == doctest::Approx(0.0));
    CHECK(single_site_mean(prm, 0.0, 0.0, 0.0) == doctest::Approx(0.0));
    CHECK(single_site_mean(params(3.0, -1.0, 0.8), 0.0, 0.0, 0.0) == doctest::Approx(0.6));
    CHECK(single_site_mean(prm, 0.0, 5.0, 0.0) == doctest::Approx(std::tanh(2.5)));
}

TEST_CASE("Gamma of the zero measure is a point mass at mbar") {
    auto prm = params(3.0, -1.0, 0.7);
    auto gs = gamma_samples(AtomicMeasure::zero(), prm, 1000, 4);
    for (double m : gs.m) CHECK(m == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(std::accumulate(gs.weight.begin(), gs.weight.end(), 0.0) == doctest::Approx(1.0));
    auto g = gamma_map(AtomicMeasure::zero(), prm, 100, 5).normal_form();
    REQUIRE(g.size() == 1);
    CHECK(g.atoms()[0].position == doctest::Approx(0.4));
}

TEST_CASE("Gamma preserves the prior mean") {
    auto prm = params(3.0, -1.5, 0.7);
    AtomicMeasure mu({{-0.5, 0.7}, {0.75, 0.6}});
    auto gs = gamma_samples(mu, prm, 200000, 6);
    double mean = 0.0;
    for (std::size_t i = 0; i < gs.m.size(); ++i) mean += gs.weight[i] * gs.m[i];
    CHECK(mean == doctest::Approx(0.4).epsilon(0.01));
    auto binned = gamma_map_binned(mu, prm, 200000, 4, 6);
    CHECK(binned.mass() == doctest::Approx(1.0));
    CHECK(binned.mean() == doctest::Approx(0.4).epsilon(0.01));
}

TEST_CASE("strong observations concentrate Gamma near the signal") {
    auto prm = params(3.0, -2.0, 0.5);
    auto gs = gamma_samples(AtomicMeasure::dirac(-1.0, 40.0), prm, 2000, 7);
    double abs_mean = 0.0;
    for (std::size_t i = 0; i < gs.m.size(); ++i) abs_mean += gs.weight[i] * std::abs(gs.m[i]);
    CHECK(abs_mean > 0.999);
}

TEST_CASE("fixed point at t = 0 is Gamma(mu)") {
    auto prm = params(3.0, -1.0, 0.7);
    FixedPointOptions o;
    o.K = 4;
    o.n_samples = 20000;
    auto rep = fixed_point(0.0, AtomicMeasure::zero(), prm, o);
    REQUIRE(!rep.runs.empty());
    for (const auto& r : rep.runs) {
        CHECK(r.converged);
        CHECK(r.nu.mean() == doctest::Approx(0.4));
    }
    CHECK(rep.distinct.size() == 1);
}

TEST_CASE("fixed point at delta = 0 is the prior mean") {
    auto prm = params(3.0, 0.0, 0.7);
    FixedPointOptions o;
    o.K = 4;
    o.n_samples = 20000;
    auto rep = fixed_point(1.0, AtomicMeasure::zero(), prm, o);
    CHECK(rep.distinct.size() == 1);
    const auto& nu = rep.runs[rep.distinct[0]].nu;
    CHECK(nu.mean() == doctest::Approx(0.4));
    // 0.4 lies between two points of D_4, so binning costs at most one spacing.
    CHECK(wasserstein(nu, AtomicMeasure::dirac(0.4)) <= 1.0 / 16.0);
}

TEST_CASE("pair entropy and Parisi functional at a point mass") {
    auto prm = params(3.0, -1.0);
    CHECK(pair_entropy(AtomicMeasure::dirac(0.0), prm) == doctest::Approx(3.0 * std::log(3.0)));
    CHECK(xlogx_kernel(1.0, prm) == doctest::Approx(2.0 * std::log(2.0)));
    auto par = parisi(AtomicMeasure::dirac(0.0), prm, 10000, 8);
    CHECK(par.value == doctest::Approx((3.0 * std::log(3.0) - 3.0) / 2.0).epsilon(1e-10));
    CHECK_THROWS(parisi(AtomicMeasure::dirac(0.0, 0.5), prm, 100, 1));
}

TEST_CASE("projections") {
    auto s = project_simplex({0.5, 0.5, 0.5});
    for (double v : s) CHECK(v == doctest::Approx(1.0 / 3.0));
    auto t = project_simplex({2.0, 0.0, -1.0});
    CHECK(t[0] == doctest::Approx(1.0));
    CHECK(t[1] == doctest::Approx(0.0));
    std::vector<double> k{-1.0, -0.5, 0.0, 0.5};
    auto m = project_mean_slice({0.3, 0.1, 0.4, 0.9}, k, 0.1);
    double mass = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        CHECK(m[i] >= 0.0);
        mass += m[i];
        mean += m[i] * k[i];
    }
    CHECK(mass == doctest::Approx(1.0));
    CHECK(mean == doctest::Approx(0.1).epsilon(1e-8));
    // A feasible point is its own projection.
    std::vector<double> f{0.25, 0.25, 0.25, 0.25};
    auto pf = project_mean_slice(f, k, -0.25);
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(pf[i] == doctest::Approx(0.25));
    CHECK_THROWS(project_mean_slice(f, k, 0.9));
}

TEST_CASE("Gateaux density at mu = 0") {
    auto prm = params(3.0, -1.0, 0.7);
    for (double x : {-1.0, 0.0, 0.5}) {
        auto d = psi_gateaux_density(AtomicMeasure::zero(), x, prm, 2000, 9);
        // No observations: the posterior mean is mbar under either sign.
        const double w = 3.0 - 0.4 * x;
        CHECK(d.value == doctest::Approx(w * std::log(w) - 3.0 + 0.4 * x));
    }
}

TEST_CASE("Gateaux density matches a finite difference of exact psi") {
    auto prm = params(3.0, -1.5, 0.6);
    AtomicMeasure mu({{-0.5, 0.6}, {0.5, 0.3}});
    const double x = 0.5, eps = 1e-5;
    const double fd = (psi_exact(mu + AtomicMeasure::dirac(x, eps), prm) - psi_exact(mu, prm)) / eps;
    auto d = psi_gateaux_density(mu, x, prm, 400000, 10);
    CHECK(std::abs(fd - d.value) <= 4.0 * d.se + 1e-3);
}

TEST_CASE("standard starts are probability vectors") {
    for (const auto& [name, w] : standard_starts(3, 0.3)) {
        DyadicGrid grid(3);
        double mass = 0.0, mean = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            CHECK(w[i] >= 0.0);
            mass += w[i];
            mean += w[i] * grid.point(i);
        }
        CHECK(mass == doctest::Approx(1.0));
        if (name == "delta_mbar") CHECK(mean == doctest::Approx(0.3).epsilon(1e-9));
    }
}

TEST_CASE("Parisi optimizer below threshold collapses to the origin") {
    auto prm = params(3.0, -0.5);
    OptimizerOptions o;
    o.K = 3;
    o.max_iter = 30;
    o.n_grad = 20000;
    o.n_value = 40000;
    o.n_final = 100000;
    o.include_fixed_point_start = false;
    auto r = optimize_parisi(prm, o);
    CHECK(r.value == doctest::Approx((3.0 * std::log(3.0) - 3.0) / 2.0).epsilon(0.01));
    CHECK(wasserstein(r.optimizer, AtomicMeasure::dirac(0.0)) <= 0.05);
    CHECK(r.label == "proven");
}
