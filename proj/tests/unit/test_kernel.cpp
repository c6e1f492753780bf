#include "sbm/kernel.hpp"
#include "sbm/rng.hpp"

#include <doctest.h>

#include <cmath>

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

TEST_CASE("g closed form") {
    auto prm = params(3.0, -1.0);
    CHECK(g(0.0, prm) == doctest::Approx(3.0 * (std::log(3.0) - 1.0)));
    CHECK(g(0.0, prm) == doctest::Approx(0.29584).epsilon(1e-4));
    CHECK(g(1.0, prm) == doctest::Approx(-0.61371).epsilon(1e-4));
}

TEST_CASE("g agrees with its power series") {
    Rng rng = make_rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        const double c = 0.5 + 4.0 * uniform01(rng);
        const double delta = (2.0 * uniform01(rng) - 1.0) * 0.9 * c;
        const double z = 2.0 * uniform01(rng) - 1.0;
        auto prm = params(c, delta);
        // The tail of the series decays like 0.9^50 / 2500 relative to c.
        CHECK(std::abs(g(z, prm) - g_series(z, prm, 50)) <= 1e-6 * c);
        if (std::abs(delta / c) <= 0.5) CHECK(std::abs(g(z, prm) - g_series(z, prm, 50)) <= 1e-10);
    }
}

TEST_CASE("g is convex") {
    Rng rng = make_rng(22);
    for (int rep = 0; rep < 50; ++rep) {
        auto prm = params(3.0, (2.0 * uniform01(rng) - 1.0) * 2.9);
        const double z = 2.0 * uniform01(rng) - 1.0;
        CHECK(g_second(z, prm) > 0.0);
        const double h = 1e-4;
        const double fd = (g(std::min(z + h, 1.0), prm) - g(std::max(z - h, -1.0), prm)) /
                          (std::min(z + h, 1.0) - std::max(z - h, -1.0));
        CHECK(fd == doctest::Approx(g_prime(z, prm)).epsilon(1e-5));
    }
}

TEST_CASE("cone function and C_inf") {
    auto prm = params(3.0, -1.0);
    CHECK(cone_function(AtomicMeasure::zero(), 0.3, prm) == 0.0);
    CHECK(cone_function(AtomicMeasure::dirac(1.0), 0.3, prm) == doctest::Approx(g(0.3, prm)));
    AtomicMeasure sym;
    sym.add(-1.0, 0.5);
    sym.add(1.0, 0.5);
    CHECK(cone_function(sym, 0.7, prm) == doctest::Approx(0.5 * (g(-0.7, prm) + g(0.7, prm))));
    CHECK(c_infinity(AtomicMeasure::zero(), prm) == 0.0);
    CHECK(c_infinity(AtomicMeasure::dirac(1.0), prm) == doctest::Approx(-0.30686).epsilon(1e-4));
}

TEST_CASE("C_inf matches the projected quadratic form on grid measures") {
    auto prm = params(3.0, -1.5);
    Rng rng = make_rng(23);
    for (int K = 0; K <= 3; ++K) {
        DyadicGrid grid(K);
        ShiftedKernel G = shifted_matrix(K, 0.0, prm);
        Eigen::VectorXd x(static_cast<Eigen::Index>(grid.size()));
        for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = uniform01(rng);
        DyadicWeights w{K, std::vector<double>(x.data(), x.data() + x.size())};
        CHECK(c_infinity(measure_from_weights(w), prm) == doctest::Approx(0.5 * x.dot(G.matrix * x)).epsilon(1e-12));
    }
}

TEST_CASE("shifted matrix entries and choose_b") {
    auto prm = params(3.0, -1.0);
    const double b = choose_b(prm);
    CHECK(b == doctest::Approx(2.0 * 3.0 * std::log(3.0) + 3.0 + 1.0));
    ShiftedKernel sk = shifted_matrix(0, b, prm);
    REQUIRE(sk.dim() == 2);
    CHECK(sk.matrix(0, 0) == doctest::Approx((g(1.0, prm) + b) / 4.0));
    CHECK(sk.matrix(0, 1) == doctest::Approx((g(0.0, prm) + b) / 4.0));
    CHECK(sk.matrix(1, 0) == doctest::Approx((g(0.0, prm) + b) / 4.0));
    CHECK(sk.matrix(1, 1) == doctest::Approx((g(0.0, prm) + b) / 4.0));
    CHECK(sk.min_shifted_g > 0.0);
    for (double c : {0.5, 1.0, 3.0, 8.0})
        for (double d : {-0.9, -0.5, 0.5, 0.9}) {
            auto q = params(c, d * c);
            CHECK(shifted_matrix(2, choose_b(q), q).min_shifted_g > 0.0);
        }
}

TEST_CASE("sign structure of the shifted kernel") {
    // For c > 1 and delta < 0 the shifted kernel is indefinite on zero-mass directions.
    auto prm = params(3.0, -1.0);
    CHECK(shifted_matrix(0, choose_b(prm), prm).min_eigenvalue() < -0.1);
    CHECK_FALSE(shifted_matrix(3, choose_b(prm), prm).is_psd());
    // For c < 1 the linear coefficient delta log c is positive and the kernel is PSD.
    auto small = params(0.5, -0.3);
    for (int K = 0; K <= 3; ++K) CHECK(shifted_matrix(K, choose_b(small), small).is_psd());
    auto assort = params(3.0, 2.0);
    CHECK_FALSE(shifted_matrix(2, 0.0, assort).is_psd());
}

TEST_CASE("extended nonlinearity") {
    auto prm = params(0.5, -0.3);
    const double b = choose_b(prm);
    Rng rng = make_rng(24);
    for (int K = 0; K <= 2; ++K) {
        ShiftedKernel sk = shifted_matrix(K, b, prm);
        ExtendedNonlinearity H(sk, 5.0, true);
        const auto n = static_cast<Eigen::Index>(sk.dim());
        CHECK(H(std::vector<double>(n, 0.0)) == doctest::Approx(0.0));
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::VectorXd x0(n);
            for (Eigen::Index k = 0; k < n; ++k) x0[k] = uniform01(rng);
            Eigen::VectorXd y = sk.matrix * x0;
            std::vector<double> yv(y.data(), y.data() + n);
            CHECK(H(yv) == doctest::Approx(0.5 * x0.dot(sk.matrix * x0)).epsilon(1e-8));
            std::vector<double> yp = yv;
            for (auto& v : yp) v += 0.1 * uniform01(rng);
            CHECK(H(yp) >= H(yv) - 1e-10);
            // Lipschitz in the dual norm.
            std::vector<double> diff(n);
            for (Eigen::Index k = 0; k < n; ++k) diff[k] = yp[k] - yv[k];
            CHECK(H(yp) - H(yv) <= H.lipschitz() * norm_l1_dual(diff, K) + 1e-9);
        }
    }
    auto neg = params(3.0, -1.0);
    CHECK_THROWS(ExtendedNonlinearity(shifted_matrix(0, choose_b(neg), neg), 5.0, true));
    CHECK_NOTHROW(ExtendedNonlinearity(shifted_matrix(0, choose_b(neg), neg), 5.0, false));
}
