#include "sbm/measures.hpp"
#include "sbm/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace sbm;

namespace {

AtomicMeasure random_measure(Rng& rng, int n_atoms, double mass) {
    AtomicMeasure m;
    std::vector<double> w(n_atoms);
    double s = 0.0;
    for (auto& v : w) s += (v = uniform01(rng) + 0.05);
    for (int a = 0; a < n_atoms; ++a) m.add(2.0 * uniform01(rng) - 1.0, mass * w[a] / s);
    return m;
}

AtomicMeasure random_grid_measure(Rng& rng, int K) {
    DyadicGrid grid(K);
    AtomicMeasure m;
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (uniform01(rng) < 0.5) m.add(grid.point(k), uniform01(rng));
    return m;
}

}  // namespace

TEST_CASE("dyadic grid layout") {
    for (int K = 0; K <= 6; ++K) {
        DyadicGrid grid(K);
        CHECK(grid.size() == (std::size_t{2} << K));
        CHECK(grid.points().front() == -1.0);
        CHECK(grid.points().back() == doctest::Approx(1.0 - std::ldexp(1.0, -K)));
        for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid.point(k) > grid.point(k - 1));
    }
}

TEST_CASE("project_to_dyadic examples") {
    auto x = project_to_dyadic(AtomicMeasure::dirac(0.0), 0);
    REQUIRE(x.x.size() == 2);
    CHECK(x.x[0] == 0.0);
    CHECK(x.x[1] == 2.0);

    auto z = project_to_dyadic(AtomicMeasure::zero(), 3);
    for (double v : z.x) CHECK(v == 0.0);

    AtomicMeasure mu;
    mu.add(-1.0, 0.5);
    mu.add(0.3, 0.5);
    auto y = project_to_dyadic(mu, 2);
    DyadicGrid grid(2);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double expected = grid.point(k) == -1.0 || grid.point(k) == 0.25 ? 4.0 : 0.0;
        CHECK(y.x[k] == doctest::Approx(expected));
    }
    // Atoms at +1 join the last cell.
    auto top = project_to_dyadic(AtomicMeasure::dirac(1.0), 1);
    CHECK(top.x.back() == doctest::Approx(4.0));
}

TEST_CASE("measure_from_weights inverts the projection on grid measures") {
    auto d0 = measure_from_weights({0, {0.0, 2.0}});
    REQUIRE(d0.size() == 1);
    CHECK(d0.atoms()[0].position == 0.0);
    CHECK(d0.atoms()[0].weight == doctest::Approx(1.0));
    CHECK(measure_from_weights({2, std::vector<double>(8, 0.0)}).empty());

    Rng rng = make_rng(11);
    for (int K = 0; K <= 6; ++K)
        for (int rep = 0; rep < 5; ++rep) {
            AtomicMeasure mu = random_grid_measure(rng, K).normal_form();
            AtomicMeasure back = measure_from_weights(project_to_dyadic(mu, K)).normal_form();
            REQUIRE(back.size() == mu.size());
            for (std::size_t a = 0; a < mu.size(); ++a) {
                CHECK(back.atoms()[a].position == mu.atoms()[a].position);
                CHECK(back.atoms()[a].weight == doctest::Approx(mu.atoms()[a].weight).epsilon(1e-12));
            }
        }
}

TEST_CASE("projection preserves mass and moves mass by at most one cell") {
    Rng rng = make_rng(12);
    for (int K = 0; K <= 6; ++K)
        for (int rep = 0; rep < 5; ++rep) {
            AtomicMeasure mu = random_measure(rng, 7, 1.0);
            auto x = project_to_dyadic(mu, K);
            CHECK(norm_l1(x) == doctest::Approx(mu.mass()).epsilon(1e-12));
            auto [mass, bar] = normalize(measure_from_weights(x));
            CHECK(wasserstein(bar, mu) <= std::ldexp(1.0, -K) + 1e-12);
        }
}

TEST_CASE("normalize") {
    auto [m1, n1] = normalize(AtomicMeasure::dirac(0.5, 2.0));
    CHECK(m1 == 2.0);
    CHECK(n1.atoms()[0].weight == doctest::Approx(1.0));
    auto [m0, n0] = normalize(AtomicMeasure::zero());
    CHECK(m0 == 0.0);
    CHECK(n0.empty());
    AtomicMeasure mu;
    mu.add(-1.0, 0.5);
    mu.add(1.0, 0.25);
    auto [m2, n2] = normalize(mu);
    CHECK(m2 == doctest::Approx(0.75));
    CHECK(n2.atoms()[0].weight == doctest::Approx(2.0 / 3.0));
    CHECK(n2.atoms()[1].weight == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("normalized norms") {
    CHECK(norm_l1({0, {0.0, 2.0}}) == doctest::Approx(1.0));
    CHECK(norm_l1_dual({0.5, 0.0}, 0) == doctest::Approx(1.0));
    for (int K = 0; K <= 4; ++K) CHECK(norm_l1({K, std::vector<double>(std::size_t{2} << K, 1.0)}) == doctest::Approx(1.0));
}

TEST_CASE("distances") {
    CHECK(tv_distance(AtomicMeasure::dirac(0.0), AtomicMeasure::dirac(1.0)) == doctest::Approx(1.0));
    CHECK(wasserstein(AtomicMeasure::dirac(-0.3), AtomicMeasure::dirac(0.6)) == doctest::Approx(0.9));
    Rng rng = make_rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        auto a = random_measure(rng, 4, 1.0), b = random_measure(rng, 5, 1.0), c = random_measure(rng, 3, 1.0);
        CHECK(tv_distance(a, a) == doctest::Approx(0.0));
        CHECK(wasserstein(a, a) == doctest::Approx(0.0));
        CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)));
        CHECK(wasserstein(a, b) == doctest::Approx(wasserstein(b, a)));
        CHECK(tv_distance(a, b) >= 0.0);
        CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12);
        CHECK(wasserstein(a, c) <= wasserstein(a, b) + wasserstein(b, c) + 1e-12);
    }
    CHECK_THROWS(wasserstein(AtomicMeasure::dirac(0.0, 2.0), AtomicMeasure::dirac(0.0)));
}

TEST_CASE("mean-preserving binning keeps mass and first moment") {
    Rng rng = make_rng(14);
    for (int K = 0; K <= 6; ++K) {
        AtomicMeasure mu = random_measure(rng, 9, 1.0);
        auto w = bin_mean_preserving(mu, K);
        DyadicGrid grid(K);
        double mass = 0.0, mean = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            CHECK(w[k] >= 0.0);
            mass += w[k];
            mean += w[k] * grid.point(k);
        }
        CHECK(mass == doctest::Approx(1.0));
        // Atoms above the last grid point are clamped, so compare only when none exist.
        bool clamped = false;
        for (const auto& a : mu.atoms()) clamped = clamped || a.position > grid.points().back();
        if (!clamped) CHECK(mean == doctest::Approx(mu.first_moment()).epsilon(1e-12));
    }
}

TEST_CASE("json round trip") {
    AtomicMeasure mu;
    mu.add(-0.5, 0.25);
    mu.add(0.75, 1.5);
    auto back = measure_from_json(to_json(mu));
    REQUIRE(back.size() == 2);
    CHECK(back.atoms()[1].position == 0.75);
    CHECK(back.atoms()[1].weight == 1.5);
}
