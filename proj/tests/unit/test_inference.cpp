#include "sbm/inference.hpp"

#include <doctest.h>

#include <cmath>

using namespace sbm;

namespace {

ModelParams params(int N, double c, double delta, double p = 0.5) {
    ModelParams prm;
    prm.N = N;
    prm.c = c;
    prm.delta = delta;
    prm.p = p;
    return prm;
}

Instance empty_instance(int N, double p) {
    auto prm = params(N, 3.0, -1.0, p);
    Rng rng = make_rng(1);
    return assemble_instance(prm, sample_signal(prm, rng), EdgeList{}, std::nullopt, std::nullopt);
}

}  // namespace

TEST_CASE("empty Hamiltonian samples the prior") {
    Instance inst = empty_instance(6, 0.7);
    const double mbar = 0.4;
    CHECK(exact_gibbs(inst, [](const Spins& s) { return double(s[0]); }).value == doctest::Approx(mbar));
    auto two = exact_gibbs_replicas(inst, 2, [](const std::vector<Spins>& r) { return double(r[0][1] * r[1][2]); });
    CHECK(two.value == doctest::Approx(mbar * mbar));
    CHECK(two.std_error == 0.0);
    McmcOptions o;
    o.n_sweeps = 20000;
    o.burn_in = 1000;
    o.seed = 5;
    auto est = mcmc_gibbs(inst, [](const std::vector<Spins>& r) { return double(r[0][3]); }, o);
    CHECK(std::abs(est.value - mbar) <= 3.0 * est.std_error);
    CHECK(est.method == Method::mcmc);
}

TEST_CASE("enumeration cap") {
    Instance inst = empty_instance(6, 0.5);
    CHECK_THROWS(exact_gibbs(inst, [](const Spins&) { return 1.0; }, 5));
    CHECK_THROWS(exact_gibbs_replicas(inst, 2, [](const std::vector<Spins>&) { return 1.0; }, 11));
}

TEST_CASE("Gray-code enumeration matches direct summation") {
    auto prm = params(8, 3.0, -1.5, 0.6);
    Instance inst = sample_instance(prm, 1.0, AtomicMeasure::dirac(0.5, 0.5), PerturbationSpec{}, 4);
    auto lw = enumerate_log_weights(inst);
    for (std::uint64_t idx = 0; idx < lw.size(); idx += 7) {
        Spins s = ExactPosterior::config(idx, 8);
        double lp = 0.0;
        for (auto v : s) lp += std::log(v > 0 ? prm.p : 1.0 - prm.p);
        CHECK(lw[idx] == doctest::Approx(hamiltonian(s, inst) + lp).epsilon(1e-12));
    }
    ExactPosterior post(inst);
    double direct = -1e300;
    for (double v : lw) direct = log_sum_exp(direct, v);
    CHECK(post.log_Z() == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("permutation equivariance") {
    auto prm = params(7, 3.0, -1.5, 0.6);
    Instance inst = sample_instance(prm, 1.0, AtomicMeasure::dirac(-0.5, 0.5), std::nullopt, 8);
    std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
    Spins sig(7);
    for (int i = 0; i < 7; ++i) sig[perm[i]] = inst.signal[i];
    EdgeList el = inst.edges;
    for (auto& e : el.edges) {
        e.i = perm[e.i];
        e.j = perm[e.j];
    }
    ChannelData ch = *inst.channel;
    for (auto& o : ch.obs) o.site = perm[o.site];
    Instance moved = assemble_instance(prm, sig, el, ch, std::nullopt);
    ExactPosterior a(inst), b(moved);
    CHECK(a.log_Z() == doctest::Approx(b.log_Z()).epsilon(1e-12));
    auto ma = a.magnetizations(), mb = b.magnetizations();
    for (int i = 0; i < 7; ++i) CHECK(ma[i] == doctest::Approx(mb[perm[i]]).epsilon(1e-10));
}

TEST_CASE("MCMC matches enumeration on a random instance") {
    auto prm = params(10, 3.0, -1.5);
    Instance inst = sample_instance(prm, 1.0, AtomicMeasure::dirac(0.5, 0.5), std::nullopt, 21);
    ExactPosterior post(inst);
    auto m = post.magnetizations();
    auto C = post.correlations();
    McmcOptions o;
    o.n_sweeps = 40000;
    o.burn_in = 2000;
    o.seed = 3;
    std::vector<std::pair<int, int>> pairs{{0, 1}, {2, 7}, {4, 9}};
    auto mom = mcmc_moments(inst, pairs, o);
    for (int i = 0; i < 10; ++i) {
        const auto& e = mom.magnetization[i];
        CHECK(std::abs(e.value - m[i]) <= 4.0 * e.std_error + 1e-3);
    }
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        const auto& e = mom.pair_correlation[q];
        CHECK(std::abs(e.value - C(pairs[q].first, pairs[q].second)) <= 4.0 * e.std_error + 1e-3);
    }
}

TEST_CASE("heat bath has the exact stationary law on three sites") {
    auto prm = params(3, 1.0, -0.5, 0.7);
    Spins sig{1, -1, 1};
    EdgeList el;
    el.edges = {{0, 1, true}, {1, 2, true}, {0, 2, false}};
    Instance inst = assemble_instance(prm, sig, el, std::nullopt, std::nullopt);
    ExactPosterior post(inst);
    McmcOptions o;
    o.n_sweeps = 1000000;
    o.burn_in = 1000;
    o.seed = 9;
    // Observables are the indicators of each configuration.
    auto est = mcmc_observables(inst, o, 8, [](const std::vector<Spins>& r, std::vector<double>& out) {
        std::size_t idx = 0;
        for (int i = 0; i < 3; ++i)
            if (r[0][i] > 0) idx |= std::size_t{1} << i;
        std::fill(out.begin(), out.end(), 0.0);
        out[idx] = 1.0;
    });
    double tv = 0.0;
    for (int k = 0; k < 8; ++k) tv += 0.5 * std::abs(est[k].value - post.probabilities()[k]);
    CHECK(tv <= 0.01);
}

TEST_CASE("multi-overlaps") {
    Spins a{1, -1, 1, 1}, ones{1, 1, 1, 1};
    CHECK(multi_overlap({&a, &a}) == doctest::Approx(1.0));
    CHECK(multi_overlap({&a, &a, &a, &a}) == doctest::Approx(1.0));
    CHECK(multi_overlap({&ones}) == doctest::Approx(1.0));
    CHECK(multi_overlap({&a}) == doctest::Approx(0.5));
    std::vector<Spins> reps{a, ones};
    CHECK(multi_overlap(reps, {0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("two independent prior replicas have overlap mbar^2") {
    Instance inst = empty_instance(40, 0.7);
    McmcOptions o;
    o.n_sweeps = 4000;
    o.burn_in = 100;
    o.n_replicas = 2;
    o.seed = 4;
    auto est = mcmc_gibbs(inst, [](const std::vector<Spins>& r) { return multi_overlap(r, {0, 1}); }, o);
    CHECK(std::abs(est.value - 0.16) <= 3.0 * est.std_error);
}

TEST_CASE("Nishimori suite at N = 8") {
    auto prm = params(8, 3.0, -1.5, 0.6);
    auto res = nishimori_suite(prm, 1.0, AtomicMeasure::dirac(0.5, 0.5), 300, 17);
    REQUIRE(res.size() == 3);
    for (const auto& r : res) CHECK(r.within(3.0));
}

TEST_CASE("Nishimori identities are exact for the empty Hamiltonian") {
    auto prm = params(6, 3.0, -1.0, 0.7);
    auto res = nishimori_suite(prm, 0.0, AtomicMeasure::zero(), 50, 3);
    for (const auto& r : res) CHECK(r.within(3.0));
}

TEST_CASE("perturbation statistics") {
    auto prm = params(8, 3.0, -1.0);
    Instance inst = sample_instance(prm, 1.0, AtomicMeasure::zero(), PerturbationSpec{}, 5);
    auto st = perturbation_stats(inst, Method::exact, McmcOptions{});
    CHECK(st.Lk.size() == 8);
    CHECK(st.R12_sq >= st.R12 * st.R12 - 1e-12);
    CHECK(std::abs(st.R12) <= 1.0);
    // Exact L_0 average equals the enumeration of the definition.
    auto L0 = exact_gibbs(inst, [&](const Spins& s) { return perturbation_L(s, inst, 0); });
    CHECK(st.L0 == doctest::Approx(L0.value).epsilon(1e-10));
    Instance bare = sample_instance(prm, 1.0, AtomicMeasure::zero(), std::nullopt, 5);
    CHECK_THROWS(perturbation_stats(bare, Method::exact, McmcOptions{}));
}

TEST_CASE("strong Gaussian channel pins the signal") {
    auto prm = params(8, 3.0, -1.0);
    Rng rng = make_rng(6);
    Spins sig = sample_signal(prm, rng);
    PerturbationSpec spec;
    spec.K_plus = 0;
    spec.lambda = {1.0};
    spec.gamma = -1.0 / 16.0;
    PerturbationData pd = sample_perturbation(prm, sig, spec, rng);
    pd.eps_N = 400.0;  // large lambda_{0,N}
    Instance inst = assemble_instance(prm, sig, EdgeList{}, std::nullopt, pd);
    ExactPosterior post(inst);
    auto m = post.magnetizations();
    for (int i = 0; i < 8; ++i) CHECK(m[i] * sig[i] > 0.99);
}

TEST_CASE("Franz-de Sanctis anchor n = 1, f = 1") {
    auto prm = params(8, 3.0, -1.0);
    std::vector<PerturbationStats> stats;
    for (int r = 0; r < 40; ++r)
        stats.push_back(perturbation_stats(sample_instance(prm, 1.0, AtomicMeasure::zero(), PerturbationSpec{}, 50 + r),
                                           Method::exact, McmcOptions{}));
    for (int k = 1; k <= 3; ++k) {
        auto res = franz_de_sanctis_residual(stats, k, 1, FdsFunction::one, 64, 7);
        CHECK(res.within(3.0));
    }
}
