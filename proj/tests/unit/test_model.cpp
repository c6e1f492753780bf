#include "sbm/model.hpp"
#include "sbm/stats.hpp"

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

Spins random_spins(int N, Rng& rng) {
    Spins s(N);
    for (auto& v : s) v = bernoulli(rng, 0.5) ? 1 : -1;
    return s;
}

// Independent oracle: sum of log-likelihood terms in reverse order.
double oracle_hamiltonian(const Spins& s, const Instance& inst) {
    const auto& prm = inst.params;
    double H = 0.0;
    for (auto it = inst.edges.edges.rbegin(); it != inst.edges.edges.rend(); ++it) {
        const double w = (prm.c + prm.delta * s[it->i] * s[it->j]) / prm.N;
        H += it->observed ? std::log(w * prm.N) : std::log(1.0 - w);
    }
    if (inst.channel)
        for (auto it = inst.channel->obs.rbegin(); it != inst.channel->obs.rend(); ++it) {
            const double w = (prm.c + prm.delta * s[it->site] * it->x) / prm.N;
            H += it->observed ? std::log(w * prm.N) : std::log(1.0 - w);
        }
    if (inst.perturbation) {
        const auto& pd = *inst.perturbation;
        const double l0 = pd.lambda0_N();
        for (int i = 0; i < prm.N; ++i)
            H += l0 * inst.signal[i] * s[i] + std::sqrt(l0) * pd.Z0[i] * s[i];
        for (int k = 1; k <= pd.K_plus(); ++k) {
            const double lk = pd.lambda[k];
            for (const auto& o : pd.channels[k - 1])
                H += std::log(1.0 + lk * s[o.site]) - lk * o.e * s[o.site] / (1.0 + lk * inst.signal[o.site]);
        }
    }
    return H;
}

Spins with_site(Spins s, int i, int v) {
    s[i] = static_cast<std::int8_t>(v);
    return s;
}

}  // namespace

TEST_CASE("empty instance") {
    auto prm = params(6, 3.0, -1.0);
    Instance inst = sample_instance(prm, 0.0, AtomicMeasure::zero(), std::nullopt, 1);
    CHECK(inst.edges.edges.empty());
    CHECK((!inst.channel || inst.channel->obs.empty()));
    Rng rng = make_rng(2);
    for (int rep = 0; rep < 5; ++rep) CHECK(hamiltonian(random_spins(6, rng), inst) == 0.0);
}

TEST_CASE("sampling preconditions") {
    CHECK_THROWS(sample_instance(params(1, 0.5, 0.0), 1.0, AtomicMeasure::zero(), std::nullopt, 1));
    CHECK_THROWS(sample_instance(params(4, 3.0, -1.5), 1.0, AtomicMeasure::zero(), std::nullopt, 1));
    CHECK_THROWS(sample_instance(params(8, 3.0, -1.0), 1.0, AtomicMeasure::dirac(0.5, -1.0), std::nullopt, 1));
}

TEST_CASE("Poisson edge count and edge density") {
    auto prm = params(10, 3.0, 0.0);
    RunningStats count, density;
    for (int rep = 0; rep < 10000; ++rep) {
        Instance inst = sample_instance(prm, 1.0, AtomicMeasure::zero(), std::nullopt, 100 + rep);
        count.add(static_cast<double>(inst.edges.edges.size()));
        for (const auto& e : inst.edges.edges) density.add(e.observed ? 1.0 : 0.0);
    }
    CHECK(std::abs(count.mean() - 45.0) <= 4.0 * count.std_error());
    const double q = 3.0 / 10.0;
    const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(density.count()));
    CHECK(std::abs(density.mean() - q) <= 3.0 * se);
}

TEST_CASE("seeded determinism") {
    auto prm = params(12, 3.0, -1.5, 0.6);
    AtomicMeasure mu;
    mu.add(0.5, 0.7);
    mu.add(-0.25, 0.3);
    Instance a = sample_instance(prm, 1.0, mu, PerturbationSpec{}, 77);
    Instance b = sample_instance(prm, 1.0, mu, PerturbationSpec{}, 77);
    CHECK(a.signal == b.signal);
    REQUIRE(a.edges.edges.size() == b.edges.edges.size());
    for (std::size_t k = 0; k < a.edges.edges.size(); ++k) {
        CHECK(a.edges.edges[k].i == b.edges.edges[k].i);
        CHECK(a.edges.edges[k].observed == b.edges.edges[k].observed);
    }
    CHECK(a.ising.h == b.ising.h);
    CHECK(a.ising.J == b.ising.J);
    CHECK(a.perturbation->Z0 == b.perturbation->Z0);
    CHECK(instance_envelope(a) == instance_envelope(b));
}

TEST_CASE("single Poisson edge") {
    auto prm = params(5, 3.0, -1.0);
    Spins sig{1, -1, 1, 1, -1};
    EdgeList el;
    el.mode = EdgeList::Mode::poisson;
    el.t = 1.0;
    el.edges.push_back({0, 1, true});
    Instance inst = assemble_instance(prm, sig, el, std::nullopt, std::nullopt);
    CHECK(hamiltonian(Spins{1, 1, 1, 1, 1}, inst) == doctest::Approx(std::log(2.0)));
    CHECK(hamiltonian(Spins{1, -1, 1, 1, 1}, inst) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("original Hamiltonian") {
    auto prm = params(6, 2.0, 0.0);
    Rng rng = make_rng(3);
    EdgeList el;
    el.mode = EdgeList::Mode::binomial;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) el.edges.push_back({i, j, false});
    const double expected = 15.0 * std::log(1.0 - 2.0 / 6.0);
    for (int rep = 0; rep < 5; ++rep) CHECK(hamiltonian_original(random_spins(6, rng), prm, el) == doctest::Approx(expected));

    EdgeList hand;
    hand.mode = EdgeList::Mode::binomial;
    hand.edges = {{0, 1, true}, {0, 2, false}, {1, 2, true}};
    Spins s{1, -1, -1};
    // Products s_i s_j are -1, -1, +1.
    auto r = params(8, 3.0, -1.0);
    const double hand_sum = std::log(4.0) + std::log(1.0 - 4.0 / 8.0) + std::log(2.0);
    CHECK(hamiltonian_original(s, r, hand) == doctest::Approx(hand_sum));
}

TEST_CASE("Hamiltonian matches term-by-term oracle and compiled form") {
    auto prm = params(8, 3.0, -1.5, 0.7);
    AtomicMeasure mu;
    mu.add(0.5, 0.4);
    mu.add(-1.0, 0.6);
    Rng rng = make_rng(4);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Instance inst = sample_instance(prm, 1.0, mu, PerturbationSpec{}, seed);
        for (int rep = 0; rep < 10; ++rep) {
            Spins s = random_spins(8, rng);
            CHECK(hamiltonian(s, inst) == doctest::Approx(oracle_hamiltonian(s, inst)).epsilon(1e-12));
            CHECK(inst.ising.energy(s) == doctest::Approx(hamiltonian(s, inst)).epsilon(1e-12));
        }
    }
}

TEST_CASE("local field matches the brute-force difference") {
    auto prm = params(8, 3.0, -1.5);
    AtomicMeasure mu = AtomicMeasure::dirac(0.5, 0.5);
    Rng rng = make_rng(5);
    Instance inst = sample_instance(prm, 1.0, mu, PerturbationSpec{}, 9);
    for (int rep = 0; rep < 5; ++rep) {
        Spins s = random_spins(8, rng);
        for (int i = 0; i < 8; ++i) {
            const double brute = hamiltonian(with_site(s, i, 1), inst) - hamiltonian(with_site(s, i, -1), inst);
            CHECK(local_field(i, s, inst) == doctest::Approx(brute).epsilon(1e-10));
        }
    }
}

TEST_CASE("local field with the Gaussian perturbation only") {
    auto prm = params(6, 3.0, -1.0);
    Rng rng = make_rng(6);
    Spins sig = random_spins(6, rng);
    PerturbationSpec spec;
    spec.K_plus = 0;
    spec.lambda = {0.75};
    PerturbationData pd = sample_perturbation(prm, sig, spec, rng);
    EdgeList el;
    Instance inst = assemble_instance(prm, sig, el, std::nullopt, pd);
    const double l0 = pd.lambda0_N();
    Spins s = random_spins(6, rng);
    for (int i = 0; i < 6; ++i)
        CHECK(local_field(i, s, inst) == doctest::Approx(2.0 * (l0 * sig[i] + std::sqrt(l0) * pd.Z0[i])));
    // An isolated site without perturbation has zero field.
    Instance bare = assemble_instance(prm, sig, el, std::nullopt, std::nullopt);
    CHECK(local_field(2, s, bare) == 0.0);
}

TEST_CASE("perturbation parameters") {
    auto prm = params(64, 3.0, -1.5);
    Rng rng = make_rng(7);
    Spins sig = random_spins(64, rng);
    PerturbationData pd = sample_perturbation(prm, sig, PerturbationSpec{}, rng);
    CHECK(pd.K_plus() == 8);
    CHECK(pd.eps_N == doctest::Approx(std::pow(64.0, -1.0 / 16.0)));
    CHECK(pd.s_N == doctest::Approx(std::pow(64.0, 0.9)));
    for (int k = 0; k <= 8; ++k) {
        CHECK(pd.lambda[k] >= std::ldexp(1.0, -k - 1));
        CHECK(pd.lambda[k] <= std::ldexp(1.0, -k));
    }
    PerturbationSpec bad;
    bad.gamma = -0.2;
    bad.eta = 1.1;
    CHECK(bad.violations().size() == 2);
}

TEST_CASE("delta = 0 Hamiltonian does not depend on the configuration") {
    auto prm = params(10, 2.0, 0.0);
    Instance inst = sample_instance(prm, 1.0, AtomicMeasure::dirac(0.3, 0.5), std::nullopt, 12);
    Rng rng = make_rng(8);
    const double ref = hamiltonian(random_spins(10, rng), inst);
    for (int rep = 0; rep < 20; ++rep) CHECK(hamiltonian(random_spins(10, rng), inst) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("sign flip symmetry at p = 1/2") {
    // The law of H(s) and H(-s) agree over instances when p = 1/2.
    auto prm = params(8, 3.0, -1.5);
    RunningStats diff;
    Spins s{1, 1, -1, 1, -1, -1, 1, 1}, flipped(8);
    for (int i = 0; i < 8; ++i) flipped[i] = static_cast<std::int8_t>(-s[i]);
    for (int rep = 0; rep < 4000; ++rep) {
        Instance inst = sample_instance(prm, 1.0, AtomicMeasure::zero(), std::nullopt, 1000 + rep);
        diff.add(hamiltonian(s, inst) - hamiltonian(flipped, inst));
    }
    CHECK(std::abs(diff.mean()) <= 4.0 * diff.std_error());
}
