#include "sbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbm {

std::vector<std::string> PerturbationSpec::violations() const {
    std::vector<std::string> out;
    if (!(gamma > -0.125 && gamma < 0.0)) out.push_back("gamma must lie in (-1/8, 0)");
    if (!(eta > 0.8 && eta < 1.0)) out.push_back("eta must lie in (4/5, 1)");
    if (K_plus < 0) out.push_back("K_plus must be non-negative");
    if (!lambda.empty()) {
        if (static_cast<int>(lambda.size()) != K_plus + 1)
            out.push_back("lambda must have K_plus + 1 entries");
        for (std::size_t k = 0; k < lambda.size(); ++k) {
            double lo = std::ldexp(1.0, -static_cast<int>(k) - 1), hi = std::ldexp(1.0, -static_cast<int>(k));
            if (!(lambda[k] >= lo && lambda[k] <= hi))
                out.push_back("lambda_" + std::to_string(k) + " outside [2^-(k+1), 2^-k]");
        }
    }
    return out;
}

double CompiledIsing::energy(const Spins& s) const {
    double e = constant;
    for (int i = 0; i < N; ++i) {
        e += h[i] * s[i];
        const double* row = &J[static_cast<std::size_t>(i) * N];
        double acc = 0.0;
        for (int j = i + 1; j < N; ++j) acc += row[j] * s[j];
        e += s[i] * acc;
    }
    return e;
}

double observation_term(const ModelParams& prm, double z, bool observed) {
    const double a = prm.c + prm.delta * z;
    return observed ? std::log(a) : std::log1p(-a / prm.N);
}

Spins sample_signal(const ModelParams& prm, Rng& rng) {
    Spins s(prm.N);
    for (auto& v : s) v = bernoulli(rng, prm.p) ? 1 : -1;
    return s;
}

Edge draw_poisson_edge(const ModelParams& prm, const Spins& signal, Rng& rng) {
    std::uniform_int_distribution<int> site(0, prm.N - 1);
    Edge e;
    e.i = site(rng);
    e.j = site(rng);
    const double prob = (prm.c + prm.delta * signal[e.i] * signal[e.j]) / prm.N;
    e.observed = bernoulli(rng, prob);
    return e;
}

Observation draw_observation(const ModelParams& prm, const Spins& signal, int site, double x, Rng& rng) {
    Observation o;
    o.site = site;
    o.x = x;
    o.observed = bernoulli(rng, (prm.c + prm.delta * signal[site] * x) / prm.N);
    return o;
}

EdgeList sample_binomial_edges(const ModelParams& prm, const Spins& signal, Rng& rng) {
    EdgeList el;
    el.mode = EdgeList::Mode::binomial;
    el.t = 1.0;
    el.edges.reserve(static_cast<std::size_t>(prm.N) * (prm.N - 1) / 2);
    for (int i = 0; i < prm.N; ++i)
        for (int j = i + 1; j < prm.N; ++j) {
            const double prob = (prm.c + prm.delta * signal[i] * signal[j]) / prm.N;
            el.edges.push_back({i, j, bernoulli(rng, prob)});
        }
    return el;
}

PerturbationData sample_perturbation(const ModelParams& prm, const Spins& signal, const PerturbationSpec& spec,
                                     Rng& rng) {
    (void)signal;
    auto bad = spec.violations();
    if (!bad.empty()) throw std::invalid_argument(bad.front());
    PerturbationData pd;
    pd.gamma = spec.gamma;
    pd.eta = spec.eta;
    pd.eps_N = std::pow(static_cast<double>(prm.N), spec.gamma);
    pd.s_N = std::pow(static_cast<double>(prm.N), spec.eta);
    pd.lambda = spec.lambda;
    if (pd.lambda.empty()) {
        for (int k = 0; k <= spec.K_plus; ++k) {
            double lo = std::ldexp(1.0, -k - 1), hi = std::ldexp(1.0, -k);
            pd.lambda.push_back(lo + (hi - lo) * uniform01(rng));
        }
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    pd.Z0.resize(prm.N);
    for (auto& z : pd.Z0) z = normal(rng);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_int_distribution<int> site(0, prm.N - 1);
    pd.channels.resize(spec.K_plus);
    for (int k = 1; k <= spec.K_plus; ++k) {
        long count = poisson(rng, pd.s_N);
        auto& ch = pd.channels[k - 1];
        ch.reserve(count);
        for (long j = 0; j < count; ++j) {
            ExpObservation o;
            o.site = site(rng);
            o.e = expo(rng);
            ch.push_back(o);
        }
    }
    return pd;
}

TypeSampler::TypeSampler(const AtomicMeasure& mu) {
    double acc = 0.0;
    for (const auto& a : mu.atoms()) {
        if (a.weight <= 0.0) continue;
        acc += a.weight;
        cdf_.push_back(acc);
        pos_.push_back(a.position);
    }
    for (auto& v : cdf_) v /= acc;
}

double TypeSampler::operator()(Rng& rng) const {
    if (pos_.size() == 1) return pos_[0];
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), pos_.size() - 1);
    return pos_[k];
}

Instance sample_instance(const ModelParams& prm, double t, const AtomicMeasure& mu,
                         const std::optional<PerturbationSpec>& perturb, std::uint64_t seed) {
    prm.validate_finite();
    if (t < 0.0) throw std::invalid_argument("t must be non-negative");
    for (const auto& a : mu.atoms())
        if (a.weight < 0.0) throw std::invalid_argument("measure has a negative weight");
    Rng rng = make_rng(seed);
    Spins signal = sample_signal(prm, rng);

    EdgeList edges;
    edges.mode = EdgeList::Mode::poisson;
    edges.t = t;
    const double pairs = 0.5 * prm.N * (prm.N - 1.0);
    long count = poisson(rng, t * pairs);
    edges.edges.reserve(count);
    for (long k = 0; k < count; ++k) edges.edges.push_back(draw_poisson_edge(prm, signal, rng));

    std::optional<ChannelData> channel;
    const double s = mu.mass();
    if (s > 0.0) {
        ChannelData ch;
        ch.s = s;
        TypeSampler types(mu);
        for (int i = 0; i < prm.N; ++i) {
            long ni = poisson(rng, s * prm.N);
            for (long k = 0; k < ni; ++k) ch.obs.push_back(draw_observation(prm, signal, i, types(rng), rng));
        }
        channel = std::move(ch);
    }

    std::optional<PerturbationData> pd;
    if (perturb) pd = sample_perturbation(prm, signal, *perturb, rng);

    Instance inst = assemble_instance(prm, std::move(signal), std::move(edges), std::move(channel), std::move(pd), seed);
    inst.t = t;
    inst.mu = mu;
    return inst;
}

Instance assemble_instance(const ModelParams& prm, Spins signal, EdgeList edges,
                           std::optional<ChannelData> channel, std::optional<PerturbationData> perturbation,
                           std::uint64_t seed) {
    Instance inst;
    inst.params = prm;
    inst.signal = std::move(signal);
    inst.t = edges.t;
    inst.edges = std::move(edges);
    inst.channel = std::move(channel);
    inst.perturbation = std::move(perturbation);
    inst.seed = seed;
    inst.ising = compile(inst);
    return inst;
}

CompiledIsing compile(const Instance& inst) {
    const ModelParams& prm = inst.params;
    const int N = prm.N;
    CompiledIsing ci;
    ci.N = N;
    ci.h.assign(N, 0.0);
    ci.J.assign(static_cast<std::size_t>(N) * N, 0.0);
    // A term f(z) with z in {-1, +1} equals (f(+1) + f(-1))/2 + z (f(+1) - f(-1))/2.
    const double t_plus[2] = {observation_term(prm, 1.0, false), observation_term(prm, 1.0, true)};
    const double t_minus[2] = {observation_term(prm, -1.0, false), observation_term(prm, -1.0, true)};
    for (const auto& e : inst.edges.edges) {
        const int o = e.observed ? 1 : 0;
        if (e.i == e.j) {
            ci.constant += t_plus[o];
            continue;
        }
        ci.constant += 0.5 * (t_plus[o] + t_minus[o]);
        const double B = 0.5 * (t_plus[o] - t_minus[o]);
        ci.J[static_cast<std::size_t>(e.i) * N + e.j] += B;
        ci.J[static_cast<std::size_t>(e.j) * N + e.i] += B;
    }
    if (inst.channel) {
        for (const auto& ob : inst.channel->obs) {
            const double fp = observation_term(prm, ob.x, ob.observed);
            const double fm = observation_term(prm, -ob.x, ob.observed);
            ci.constant += 0.5 * (fp + fm);
            ci.h[ob.site] += 0.5 * (fp - fm);
        }
    }
    if (inst.perturbation) {
        const auto& pd = *inst.perturbation;
        const double l0 = pd.lambda0_N();
        const double sl0 = std::sqrt(l0);
        for (int i = 0; i < N; ++i) ci.h[i] += l0 * inst.signal[i] + sl0 * pd.Z0[i];
        for (int k = 1; k <= pd.K_plus(); ++k) {
            const double lk = pd.lambda[k];
            for (const auto& o : pd.channels[k - 1]) {
                const double star = inst.signal[o.site];
                auto term = [&](double s) { return std::log1p(lk * s) - lk * o.e * s / (1.0 + lk * star); };
                ci.constant += 0.5 * (term(1.0) + term(-1.0));
                ci.h[o.site] += 0.5 * (term(1.0) - term(-1.0));
            }
        }
    }
    return ci;
}

double gaussian_perturbation(const Spins& s, const Spins& signal, const PerturbationData& pd) {
    const double l0 = pd.lambda0_N();
    const double sl0 = std::sqrt(l0);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += l0 * signal[i] * s[i] + sl0 * pd.Z0[i] * s[i];
    return acc;
}

double exponential_perturbation(const Spins& s, const Spins& signal, const PerturbationData& pd) {
    double acc = 0.0;
    for (int k = 1; k <= pd.K_plus(); ++k) {
        const double lk = pd.lambda[k];
        for (const auto& o : pd.channels[k - 1]) {
            const double si = s[o.site];
            acc += std::log1p(lk * si) - lk * o.e * si / (1.0 + lk * signal[o.site]);
        }
    }
    return acc;
}

double hamiltonian(const Spins& s, const Instance& inst) {
    const ModelParams& prm = inst.params;
    if (static_cast<int>(s.size()) != prm.N) throw std::invalid_argument("configuration length must be N");
    double acc = 0.0;
    for (const auto& e : inst.edges.edges)
        acc += observation_term(prm, static_cast<double>(s[e.i] * s[e.j]), e.observed);
    if (inst.channel)
        for (const auto& ob : inst.channel->obs) acc += observation_term(prm, s[ob.site] * ob.x, ob.observed);
    if (inst.perturbation) {
        acc += gaussian_perturbation(s, inst.signal, *inst.perturbation);
        acc += exponential_perturbation(s, inst.signal, *inst.perturbation);
    }
    return acc;
}

double hamiltonian_original(const Spins& s, const ModelParams& prm, const EdgeList& edges) {
    if (!(static_cast<double>(prm.N) > prm.c + std::abs(prm.delta)))
        throw std::invalid_argument("N must exceed c + |delta|");
    double acc = 0.0;
    for (const auto& e : edges.edges)
        acc += observation_term(prm, static_cast<double>(s[e.i] * s[e.j]), e.observed);
    return acc;
}

double local_field(int i, const Spins& s, const Instance& inst) {
    const CompiledIsing& ci = inst.ising;
    const double* row = &ci.J[static_cast<std::size_t>(i) * ci.N];
    double acc = ci.h[i];
    for (int j = 0; j < ci.N; ++j) acc += row[j] * s[j];
    return 2.0 * acc;
}

nlohmann::json instance_envelope(const Instance& inst) {
    nlohmann::json j;
    j["params"] = to_json(inst.params);
    j["seed"] = inst.seed;
    j["t"] = inst.t;
    j["mu"] = to_json(inst.mu);
    j["counts"] = {{"edges", inst.edges.edges.size()},
                   {"channel", inst.channel ? inst.channel->obs.size() : 0},
                   {"perturbation_channels", inst.perturbation ? inst.perturbation->K_plus() : 0}};
    return j;
}

}  // namespace sbm
