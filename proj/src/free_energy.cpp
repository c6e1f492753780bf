#include "sbm/free_energy.hpp"

#include "sbm/parallel.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace sbm {

namespace {

std::uint64_t instance_seed(std::uint64_t seed, std::size_t n) { return stream_seed(seed, 2 * n); }
std::uint64_t chain_seed(std::uint64_t seed, std::size_t n) { return stream_seed(seed, 2 * n + 1); }

void check_disorder(int n) {
    if (n < 2) throw std::invalid_argument("n_disorder must be at least 2");
}

struct PairCorrelations {
    std::vector<std::pair<int, int>> pairs;  // ordered, may include i == j
    std::vector<double> q;
    bool mixing_warning = false;
};

// <s_i s_j> over all ordered pairs (exact) or over sampled pairs (MCMC).
PairCorrelations pair_correlations(const Instance& inst, const SamplerOptions& opts, std::size_t n) {
    const int N = inst.params.N;
    PairCorrelations pc;
    const bool all_pairs = opts.method == Method::exact || opts.n_pairs <= 0;
    if (all_pairs) {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) pc.pairs.emplace_back(i, j);
    } else {
        Rng rng = make_rng(chain_seed(opts.seed, n), 0x5a17);
        std::uniform_int_distribution<int> site(0, N - 1);
        for (int k = 0; k < opts.n_pairs; ++k) {
            int i = site(rng), j = site(rng);
            pc.pairs.emplace_back(i, j);
        }
    }
    pc.q.assign(pc.pairs.size(), 1.0);
    if (opts.method == Method::exact) {
        ExactPosterior post(inst, opts.cap);
        Eigen::MatrixXd C = post.correlations();
        for (std::size_t k = 0; k < pc.pairs.size(); ++k) pc.q[k] = C(pc.pairs[k].first, pc.pairs[k].second);
    } else {
        std::vector<std::pair<int, int>> off;
        std::vector<std::size_t> where;
        for (std::size_t k = 0; k < pc.pairs.size(); ++k)
            if (pc.pairs[k].first != pc.pairs[k].second) {
                off.push_back(pc.pairs[k]);
                where.push_back(k);
            }
        McmcOptions mo = opts.mcmc;
        mo.seed = chain_seed(opts.seed, n);
        GibbsMoments gm = mcmc_moments(inst, off, mo);
        for (std::size_t k = 0; k < off.size(); ++k) pc.q[where[k]] = gm.pair_correlation[k].value;
        pc.mixing_warning = gm.mixing_warning;
    }
    return pc;
}

std::vector<double> magnetizations(const Instance& inst, const SamplerOptions& opts, std::size_t n, bool* warn) {
    if (opts.method == Method::exact) return ExactPosterior(inst, opts.cap).magnetizations();
    McmcOptions mo = opts.mcmc;
    mo.seed = chain_seed(opts.seed, n);
    GibbsMoments gm = mcmc_moments(inst, {}, mo);
    std::vector<double> m;
    for (const auto& g : gm.magnetization) m.push_back(g.value);
    if (warn) *warn = gm.mixing_warning;
    return m;
}

MeanSe column_mean(const std::vector<std::array<double, 3>>& rows, int c) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r[c]);
    return mean_se(v);
}

}  // namespace

double observation_entropy_term(double w, int N) {
    const double r = w / N;
    return r * std::log(w) + (1.0 - r) * std::log1p(-r);
}

double delta0_free_energy(const ModelParams& prm, double t, double mass) {
    prm.validate_finite();
    return (t * (prm.N - 1) / 2.0 + mass * prm.N) * observation_entropy_term(prm.c, prm.N);
}

FreeEnergyResult free_energy_exact(const ModelParams& prm, double t, const AtomicMeasure& mu, int n_disorder,
                                   std::uint64_t seed, int cap) {
    prm.validate_finite();
    check_disorder(n_disorder);
    if (prm.N > cap) throw std::invalid_argument("N exceeds the enumeration cap");
    std::vector<double> logz(n_disorder), planted(n_disorder);
    parallel_for(n_disorder, [&](std::size_t n) {
        Instance inst = sample_instance(prm, t, mu, std::nullopt, instance_seed(seed, n));
        logz[n] = log_sum_exp(enumerate_log_weights(inst, cap)) / prm.N;
        planted[n] = inst.ising.energy(inst.signal) / prm.N;
    });
    FreeEnergyResult r;
    MeanSe f = mean_se(logz);
    r.value = f.mean;
    r.std_error = f.se;
    r.N = prm.N;
    r.t = t;
    r.mass = mu.mass();
    r.method = "exact";
    r.n_disorder = n_disorder;
    r.integral = f.mean;
    r.integral_se = f.se;
    MeanSe mi = paired_difference(planted, logz);
    r.has_paired_mi = true;
    r.mi_paired = mi.mean;
    r.mi_paired_se = mi.se;
    return r;
}

FreeEnergyResult free_energy_t0(const ModelParams& prm, const AtomicMeasure& mu, int n_disorder, std::uint64_t seed) {
    prm.validate_finite();
    check_disorder(n_disorder);
    for (const auto& a : mu.atoms())
        if (a.weight < 0.0) throw std::invalid_argument("measure has a negative weight");
    const AtomicMeasure nf = mu.normal_form();
    const auto& atoms = nf.atoms();
    const int N = prm.N;
    const double lp = std::log(prm.p), lq = std::log1p(-prm.p);
    // log-weights of one observation of type a, for s = +1 and s = -1, observed or not.
    std::vector<std::array<double, 4>> terms;
    for (const auto& a : atoms) {
        const double wp = prm.c + prm.delta * a.position, wm = prm.c - prm.delta * a.position;
        terms.push_back({std::log(wp), std::log1p(-wp / N), std::log(wm), std::log1p(-wm / N)});
    }
    std::vector<double> per(n_disorder);
    parallel_for(n_disorder, [&](std::size_t n) {
        Rng rng = make_rng(instance_seed(seed, n));
        double acc = 0.0;
        for (int i = 0; i < N; ++i) {
            const int star = bernoulli(rng, prm.p) ? 1 : -1;
            double Ap = 0.0, Am = 0.0;
            for (std::size_t k = 0; k < atoms.size(); ++k) {
                const double w = prm.c + prm.delta * star * atoms[k].position;
                const double total = N * atoms[k].weight;
                // Thinning: observed and unobserved counts are independent Poisson variables.
                const long n1 = poisson(rng, atoms[k].weight * w);
                const long n0 = poisson(rng, total - atoms[k].weight * w);
                Ap += n1 * terms[k][0] + n0 * terms[k][1];
                Am += n1 * terms[k][2] + n0 * terms[k][3];
            }
            acc += log_sum_exp(lp + Ap, lq + Am);
        }
        per[n] = acc / N;
    });
    FreeEnergyResult r;
    MeanSe f = mean_se(per);
    r.value = f.mean;
    r.std_error = f.se;
    r.N = N;
    r.t = 0.0;
    r.mass = mu.mass();
    r.method = "t0_factorized";
    r.n_disorder = n_disorder;
    r.f0 = f.mean;
    r.f0_se = f.se;
    return r;
}

double log_partition_t0(const Instance& inst) {
    const CompiledIsing& ci = inst.ising;
    for (double v : ci.J)
        if (v != 0.0) throw std::invalid_argument("instance has couplings; it does not factorize");
    const double lp = std::log(inst.params.p), lq = std::log1p(-inst.params.p);
    double acc = ci.constant;
    for (int i = 0; i < ci.N; ++i) acc += log_sum_exp(lp + ci.h[i], lq - ci.h[i]);
    return acc;
}

DerivativeEstimate dF_dt_gibbs(const ModelParams& prm, double t, const AtomicMeasure& mu, const SamplerOptions& opts,
                               int taylor_terms) {
    prm.validate_finite();
    check_disorder(opts.n_disorder);
    if (t < 0.0) throw std::invalid_argument("t must be non-negative");
    const int N = prm.N;
    const double c = prm.c, D = prm.delta, mbar = prm.mbar();
    std::vector<std::array<double, 3>> rows(opts.n_disorder);
    std::vector<char> warn(opts.n_disorder, 0);
    parallel_for(opts.n_disorder, [&](std::size_t n) {
        Instance inst = sample_instance(prm, t, mu, std::nullopt, instance_seed(opts.seed, n));
        PairCorrelations pc = pair_correlations(inst, opts, n);
        warn[n] = pc.mixing_warning;
        double ex = 0.0, lem = 0.0, tay = 0.0;
        long off = 0;
        for (std::size_t k = 0; k < pc.pairs.size(); ++k) {
            const double q = pc.q[k];
            const double w1 = c + D * q;
            const double w0 = 1.0 - w1 / N;
            ex += (w1 / N) * std::log(w1) + w0 * std::log(w0);
            if (pc.pairs[k].first == pc.pairs[k].second) continue;
            ++off;
            lem += 0.5 * w1 * std::log(w1);
            double series = 0.0, rq = -D / c * q, pw = rq;
            for (int m = 2; m <= taylor_terms; ++m) {
                pw *= rq;
                series += pw / (static_cast<double>(m) * (m - 1));
            }
            tay += series;
        }
        ex *= (N - 1) / 2.0 / static_cast<double>(pc.pairs.size());
        lem = (off ? lem / off : 0.5 * (c + D) * std::log(c + D)) - 0.5 * D * mbar * mbar - 0.5 * c;
        tay = 0.5 * (c + D * mbar * mbar) * std::log(c) + 0.5 * c * (off ? tay / off : 0.0) - 0.5 * c;
        rows[n] = {ex, lem, tay};
    });
    DerivativeEstimate d;
    MeanSe ex = column_mean(rows, 0);
    d.estimate.value = ex.mean;
    d.estimate.std_error = ex.se;
    d.estimate.n_samples = opts.n_disorder;
    d.estimate.method = opts.method;
    d.estimate.burn_in = opts.method == Method::mcmc ? opts.mcmc.burn_in : 0;
    for (char w : warn) d.estimate.mixing_warning = d.estimate.mixing_warning || w;
    d.asymptotic = column_mean(rows, 1);
    d.taylor = column_mean(rows, 2);
    std::vector<double> a, b;
    for (const auto& r : rows) {
        a.push_back(r[1]);
        b.push_back(r[2]);
    }
    d.asymptotic_minus_taylor = paired_difference(a, b);
    return d;
}

DerivativeEstimate gateaux_density_gibbs(const ModelParams& prm, double t, const AtomicMeasure& mu, double x,
                                         const SamplerOptions& opts) {
    prm.validate_finite();
    check_disorder(opts.n_disorder);
    if (std::abs(x) > 1.0) throw std::invalid_argument("|x| must not exceed 1");
    const int N = prm.N;
    const double c = prm.c, D = prm.delta;
    std::vector<std::array<double, 3>> rows(opts.n_disorder);
    std::vector<char> warn(opts.n_disorder, 0);
    parallel_for(opts.n_disorder, [&](std::size_t n) {
        Instance inst = sample_instance(prm, t, mu, std::nullopt, instance_seed(opts.seed, n));
        bool w = false;
        auto m = magnetizations(inst, opts, n, &w);
        warn[n] = w;
        double a = 0.0, b = 0.0, mean_m = 0.0;
        for (int i = 0; i < N; ++i) {
            const double w1 = c + D * m[i] * x;
            const double w0 = 1.0 - w1 / N;
            a += w1 * std::log(w1);
            b += w0 * std::log(w0);
            mean_m += m[i];
        }
        a /= N;
        b /= N;
        rows[n] = {a + N * b, a - c - D * prm.mbar() * x, mean_m / N};
    });
    DerivativeEstimate d;
    MeanSe ex = column_mean(rows, 0);
    d.estimate.value = ex.mean;
    d.estimate.std_error = ex.se;
    d.estimate.n_samples = opts.n_disorder;
    d.estimate.method = opts.method;
    for (char w : warn) d.estimate.mixing_warning = d.estimate.mixing_warning || w;
    d.asymptotic = column_mean(rows, 1);
    d.taylor = d.asymptotic;
    std::vector<double> a, b;
    for (const auto& r : rows) {
        a.push_back(r[0]);
        b.push_back(r[1]);
    }
    d.asymptotic_minus_taylor = paired_difference(a, b);
    return d;
}

double gateaux_density_bound(const ModelParams& prm) {
    const double c = prm.c;
    return 2.0 * c * (2.0 + std::abs(std::log(2.0 * c)) + std::abs(std::log(c - std::abs(prm.delta))));
}

double gateaux_density_derivative_bound(const ModelParams& prm) {
    const double c = prm.c;
    return c * (1.0 + std::abs(std::log(2.0 * c)) + std::abs(std::log(c - std::abs(prm.delta))));
}

FreeEnergyResult free_energy_thermo(const ModelParams& prm, double t, const AtomicMeasure& mu, int n_nodes,
                                    const SamplerOptions& opts) {
    prm.validate_finite();
    if (t < 0.0) throw std::invalid_argument("t must be non-negative");
    if (n_nodes < 1) throw std::invalid_argument("n_nodes must be positive");
    FreeEnergyResult r;
    r.N = prm.N;
    r.t = t;
    r.mass = mu.mass();
    r.method = "thermo_integration";
    r.n_disorder = opts.n_disorder;
    if (mu.mass() > 0.0) {
        FreeEnergyResult f0 = free_energy_t0(prm, mu, opts.n_disorder, stream_seed(opts.seed, 0xf0));
        r.f0 = f0.value;
        r.f0_se = f0.std_error;
    }
    if (t > 0.0) {
        std::vector<double> nodes, weights;
        gauss_legendre(n_nodes, 0.0, t, nodes, weights);
        double var = 0.0;
        for (int q = 0; q < n_nodes; ++q) {
            SamplerOptions o = opts;
            o.seed = stream_seed(opts.seed, static_cast<std::uint64_t>(q) + 1);
            DerivativeEstimate d = dF_dt_gibbs(prm, nodes[q], mu, o);
            r.integral += weights[q] * d.estimate.value;
            var += weights[q] * weights[q] * d.estimate.std_error * d.estimate.std_error;
            r.mixing_warning = r.mixing_warning || d.estimate.mixing_warning;
        }
        r.integral_se = std::sqrt(var);
    }
    r.value = r.f0 + r.integral;
    r.std_error = std::sqrt(r.f0_se * r.f0_se + r.integral_se * r.integral_se);
    return r;
}

double planted_energy_density(const ModelParams& prm, double t, const AtomicMeasure& mu) {
    prm.validate_finite();
    const int N = prm.N;
    const double c = prm.c, D = prm.delta, p = prm.p;
    const double q = p * p + (1.0 - p) * (1.0 - p);
    const double self = observation_entropy_term(c + D, N);
    const double off = q * observation_entropy_term(c + D, N) + (1.0 - q) * observation_entropy_term(c - D, N);
    double val = t * (N - 1) / 2.0 * (self / N + off * (N - 1.0) / N);
    for (const auto& a : mu.atoms()) {
        const double e = p * observation_entropy_term(c + D * a.position, N) +
                         (1.0 - p) * observation_entropy_term(c - D * a.position, N);
        val += a.weight * N * e;
    }
    return val;
}

double mi_asymptotic_constant(const ModelParams& prm) {
    const double c = prm.c, D = prm.delta, p = prm.p, mbar = prm.mbar();
    const double q = p * p + (1.0 - p) * (1.0 - p);
    auto xlogx = [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; };
    return q * 0.5 * xlogx(c + D) + (1.0 - q) * 0.5 * xlogx(c - D) - 0.5 * c - 0.5 * D * mbar * mbar;
}

MutualInformation mutual_information(const ModelParams& prm, const FreeEnergyResult& fe, MiForm form,
                                     const AtomicMeasure& mu) {
    MutualInformation mi;
    mi.form = form;
    if (form == MiForm::paired) {
        if (!fe.has_paired_mi) throw std::invalid_argument("free-energy result carries no paired estimate");
        mi.value = fe.mi_paired;
        mi.se = fe.mi_paired_se;
        return mi;
    }
    const double constant =
        form == MiForm::finite_n ? planted_energy_density(prm, fe.t, mu) : mi_asymptotic_constant(prm);
    mi.value = constant - fe.value;
    mi.se = fe.std_error;
    return mi;
}

std::pair<EdgeList, EdgeList> coupled_edge_lists(const ModelParams& prm, const Spins& signal, Rng& rng) {
    const int N = prm.N;
    EdgeList binom;
    binom.mode = EdgeList::Mode::binomial;
    binom.t = 1.0;
    EdgeList pois;
    pois.mode = EdgeList::Mode::poisson;
    pois.t = 1.0;
    const double pair_mean = (N - 1.0) / N;
    const double self_mean = (N - 1.0) / (2.0 * N);
    for (int i = 0; i < N; ++i) {
        const long ns = poisson(rng, self_mean);
        for (long k = 0; k < ns; ++k) pois.edges.push_back({i, i, bernoulli(rng, (prm.c + prm.delta) / N)});
        for (int j = i + 1; j < N; ++j) {
            const double prob = (prm.c + prm.delta * signal[i] * signal[j]) / N;
            const bool G = bernoulli(rng, prob);
            binom.edges.push_back({i, j, G});
            const long np = poisson(rng, pair_mean);
            for (long k = 0; k < np; ++k) pois.edges.push_back({i, j, k == 0 ? G : bernoulli(rng, prob)});
        }
    }
    return {binom, pois};
}

PoissonBinomialGap appendix_a_gap(const ModelParams& prm, int n_disorder, std::uint64_t seed, int cap) {
    prm.validate_finite();
    check_disorder(n_disorder);
    if (prm.N > cap) throw std::invalid_argument("N exceeds the enumeration cap");
    std::vector<double> fp(n_disorder), fb(n_disorder);
    parallel_for(n_disorder, [&](std::size_t n) {
        Rng rng = make_rng(instance_seed(seed, n));
        Spins signal = sample_signal(prm, rng);
        auto [binom, pois] = coupled_edge_lists(prm, signal, rng);
        Instance ib = assemble_instance(prm, signal, std::move(binom), std::nullopt, std::nullopt);
        Instance ip = assemble_instance(prm, signal, std::move(pois), std::nullopt, std::nullopt);
        fb[n] = log_sum_exp(enumerate_log_weights(ib, cap)) / prm.N;
        fp[n] = log_sum_exp(enumerate_log_weights(ip, cap)) / prm.N;
    });
    PoissonBinomialGap g;
    MeanSe d = paired_difference(fp, fb);
    g.mean_difference = d.mean;
    g.gap = std::abs(d.mean);
    g.se = d.se;
    g.f_poisson = mean_se(fp).mean;
    g.f_binomial = mean_se(fb).mean;
    g.n_disorder = n_disorder;
    return g;
}

}  // namespace sbm
