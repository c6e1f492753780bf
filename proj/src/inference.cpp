#include "sbm/inference.hpp"

#include "sbm/parallel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace sbm {

std::string to_string(Method m) { return m == Method::exact ? "exact" : "mcmc"; }

std::vector<double> enumerate_log_weights(const Instance& inst, int cap) {
    const int N = inst.params.N;
    if (N > cap || N > 30) throw std::invalid_argument("N exceeds the enumeration cap");
    if (N < 1) throw std::invalid_argument("N must be positive");
    const CompiledIsing& ci = inst.ising;
    const double lp = std::log(inst.params.p);
    const double lq = std::log1p(-inst.params.p);
    const std::uint64_t size = std::uint64_t{1} << N;
    std::vector<double> w(size);
    Spins s(N, -1);
    std::vector<double> u(N, 0.0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) u[i] += ci.coupling(i, j) * s[j];
    double E = ci.energy(s) + N * lq;
    std::uint64_t gray = 0;
    w[0] = E;
    for (std::uint64_t k = 1; k < size; ++k) {
        const int i = std::countr_zero(k);
        const double si = s[i];
        E += -2.0 * si * (ci.h[i] + u[i]) + (si < 0 ? lp - lq : lq - lp);
        s[i] = static_cast<std::int8_t>(-s[i]);
        const double d = 2.0 * s[i];
        const double* row = &ci.J[static_cast<std::size_t>(i) * N];
        for (int j = 0; j < N; ++j) u[j] += row[j] * d;
        gray ^= std::uint64_t{1} << i;
        w[gray] = E;
    }
    return w;
}

ExactPosterior::ExactPosterior(const Instance& inst, int cap) : N_(inst.params.N) {
    prob_ = enumerate_log_weights(inst, cap);
    log_Z_ = log_sum_exp(prob_);
    for (double& v : prob_) v = std::exp(v - log_Z_);
}

Spins ExactPosterior::config(std::uint64_t index, int N) {
    Spins s(N);
    for (int i = 0; i < N; ++i) s[i] = (index >> i) & 1u ? 1 : -1;
    return s;
}

double ExactPosterior::expect(const std::function<double(const Spins&)>& f) const {
    double acc = 0.0;
    for (std::uint64_t k = 0; k < prob_.size(); ++k)
        if (prob_[k] > 0.0) acc += prob_[k] * f(config(k, N_));
    return acc;
}

std::vector<double> ExactPosterior::magnetizations() const {
    std::vector<double> m(N_, 0.0);
    for (std::uint64_t k = 0; k < prob_.size(); ++k) {
        const double pk = prob_[k];
        for (int i = 0; i < N_; ++i) m[i] += (k >> i) & 1u ? pk : -pk;
    }
    return m;
}

Eigen::MatrixXd ExactPosterior::correlations() const {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N_, N_);
    std::vector<double> s(N_);
    for (std::uint64_t k = 0; k < prob_.size(); ++k) {
        const double pk = prob_[k];
        for (int i = 0; i < N_; ++i) s[i] = (k >> i) & 1u ? 1.0 : -1.0;
        for (int i = 0; i < N_; ++i) {
            const double a = pk * s[i];
            for (int j = i + 1; j < N_; ++j) C(i, j) += a * s[j];
        }
    }
    for (int i = 0; i < N_; ++i) {
        C(i, i) = 1.0;
        for (int j = i + 1; j < N_; ++j) C(j, i) = C(i, j);
    }
    return C;
}

std::vector<double> ExactPosterior::correlations_with(int j) const {
    std::vector<double> c(N_, 0.0);
    for (std::uint64_t k = 0; k < prob_.size(); ++k) {
        const double pk = (k >> j) & 1u ? prob_[k] : -prob_[k];
        for (int i = 0; i < N_; ++i) c[i] += (k >> i) & 1u ? pk : -pk;
    }
    c[j] = 1.0;
    return c;
}

GibbsEstimate exact_gibbs(const Instance& inst, const std::function<double(const Spins&)>& f, int cap) {
    ExactPosterior post(inst, cap);
    GibbsEstimate g;
    g.value = post.expect(f);
    g.n_samples = static_cast<long>(post.probabilities().size());
    g.method = Method::exact;
    return g;
}

GibbsEstimate exact_gibbs_replicas(const Instance& inst, int n_replicas,
                                   const std::function<double(const std::vector<Spins>&)>& f, int cap) {
    const int N = inst.params.N;
    if (n_replicas < 1) throw std::invalid_argument("n_replicas must be positive");
    if (n_replicas * N > cap) throw std::invalid_argument("n_replicas * N exceeds the enumeration cap");
    ExactPosterior post(inst, cap);
    const auto& prob = post.probabilities();
    const std::uint64_t per = prob.size();
    const std::uint64_t mask = per - 1;
    const std::uint64_t total = std::uint64_t{1} << (n_replicas * N);
    std::vector<Spins> reps(n_replicas);
    double acc = 0.0;
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        double w = 1.0;
        for (int r = 0; r < n_replicas && w > 0.0; ++r) w *= prob[(idx >> (r * N)) & mask];
        if (w == 0.0) continue;
        for (int r = 0; r < n_replicas; ++r) reps[r] = ExactPosterior::config((idx >> (r * N)) & mask, N);
        acc += w * f(reps);
    }
    GibbsEstimate g;
    g.value = acc;
    g.n_samples = static_cast<long>(total);
    g.method = Method::exact;
    return g;
}

void McmcOptions::validate() const {
    if (n_replicas < 1) throw std::invalid_argument("n_replicas must be positive");
    if (burn_in < 0) throw std::invalid_argument("burn_in must be non-negative");
    if (n_sweeps <= burn_in) throw std::invalid_argument("n_sweeps must exceed burn_in");
    if (n_batches < 20) throw std::invalid_argument("at least 20 batches are required");
    if (n_sweeps - burn_in < n_batches) throw std::invalid_argument("too few recorded sweeps for the batch count");
}

McmcChain::McmcChain(const Instance& inst, Rng rng, Spins start) : inst_(&inst), rng_(rng), s_(std::move(start)) {
    const int N = inst.params.N;
    if (static_cast<int>(s_.size()) != N) throw std::invalid_argument("start configuration length must be N");
    u_.assign(N, 0.0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) u_[i] += inst.ising.coupling(i, j) * s_[j];
    prior_log_odds_ = std::log(inst.params.p) - std::log1p(-inst.params.p);
}

double McmcChain::conditional_log_odds(int i) const {
    return 2.0 * (inst_->ising.h[i] + u_[i]) + prior_log_odds_;
}

void McmcChain::flip(int i) {
    const int N = inst_->params.N;
    s_[i] = static_cast<std::int8_t>(-s_[i]);
    const double d = 2.0 * s_[i];
    const double* row = &inst_->ising.J[static_cast<std::size_t>(i) * N];
    for (int j = 0; j < N; ++j) u_[j] += row[j] * d;
}

void McmcChain::sweep() {
    const int N = inst_->params.N;
    for (int i = 0; i < N; ++i) {
        const double lo = conditional_log_odds(i);
        const double p_plus = 1.0 / (1.0 + std::exp(-lo));
        const std::int8_t v = uniform01(rng_) < p_plus ? 1 : -1;
        if (v != s_[i]) flip(i);
    }
}

std::vector<GibbsEstimate> mcmc_observables(const Instance& inst, const McmcOptions& opts, std::size_t n_obs,
                                            const ReplicaObservable& obs) {
    opts.validate();
    const int N = inst.params.N;
    std::vector<McmcChain> chains;
    chains.reserve(opts.n_replicas);
    for (int r = 0; r < opts.n_replicas; ++r) {
        Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(r));
        Spins start(N);
        if (opts.init == McmcOptions::Init::planted) {
            start = inst.signal;
        } else {
            for (auto& v : start) v = bernoulli(rng, inst.params.p) ? 1 : -1;
        }
        chains.emplace_back(inst, rng, std::move(start));
    }
    for (long k = 0; k < opts.burn_in; ++k)
        for (auto& ch : chains) ch.sweep();

    const long recorded = opts.n_sweeps - opts.burn_in;
    const long B = opts.n_batches;
    const long L = recorded / B;
    std::vector<double> batch(n_obs * B, 0.0);
    std::vector<RunningStats> all(n_obs);
    std::vector<Spins> reps(opts.n_replicas);
    std::vector<double> out(n_obs);
    for (long k = 0; k < B * L; ++k) {
        for (auto& ch : chains) ch.sweep();
        for (int r = 0; r < opts.n_replicas; ++r) reps[r] = chains[r].spins();
        obs(reps, out);
        const long b = k / L;
        for (std::size_t o = 0; o < n_obs; ++o) {
            batch[o * B + b] += out[o];
            all[o].add(out[o]);
        }
    }
    std::vector<GibbsEstimate> res(n_obs);
    for (std::size_t o = 0; o < n_obs; ++o) {
        RunningStats bs;
        for (long b = 0; b < B; ++b) bs.add(batch[o * B + b] / static_cast<double>(L));
        GibbsEstimate& g = res[o];
        g.value = all[o].mean();
        g.std_error = bs.std_error();
        g.n_samples = B * L;
        g.method = Method::mcmc;
        g.burn_in = opts.burn_in;
        g.thinning = 1;
        const double v_all = all[o].variance();
        g.tau = v_all > 0.0 ? static_cast<double>(L) * bs.variance() / v_all : 0.0;
        g.mixing_warning = g.tau > static_cast<double>(opts.n_sweeps) / 50.0;
    }
    return res;
}

GibbsEstimate mcmc_gibbs(const Instance& inst, const std::function<double(const std::vector<Spins>&)>& f,
                         const McmcOptions& opts) {
    auto res = mcmc_observables(inst, opts, 1,
                                [&](const std::vector<Spins>& reps, std::vector<double>& out) { out[0] = f(reps); });
    return res[0];
}

GibbsMoments mcmc_moments(const Instance& inst, const std::vector<std::pair<int, int>>& pairs,
                          const McmcOptions& opts) {
    const int N = inst.params.N;
    McmcOptions o = opts;
    o.n_replicas = 1;
    auto res = mcmc_observables(inst, o, N + pairs.size(), [&](const std::vector<Spins>& reps, std::vector<double>& out) {
        const Spins& s = reps[0];
        for (int i = 0; i < N; ++i) out[i] = s[i];
        for (std::size_t k = 0; k < pairs.size(); ++k) out[N + k] = s[pairs[k].first] * s[pairs[k].second];
    });
    GibbsMoments gm;
    gm.magnetization.assign(res.begin(), res.begin() + N);
    gm.pair_correlation.assign(res.begin() + N, res.end());
    for (const auto& g : res) gm.mixing_warning = gm.mixing_warning || g.mixing_warning;
    return gm;
}

double multi_overlap(const std::vector<const Spins*>& configs) {
    if (configs.empty()) throw std::invalid_argument("multi_overlap needs at least one configuration");
    const std::size_t N = configs[0]->size();
    long acc = 0;
    for (std::size_t i = 0; i < N; ++i) {
        int prod = 1;
        for (const Spins* c : configs) prod *= (*c)[i];
        acc += prod;
    }
    return static_cast<double>(acc) / static_cast<double>(N);
}

double multi_overlap(const std::vector<Spins>& replicas, const std::vector<int>& indices) {
    std::vector<const Spins*> ptrs;
    for (int l : indices) ptrs.push_back(&replicas.at(l));
    return multi_overlap(ptrs);
}

NishimoriResidual nishimori_residual(std::string name, const std::vector<double>& lhs,
                                     const std::vector<double>& rhs) {
    NishimoriResidual r;
    r.name = std::move(name);
    r.lhs = mean_se(lhs).mean;
    r.rhs = mean_se(rhs).mean;
    MeanSe d = paired_difference(lhs, rhs);
    r.residual = std::abs(d.mean);
    r.se = d.se;
    return r;
}

std::vector<NishimoriResidual> nishimori_suite(const ModelParams& prm, double t, const AtomicMeasure& mu,
                                               int n_disorder, std::uint64_t seed, int cap) {
    if (n_disorder < 2) throw std::invalid_argument("n_disorder must be at least 2");
    std::vector<std::array<double, 6>> rows(n_disorder);
    parallel_for(n_disorder, [&](std::size_t n) {
        Instance inst = sample_instance(prm, t, mu, std::nullopt, stream_seed(seed, n));
        ExactPosterior post(inst, cap);
        auto m = post.magnetizations();
        const int N = prm.N;
        double r12 = 0, r1s = 0, r123 = 0, r12s = 0;
        for (int i = 0; i < N; ++i) {
            r12 += m[i] * m[i];
            r1s += m[i] * inst.signal[i];
            r123 += m[i] * m[i] * m[i];
            r12s += m[i] * m[i] * inst.signal[i];
        }
        rows[n] = {r12 / N, r1s / N, m[0], prm.mbar(), r123 / N, r12s / N};
    });
    std::vector<double> cols[6];
    for (const auto& r : rows)
        for (int c = 0; c < 6; ++c) cols[c].push_back(r[c]);
    return {nishimori_residual("R12_vs_R1star", cols[0], cols[1]),
            nishimori_residual("sigma1_vs_mbar", cols[2], cols[3]),
            nishimori_residual("R123_vs_R12star", cols[4], cols[5])};
}

double perturbation_L(const Spins& s, const Instance& inst, int k) {
    if (!inst.perturbation) throw std::invalid_argument("instance carries no perturbation");
    const PerturbationData& pd = *inst.perturbation;
    if (k < 0 || k > pd.K_plus()) throw std::invalid_argument("perturbation channel out of range");
    const int N = inst.params.N;
    if (k == 0) {
        const double inv = 1.0 / (2.0 * std::sqrt(pd.lambda0_N()));
        double acc = 0.0;
        for (int i = 0; i < N; ++i) acc += s[i] * (inst.signal[i] + pd.Z0[i] * inv);
        return acc / N;
    }
    const double lk = pd.lambda[k];
    double acc = 0.0;
    for (const auto& o : pd.channels[k - 1]) {
        const double si = s[o.site];
        const double d = 1.0 + lk * inst.signal[o.site];
        acc += si * (1.0 / (1.0 + lk * si) - o.e / (d * d));
    }
    return acc / pd.s_N;
}

GibbsEstimate perturbation_L(const Instance& inst, int k, Method method, const McmcOptions& opts) {
    if (!inst.perturbation) throw std::invalid_argument("instance carries no perturbation");
    if (method == Method::exact) return exact_gibbs(inst, [&](const Spins& s) { return perturbation_L(s, inst, k); });
    return mcmc_gibbs(inst, [&](const std::vector<Spins>& r) { return perturbation_L(r[0], inst, k); }, opts);
}

PerturbationStats perturbation_stats(const Instance& inst, Method method, const McmcOptions& opts, int site_j) {
    if (!inst.perturbation) throw std::invalid_argument("instance carries no perturbation");
    const PerturbationData& pd = *inst.perturbation;
    const int N = inst.params.N;
    const int K = pd.K_plus();
    if (site_j < 0 || site_j >= N) throw std::invalid_argument("tracked site out of range");
    PerturbationStats st;
    st.Lk.assign(K, 0.0);
    st.Lk_sq.assign(K, 0.0);
    st.s_N = pd.s_N;
    st.lambda = pd.lambda;
    st.signal = inst.signal;
    st.site_j = site_j;
    st.sqrt_lambda0N = std::sqrt(pd.lambda0_N());

    if (method == Method::exact) {
        ExactPosterior post(inst);
        st.m = post.magnetizations();
        st.corr_j = post.correlations_with(site_j);
        Eigen::MatrixXd C = post.correlations();
        for (int i = 0; i < N; ++i) st.R12 += st.m[i] * st.m[i];
        st.R12 /= N;
        st.R12_sq = C.array().square().sum() / (static_cast<double>(N) * N);
        const auto& prob = post.probabilities();
        for (std::uint64_t idx = 0; idx < prob.size(); ++idx) {
            if (prob[idx] == 0.0) continue;
            Spins s = ExactPosterior::config(idx, N);
            const double l0 = perturbation_L(s, inst, 0);
            st.L0 += prob[idx] * l0;
            st.L0_sq += prob[idx] * l0 * l0;
            for (int k = 1; k <= K; ++k) {
                const double lk = perturbation_L(s, inst, k);
                st.Lk[k - 1] += prob[idx] * lk;
                st.Lk_sq[k - 1] += prob[idx] * lk * lk;
            }
        }
    } else {
        McmcOptions o = opts;
        o.n_replicas = 2;
        const std::size_t n_obs = 4 + 2 * static_cast<std::size_t>(K) + 2 * static_cast<std::size_t>(N);
        auto res = mcmc_observables(inst, o, n_obs, [&](const std::vector<Spins>& r, std::vector<double>& out) {
            const Spins& a = r[0];
            const Spins& b = r[1];
            long dot = 0;
            for (int i = 0; i < N; ++i) dot += a[i] * b[i];
            const double r12 = static_cast<double>(dot) / N;
            out[0] = r12;
            out[1] = r12 * r12;
            const double la = perturbation_L(a, inst, 0), lb = perturbation_L(b, inst, 0);
            out[2] = 0.5 * (la + lb);
            out[3] = 0.5 * (la * la + lb * lb);
            for (int k = 1; k <= K; ++k) {
                const double ka = perturbation_L(a, inst, k), kb = perturbation_L(b, inst, k);
                out[4 + 2 * (k - 1)] = 0.5 * (ka + kb);
                out[5 + 2 * (k - 1)] = 0.5 * (ka * ka + kb * kb);
            }
            const std::size_t base = 4 + 2 * static_cast<std::size_t>(K);
            for (int i = 0; i < N; ++i) {
                out[base + i] = 0.5 * (a[i] + b[i]);
                out[base + N + i] = 0.5 * (a[i] * a[site_j] + b[i] * b[site_j]);
            }
        });
        st.R12 = res[0].value;
        st.R12_sq = res[1].value;
        st.L0 = res[2].value;
        st.L0_sq = res[3].value;
        for (int k = 1; k <= K; ++k) {
            st.Lk[k - 1] = res[4 + 2 * (k - 1)].value;
            st.Lk_sq[k - 1] = res[5 + 2 * (k - 1)].value;
        }
        const std::size_t base = 4 + 2 * static_cast<std::size_t>(K);
        st.m.resize(N);
        st.corr_j.resize(N);
        for (int i = 0; i < N; ++i) {
            st.m[i] = res[base + i].value;
            st.corr_j[i] = res[base + N + i].value;
        }
        st.corr_j[site_j] = 1.0;
        for (const auto& g : res) st.mixing_warning = st.mixing_warning || g.mixing_warning;
    }
    double r1s = 0.0, sz = 0.0;
    for (int i = 0; i < N; ++i) {
        r1s += st.m[i] * inst.signal[i];
        sz += st.m[i] * pd.Z0[i];
    }
    st.R1star = r1s / N;
    st.sigma_dot_Z = sz;
    return st;
}

OverlapConcentrationReport overlap_concentration_report(const std::vector<PerturbationStats>& stats) {
    if (stats.size() < 3) throw std::invalid_argument("need at least 3 instances");
    OverlapConcentrationReport rep;
    rep.n_instances = static_cast<int>(stats.size());
    const int K = static_cast<int>(stats[0].Lk.size());
    std::vector<std::vector<double>> rows;
    std::vector<double> ibp_l, ibp_r;
    for (const auto& s : stats) {
        std::vector<double> row = {s.R12, s.R12_sq, s.L0, s.L0_sq};
        for (int k = 0; k < K; ++k) {
            row.push_back(s.Lk[k]);
            row.push_back(s.Lk_sq[k]);
        }
        rows.push_back(std::move(row));
        const double N = static_cast<double>(s.m.size());
        ibp_l.push_back(s.sigma_dot_Z);
        ibp_r.push_back(N * s.sqrt_lambda0N * (1.0 - s.R1star));
    }
    rep.R12_var = jackknife(rows, [](const std::vector<double>& c) { return c[1] - c[0] * c[0]; });
    rep.L0_var = jackknife(rows, [](const std::vector<double>& c) { return c[3] - c[2] * c[2]; });
    rep.overlap_margin = jackknife(rows, [](const std::vector<double>& c) {
        return 4.0 * (c[3] - c[2] * c[2]) - (c[1] - c[0] * c[0]);
    });
    for (int k = 0; k < K; ++k) {
        rep.Lk_mean.push_back(jackknife(rows, [k](const std::vector<double>& c) { return c[4 + 2 * k]; }));
        rep.Lk_var.push_back(jackknife(rows, [k](const std::vector<double>& c) {
            return c[5 + 2 * k] - c[4 + 2 * k] * c[4 + 2 * k];
        }));
    }
    rep.ibp = nishimori_residual("gaussian_ibp", ibp_l, ibp_r);
    return rep;
}

FranzDeSanctisResult franz_de_sanctis_residual(const std::vector<PerturbationStats>& stats, int k, int n,
                                               FdsFunction f, int n_aux_e, std::uint64_t seed) {
    if (stats.size() < 3) throw std::invalid_argument("need at least 3 instances");
    if (n < 1) throw std::invalid_argument("n must be positive");
    if (n_aux_e < 1) throw std::invalid_argument("n_aux_e must be positive");
    const int K = static_cast<int>(stats[0].Lk.size());
    if (k < 1 || k > K) throw std::invalid_argument("perturbation channel out of range");
    std::vector<std::vector<double>> rows(stats.size());
    for (std::size_t r = 0; r < stats.size(); ++r) {
        const PerturbationStats& st = stats[r];
        const int N = static_cast<int>(st.m.size());
        const int j = st.site_j;
        const double lam = st.lambda[k];
        Rng rng = make_rng(seed, r);
        std::exponential_distribution<double> expo(1.0);
        double coupled = 0.0, ratio = 0.0;
        long count = 0;
        for (int i = 0; i < N; ++i) {
            const double d1 = 1.0 + lam * st.signal[i];
            for (int q = 0; q < n_aux_e; ++q) {
                const double e = expo(rng);
                const double y = e / d1;
                // exp(theta) = a0 + a1 s_i and d = kappa s_i.
                const double ep = (1.0 + lam) * std::exp(-lam * y);
                const double em = (1.0 - lam) * std::exp(lam * y);
                const double a0 = 0.5 * (ep + em), a1 = 0.5 * (ep - em);
                const double kappa = y / d1;
                const double z = a0 + a1 * st.m[i];
                const double dz = kappa * (a0 * st.m[i] + a1);
                ratio += dz / z;
                if (f == FdsFunction::one) {
                    coupled += dz / z;
                } else {
                    const double fz = a0 * st.m[j] + a1 * st.corr_j[i];
                    const double fdz = kappa * (a0 * st.corr_j[i] + a1 * st.m[j]);
                    coupled += fdz * std::pow(fz, n - 1) / std::pow(z, n);
                }
                ++count;
            }
        }
        const double fmean = f == FdsFunction::one ? 1.0 : std::pow(st.m[j], n);
        rows[r] = {coupled / count, fmean, ratio / count, st.Lk[k - 1], st.Lk_sq[k - 1]};
    }
    FranzDeSanctisResult res;
    res.k = k;
    res.n = n;
    res.f_name = f == FdsFunction::one ? "one" : "site_product";
    MeanSe diff = jackknife(rows, [](const std::vector<double>& c) { return c[0] - c[1] * c[2]; });
    res.lhs_diff = std::abs(diff.mean);
    res.lhs_se = diff.se;
    const double sN = stats[0].s_N;
    MeanSe bound = jackknife(rows, [sN](const std::vector<double>& c) {
        return std::sqrt(std::max(0.0, 2.0 * (c[4] - c[3] * c[3]) + 16.0 / sN));
    });
    res.bound = bound.mean;
    res.bound_se = bound.se;
    return res;
}

}  // namespace sbm
