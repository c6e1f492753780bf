#include "sbm/limit_functionals.hpp"

#include "sbm/free_energy.hpp"
#include "sbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sbm {

PoissonProcessSampler::PoissonProcessSampler(const AtomicMeasure& mu, const ModelParams& prm) : prm_(prm) {
    prm.validate();
    const AtomicMeasure nf = mu.normal_form();
    for (const auto& a : nf.atoms()) {
        if (a.weight < 0.0) throw std::invalid_argument("measure has a negative weight");
        if (a.weight == 0.0) continue;
        pos_.push_back(a.position);
        lp_.push_back(std::log(prm.c + prm.delta * a.position));
        lm_.push_back(std::log(prm.c - prm.delta * a.position));
        first_moment_ += a.weight * a.position;
        for (int s = 0; s < 2; ++s) {
            const double sign = s == 0 ? 1.0 : -1.0;
            total_[s] += (prm.c + prm.delta * sign * a.position) * a.weight;
            cdf_[s].push_back(total_[s]);
        }
    }
    for (int s = 0; s < 2; ++s)
        for (double& v : cdf_[s]) v /= total_[s];
}

std::size_t PoissonProcessSampler::pick(int sign, Rng& rng) const {
    const auto& cdf = cdf_[sign > 0 ? 0 : 1];
    if (cdf.size() == 1) return 0;
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

PoissonProcessSampler::Draw PoissonProcessSampler::draw(int sign, Rng& rng) const {
    Draw d;
    if (pos_.empty()) return d;
    d.count = poisson(rng, intensity(sign));
    for (long k = 0; k < d.count; ++k) {
        const std::size_t a = pick(sign, rng);
        d.log_plus += lp_[a];
        d.log_minus += lm_[a];
    }
    return d;
}

std::vector<double> PoissonProcessSampler::draw_points(int sign, Rng& rng) const {
    std::vector<double> pts;
    if (pos_.empty()) return pts;
    const long n = poisson(rng, intensity(sign));
    for (long k = 0; k < n; ++k) pts.push_back(pos_[pick(sign, rng)]);
    return pts;
}

double single_site_log_integral(const ModelParams& prm, double M, double log_plus, double log_minus) {
    return log_sum_exp(std::log(prm.p) - prm.delta * M + log_plus, std::log1p(-prm.p) + prm.delta * M + log_minus);
}

double single_site_mean(const ModelParams& prm, double M, double log_plus, double log_minus) {
    const double L = std::log(prm.p) - std::log1p(-prm.p) - 2.0 * prm.delta * M + log_plus - log_minus;
    return std::tanh(0.5 * L);
}

namespace {

// Mean of y with the control variate z (known mean 0), coefficient fitted by regression.
MeanSe control_variate_mean(const std::vector<double>& y, const std::vector<double>& z) {
    const std::size_t n = y.size();
    MeanSe out;
    out.n = n;
    if (n == 0) return out;
    double my = 0, mz = 0;
    for (std::size_t i = 0; i < n; ++i) {
        my += y[i];
        mz += z[i];
    }
    my /= n;
    mz /= n;
    double szz = 0, szy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        szz += (z[i] - mz) * (z[i] - mz);
        szy += (z[i] - mz) * (y[i] - my);
    }
    const double beta = szz > 0.0 ? szy / szz : 0.0;
    RunningStats r;
    for (std::size_t i = 0; i < n; ++i) r.add(y[i] - beta * z[i]);
    out.mean = r.mean();
    out.se = r.std_error();
    return out;
}

}  // namespace

McValue psi(const AtomicMeasure& mu, const ModelParams& prm, long n_mc, std::uint64_t seed) {
    if (n_mc < 4) throw std::invalid_argument("n_mc must be at least 4");
    PoissonProcessSampler sampler(mu, prm);
    McValue out;
    out.n = n_mc;
    const double mass = mu.mass();
    if (mass == 0.0) return out;
    const double M = sampler.first_moment();
    const long n_plus = n_mc / 2, n_minus = n_mc - n_plus;
    MeanSe part[2];
    for (int s = 0; s < 2; ++s) {
        const int sign = s == 0 ? 1 : -1;
        const long n = s == 0 ? n_plus : n_minus;
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(s));
        std::vector<double> y(n), z(n);
        const double lam = sampler.intensity(sign);
        for (long k = 0; k < n; ++k) {
            auto d = sampler.draw(sign, rng);
            y[k] = single_site_log_integral(prm, M, d.log_plus, d.log_minus);
            z[k] = static_cast<double>(d.count) - lam;
        }
        part[s] = control_variate_mean(y, z);
    }
    const double p = prm.p;
    out.value = -mass * prm.c + p * part[0].mean + (1.0 - p) * part[1].mean;
    out.se = std::sqrt(p * p * part[0].se * part[0].se + (1.0 - p) * (1.0 - p) * part[1].se * part[1].se);
    return out;
}

double psi_exact(const AtomicMeasure& mu, const ModelParams& prm, int max_atoms) {
    prm.validate();
    std::vector<Atom> nz;
    double w0 = 0.0, mass = 0.0, M = 0.0;
    const AtomicMeasure nf = mu.normal_form();
    for (const auto& a : nf.atoms()) {
        if (a.weight < 0.0) throw std::invalid_argument("measure has a negative weight");
        mass += a.weight;
        M += a.weight * a.position;
        if (a.position == 0.0)
            w0 += a.weight;
        else
            nz.push_back(a);
    }
    if (static_cast<int>(nz.size()) > max_atoms) throw std::invalid_argument("too many atoms for exact psi");
    const double c = prm.c, D = prm.delta;
    double total = -mass * c + c * w0 * std::log(c);
    for (int s = 0; s < 2; ++s) {
        const double sign = s == 0 ? 1.0 : -1.0;
        const double ps = s == 0 ? prm.p : 1.0 - prm.p;
        const std::size_t A = nz.size();
        std::vector<double> lam(A), lp(A), lm(A);
        std::vector<int> nmax(A);
        for (std::size_t a = 0; a < A; ++a) {
            lam[a] = (c + D * sign * nz[a].position) * nz[a].weight;
            lp[a] = std::log(c + D * nz[a].position);
            lm[a] = std::log(c - D * nz[a].position);
            nmax[a] = static_cast<int>(std::ceil(lam[a] + 12.0 * std::sqrt(lam[a]) + 40.0));
        }
        double acc = 0.0;
        std::vector<int> n(A, 0);
        // Odometer over multiplicities with log-pmf accumulated per atom.
        while (true) {
            double logpmf = 0.0, lplus = 0.0, lminus = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                logpmf += n[a] * std::log(lam[a]) - lam[a] - std::lgamma(n[a] + 1.0);
                lplus += n[a] * lp[a];
                lminus += n[a] * lm[a];
            }
            acc += std::exp(logpmf) * single_site_log_integral(prm, M, lplus, lminus);
            std::size_t a = 0;
            while (a < A && ++n[a] > nmax[a]) n[a++] = 0;
            if (a == A) break;
        }
        if (A == 0) acc = single_site_log_integral(prm, M, 0.0, 0.0);
        total += ps * acc;
    }
    return total;
}

GammaSamples gamma_samples(const AtomicMeasure& mu, const ModelParams& prm, long n, std::uint64_t seed,
                           bool stratified) {
    if (n < 2) throw std::invalid_argument("need at least 2 samples");
    PoissonProcessSampler sampler(mu, prm);
    const double M = sampler.first_moment();
    GammaSamples gs;
    gs.m.reserve(n);
    gs.weight.reserve(n);
    gs.sign.reserve(n);
    if (stratified) {
        const long n_plus = n / 2, n_minus = n - n_plus;
        for (int s = 0; s < 2; ++s) {
            const int sign = s == 0 ? 1 : -1;
            const long cnt = s == 0 ? n_plus : n_minus;
            const double w = (s == 0 ? prm.p : 1.0 - prm.p) / static_cast<double>(cnt);
            Rng rng = make_rng(seed, static_cast<std::uint64_t>(s));
            for (long k = 0; k < cnt; ++k) {
                auto d = sampler.draw(sign, rng);
                gs.m.push_back(single_site_mean(prm, M, d.log_plus, d.log_minus));
                gs.weight.push_back(w);
                gs.sign.push_back(sign);
            }
        }
    } else {
        Rng rng = make_rng(seed, 2);
        for (long k = 0; k < n; ++k) {
            const int sign = bernoulli(rng, prm.p) ? 1 : -1;
            auto d = sampler.draw(sign, rng);
            gs.m.push_back(single_site_mean(prm, M, d.log_plus, d.log_minus));
            gs.weight.push_back(1.0 / static_cast<double>(n));
            gs.sign.push_back(sign);
        }
    }
    return gs;
}

AtomicMeasure gamma_map(const AtomicMeasure& mu, const ModelParams& prm, long n_samples, std::uint64_t seed) {
    GammaSamples gs = gamma_samples(mu, prm, n_samples, seed, false);
    AtomicMeasure out;
    for (std::size_t k = 0; k < gs.m.size(); ++k) out.add(gs.m[k], gs.weight[k]);
    return out.normal_form();
}

namespace {

std::vector<double> gamma_binned_weights(const AtomicMeasure& mu, const ModelParams& prm, long n, int K,
                                         std::uint64_t seed) {
    GammaSamples gs = gamma_samples(mu, prm, n, seed, true);
    AtomicMeasure m;
    for (std::size_t k = 0; k < gs.m.size(); ++k) m.add(gs.m[k], gs.weight[k]);
    return bin_mean_preserving(m, K);
}

AtomicMeasure grid_measure(const std::vector<double>& w, int K) {
    DyadicGrid grid(K);
    AtomicMeasure m;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (w[k] > 0.0) m.add(grid.point(k), w[k]);
    return m;
}

std::vector<double> grid_weights(const AtomicMeasure& nu, int K) {
    // Exact for measures already supported on D_K.
    return bin_mean_preserving(nu, K);
}

double grid_wasserstein(const std::vector<double>& a, const std::vector<double>& b, int K) {
    const double h = std::ldexp(1.0, -K);
    double fa = 0.0, fb = 0.0, acc = 0.0;
    for (std::size_t k = 0; k + 1 < a.size(); ++k) {
        fa += a[k];
        fb += b[k];
        acc += std::abs(fa - fb) * h;
    }
    return acc;
}

}  // namespace

AtomicMeasure gamma_map_binned(const AtomicMeasure& mu, const ModelParams& prm, long n_samples, int K,
                               std::uint64_t seed) {
    return grid_measure(gamma_binned_weights(mu, prm, n_samples, K, seed), K);
}

double xlogx_kernel(double z, const ModelParams& prm) {
    const double a = prm.c + prm.delta * z;
    return a * std::log(a);
}

std::vector<McValue> psi_gateaux_grid(const AtomicMeasure& mu, const std::vector<double>& xs,
                                      const ModelParams& prm, long n_mc, std::uint64_t seed) {
    GammaSamples gs = gamma_samples(mu, prm, n_mc, seed, true);
    const long n_plus = n_mc / 2;
    std::vector<McValue> out;
    for (double x : xs) {
        if (std::abs(x) > 1.0) throw std::invalid_argument("|x| must not exceed 1");
        RunningStats st[2];
        for (std::size_t k = 0; k < gs.m.size(); ++k)
            st[static_cast<long>(k) < n_plus ? 0 : 1].add(xlogx_kernel(gs.m[k] * x, prm));
        McValue v;
        v.n = n_mc;
        const double p = prm.p;
        v.value = p * st[0].mean() + (1.0 - p) * st[1].mean() - prm.c - prm.delta * prm.mbar() * x;
        v.se = std::sqrt(p * p * st[0].std_error() * st[0].std_error() +
                         (1.0 - p) * (1.0 - p) * st[1].std_error() * st[1].std_error());
        out.push_back(v);
    }
    return out;
}

McValue psi_gateaux_density(const AtomicMeasure& mu, double x, const ModelParams& prm, long n_mc,
                            std::uint64_t seed) {
    return psi_gateaux_grid(mu, {x}, prm, n_mc, seed)[0];
}

FixedPointSolution fixed_point_from(double t, const AtomicMeasure& mu, const ModelParams& prm,
                                    const AtomicMeasure& start, const std::string& name,
                                    const FixedPointOptions& opts) {
    if (t < 0.0) throw std::invalid_argument("t must be non-negative");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
    const int K = opts.K;
    FixedPointSolution sol;
    sol.start = name;
    std::vector<double> nu = grid_weights(start, K);
    auto gamma_at = [&](const std::vector<double>& w, std::uint64_t sd) {
        return gamma_binned_weights(mu + grid_measure(w, K).scaled(t), prm, opts.n_samples, K, sd);
    };
    if (t == 0.0) {
        std::vector<double> g = gamma_at(nu, opts.seed);
        sol.history.push_back(grid_wasserstein(g, nu, K));
        nu = g;
        sol.converged = true;
    } else {
        for (int it = 0; it < opts.max_iter; ++it) {
            std::vector<double> g = gamma_at(nu, opts.seed);
            std::vector<double> next(nu.size());
            for (std::size_t k = 0; k < nu.size(); ++k) next[k] = (1.0 - opts.damping) * nu[k] + opts.damping * g[k];
            const double d = grid_wasserstein(next, nu, K);
            sol.history.push_back(d);
            nu = std::move(next);
            if (d < opts.tol) {
                sol.converged = true;
                break;
            }
        }
    }
    sol.nu = grid_measure(nu, K);
    sol.residual = grid_wasserstein(nu, gamma_at(nu, stream_seed(opts.seed, 0x7e57)), K);
    return sol;
}

std::vector<std::pair<std::string, std::vector<double>>> standard_starts(int K, double mean) {
    DyadicGrid grid(K);
    const std::size_t n = grid.size();
    std::vector<std::pair<std::string, std::vector<double>>> out;
    out.emplace_back("delta_mbar", bin_mean_preserving(AtomicMeasure::dirac(mean), K));
    out.emplace_back("uniform", std::vector<double>(n, 1.0 / n));
    std::vector<double> up(n), down(n);
    for (std::size_t k = 0; k < n; ++k) {
        up[k] = 1.0 + grid.point(k) + 1e-3;
        down[k] = 1.0 - grid.point(k) + 1e-3;
    }
    const double su = std::accumulate(up.begin(), up.end(), 0.0), sd = std::accumulate(down.begin(), down.end(), 0.0);
    for (auto& v : up) v /= su;
    for (auto& v : down) v /= sd;
    out.emplace_back("skew_plus", up);
    out.emplace_back("skew_minus", down);
    return out;
}

FixedPointReport fixed_point(double t, const AtomicMeasure& mu, const ModelParams& prm,
                             const FixedPointOptions& opts) {
    FixedPointReport rep;
    for (const auto& [name, w] : standard_starts(opts.K, prm.mbar()))
        rep.runs.push_back(fixed_point_from(t, mu, prm, grid_measure(w, opts.K), name, opts));
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
        if (!rep.runs[i].converged) continue;
        const auto wi = grid_weights(rep.runs[i].nu, opts.K);
        bool dup = false;
        for (std::size_t j : rep.distinct)
            if (grid_wasserstein(wi, grid_weights(rep.runs[j].nu, opts.K), opts.K) < opts.distinct_tol) dup = true;
        if (!dup) rep.distinct.push_back(i);
    }
    return rep;
}

double pair_entropy(const AtomicMeasure& nu, const ModelParams& prm) {
    double acc = 0.0;
    for (const auto& a : nu.atoms())
        for (const auto& b : nu.atoms()) acc += a.weight * b.weight * xlogx_kernel(a.position * b.position, prm);
    return acc;
}

McValue parisi(const AtomicMeasure& nu, const ModelParams& prm, long n_mc, std::uint64_t seed) {
    if (std::abs(nu.mass() - 1.0) > 1e-9) throw std::invalid_argument("Parisi functional needs a probability measure");
    McValue v = psi(nu, prm, n_mc, seed);
    const double mbar = prm.mbar();
    v.value += 0.5 * prm.c + 0.5 * prm.delta * mbar * mbar - 0.5 * pair_entropy(nu, prm);
    return v;
}

McValue parisi_finite_n(const AtomicMeasure& nu, const ModelParams& prm, int n_disorder, std::uint64_t seed) {
    if (std::abs(nu.mass() - 1.0) > 1e-9) throw std::invalid_argument("Parisi functional needs a probability measure");
    FreeEnergyResult f = free_energy_t0(prm, nu, n_disorder, seed);
    const double mbar = prm.mbar();
    McValue v;
    v.value = f.value + 0.5 * prm.c + 0.5 * prm.delta * mbar * mbar - 0.5 * pair_entropy(nu, prm);
    v.se = f.std_error;
    v.n = n_disorder;
    return v;
}

std::vector<double> project_simplex(const std::vector<double>& v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double acc = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        acc += u[k];
        const double th = (acc - 1.0) / static_cast<double>(k + 1);
        if (k + 1 == u.size() || u[k + 1] <= th) {
            theta = th;
            break;
        }
    }
    std::vector<double> w(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) w[k] = std::max(v[k] - theta, 0.0);
    return w;
}

std::vector<double> project_mean_slice(const std::vector<double>& v, const std::vector<double>& k, double mean) {
    if (v.size() != k.size() || v.empty()) throw std::invalid_argument("size mismatch");
    const double kmin = *std::min_element(k.begin(), k.end()), kmax = *std::max_element(k.begin(), k.end());
    if (!(mean >= kmin && mean <= kmax)) throw std::invalid_argument("mean constraint is infeasible on this grid");
    auto at = [&](double beta) {
        std::vector<double> s(v.size());
        for (std::size_t a = 0; a < v.size(); ++a) s[a] = v[a] - beta * k[a];
        return project_simplex(s);
    };
    auto mean_of = [&](const std::vector<double>& w) {
        double m = 0.0;
        for (std::size_t a = 0; a < w.size(); ++a) m += w[a] * k[a];
        return m;
    };
    // The mean of the projection is nonincreasing in beta.
    double lo = -1.0, hi = 1.0;
    while (mean_of(at(lo)) < mean && lo > -1e15) lo *= 2.0;
    while (mean_of(at(hi)) > mean && hi < 1e15) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (mean_of(at(mid)) > mean)
            lo = mid;
        else
            hi = mid;
    }
    std::vector<double> wl = at(lo), wh = at(hi);
    const double ml = mean_of(wl), mh = mean_of(wh);
    // Interpolate between the bracketing projections; both lie on the simplex.
    const double lam = ml != mh ? (ml - mean) / (ml - mh) : 0.0;
    std::vector<double> w(v.size());
    for (std::size_t a = 0; a < w.size(); ++a) w[a] = (1.0 - lam) * wl[a] + lam * wh[a];
    return w;
}

std::vector<double> grid_objective_gradient(const GridObjective& obj, const ModelParams& prm,
                                            const std::vector<double>& w, int K, long n, int bins,
                                            std::uint64_t seed) {
    DyadicGrid grid(K);
    const std::size_t d = grid.size();
    AtomicMeasure rho = obj.base + grid_measure(w, K).scaled(obj.scale);
    GammaSamples gs = gamma_samples(rho, prm, n, seed, true);
    std::vector<double> bw(bins, 0.0), bm(bins, 0.0);
    for (std::size_t s = 0; s < gs.m.size(); ++s) {
        int b = static_cast<int>((gs.m[s] + 1.0) * 0.5 * bins);
        b = std::clamp(b, 0, bins - 1);
        bw[b] += gs.weight[s];
        bm[b] += gs.weight[s] * gs.m[s];
    }
    std::vector<double> grad(d, 0.0);
    const double mbar = prm.mbar();
    for (std::size_t a = 0; a < d; ++a) {
        const double x = grid.point(a);
        double e = 0.0;
        for (int b = 0; b < bins; ++b)
            if (bw[b] > 0.0) e += bw[b] * xlogx_kernel(bm[b] / bw[b] * x, prm);
        double q = 0.0;
        for (std::size_t c = 0; c < d; ++c)
            if (w[c] != 0.0) q += w[c] * obj.kernel(x * grid.point(c));
        grad[a] = obj.scale * (e - prm.c - prm.delta * mbar * x) - obj.coef * q;
    }
    return grad;
}

namespace {

McValue grid_objective_value(const GridObjective& obj, const ModelParams& prm, const std::vector<double>& w, int K,
                             long n, std::uint64_t seed) {
    DyadicGrid grid(K);
    AtomicMeasure rho = obj.base + grid_measure(w, K).scaled(obj.scale);
    McValue v = psi(rho, prm, n, seed);
    double quad = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        if (w[a] == 0.0) continue;
        for (std::size_t b = 0; b < w.size(); ++b)
            if (w[b] != 0.0) quad += w[a] * w[b] * obj.kernel(grid.point(a) * grid.point(b));
    }
    v.value += obj.constant - 0.5 * obj.coef * quad;
    return v;
}

std::vector<double> project_for(const GridObjective& obj, const std::vector<double>& v, int K) {
    if (!obj.mean_constraint) return project_simplex(v);
    return project_mean_slice(v, DyadicGrid(K).points(), obj.mean);
}

double constraint_residual(const GridObjective& obj, const std::vector<double>& w, int K) {
    DyadicGrid grid(K);
    double mass = 0.0, mean = 0.0, neg = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        mass += w[a];
        mean += w[a] * grid.point(a);
        neg = std::max(neg, -w[a]);
    }
    double r = std::max(std::abs(mass - 1.0), neg);
    if (obj.mean_constraint) r = std::max(r, std::abs(mean - obj.mean));
    return r;
}

// Max over the support of |grad - affine fit| (mean constraint) or |grad - constant| (simplex).
double first_order_residual(const GridObjective& obj, const std::vector<double>& grad, const std::vector<double>& w,
                            int K) {
    DyadicGrid grid(K);
    std::vector<std::size_t> S;
    for (std::size_t a = 0; a < w.size(); ++a)
        if (w[a] > 1e-6) S.push_back(a);
    if (S.empty()) return 0.0;
    double alpha = 0.0, beta = 0.0;
    if (obj.mean_constraint && S.size() >= 2) {
        double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t a : S) {
            const double x = grid.point(a), y = grad[a];
            sw += w[a];
            sx += w[a] * x;
            sy += w[a] * y;
            sxx += w[a] * x * x;
            sxy += w[a] * x * y;
        }
        const double den = sw * sxx - sx * sx;
        beta = den > 0.0 ? (sw * sxy - sx * sy) / den : 0.0;
        alpha = (sy - beta * sx) / sw;
    } else {
        double sw = 0, sy = 0;
        for (std::size_t a : S) {
            sw += w[a];
            sy += w[a] * grad[a];
        }
        alpha = sy / sw;
    }
    double r = 0.0;
    for (std::size_t a : S) r = std::max(r, std::abs(grad[a] - alpha - beta * grid.point(a)));
    return r;
}

}  // namespace

VariationalResult maximize_on_grid(const GridObjective& obj, const ModelParams& prm,
                                   const std::vector<std::pair<std::string, std::vector<double>>>& starts,
                                   const OptimizerOptions& opts) {
    const int K = opts.K;
    const std::size_t d = DyadicGrid(K).size();
    const std::uint64_t grad_seed = stream_seed(opts.seed, 1), value_seed = stream_seed(opts.seed, 2);
    VariationalResult res;
    std::vector<double> best_w;
    double best_val = -1e300;
    for (std::size_t r = 0; r < starts.size(); ++r) {
        if (starts[r].second.size() != d) throw std::invalid_argument("start has the wrong dimension");
        std::vector<double> w = project_for(obj, starts[r].second, K);
        McValue val = grid_objective_value(obj, prm, w, K, opts.n_value, value_seed);
        double eta = opts.step;
        for (int it = 0; it < opts.max_iter; ++it) {
            std::vector<double> g = grid_objective_gradient(obj, prm, w, K, opts.n_grad, opts.gamma_bins, grad_seed);
            bool accepted = false;
            while (eta > 1e-8 * opts.step) {
                std::vector<double> trial(d);
                for (std::size_t a = 0; a < d; ++a) trial[a] = w[a] + eta * g[a];
                trial = project_for(obj, trial, K);
                McValue tv = grid_objective_value(obj, prm, trial, K, opts.n_value, value_seed);
                if (tv.value >= val.value) {
                    double move = 0.0;
                    for (std::size_t a = 0; a < d; ++a) move = std::max(move, std::abs(trial[a] - w[a]));
                    w = std::move(trial);
                    val = tv;
                    eta = std::min(eta * 1.5, 1e3 * opts.step);
                    accepted = move > 1e-12;
                    break;
                }
                eta *= 0.5;
            }
            res.trace.push_back({static_cast<int>(r), it, val.value, val.se, constraint_residual(obj, w, K), eta});
            if (!accepted) break;
        }
        res.restart_names.push_back(starts[r].first);
        res.restart_values.push_back(val.value);
        if (val.value > best_val) {
            best_val = val.value;
            best_w = w;
            res.best_restart = static_cast<int>(r);
        }
    }
    McValue fin = grid_objective_value(obj, prm, best_w, K, opts.n_final, stream_seed(opts.seed, 3));
    res.value = fin.value;
    res.se = fin.se;
    res.optimizer = grid_measure(best_w, K);
    std::vector<double> g =
        grid_objective_gradient(obj, prm, best_w, K, 4 * opts.n_grad, opts.gamma_bins, stream_seed(opts.seed, 4));
    res.first_order_residual = first_order_residual(obj, g, best_w, K);
    res.label = prm.delta <= 0.0 ? "proven" : "conjectural candidate";
    return res;
}

VariationalResult optimize_parisi(const ModelParams& prm, const OptimizerOptions& opts) {
    prm.validate();
    const double mbar = prm.mbar();
    GridObjective obj;
    obj.base = AtomicMeasure::zero();
    obj.scale = 1.0;
    obj.coef = 1.0;
    obj.constant = 0.5 * prm.c + 0.5 * prm.delta * mbar * mbar;
    obj.kernel = [prm](double z) { return xlogx_kernel(z, prm); };
    obj.mean_constraint = true;
    obj.mean = mbar;
    auto starts = standard_starts(opts.K, mbar);
    if (opts.include_fixed_point_start) {
        FixedPointOptions fo = opts.fixed_point;
        fo.K = opts.K;
        fo.seed = stream_seed(opts.seed, 5);
        AtomicMeasure uniform = grid_measure(starts[1].second, opts.K);
        FixedPointSolution fp = fixed_point_from(1.0, AtomicMeasure::zero(), prm, uniform, "uniform", fo);
        starts.emplace_back("fixed_point", grid_weights(fp.nu, opts.K));
    }
    return maximize_on_grid(obj, prm, starts, opts);
}

}  // namespace sbm
