#include "sbm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sbm {

double g(double z, const ModelParams& prm) {
    const double a = prm.c + prm.delta * z;
    return a * (std::log(a) - 1.0);
}

double g_series(double z, const ModelParams& prm, int terms) {
    const double c = prm.c;
    const double r = -prm.delta / c;
    double s = 0.0;
    double pw = r * z;
    for (int n = 2; n <= terms; ++n) {
        pw *= r * z;
        s += pw / (static_cast<double>(n) * (n - 1));
    }
    return (c + prm.delta * z) * std::log(c) + c * s - c;
}

double g_prime(double z, const ModelParams& prm) {
    return prm.delta * std::log(prm.c + prm.delta * z);
}

double g_second(double z, const ModelParams& prm) {
    return prm.delta * prm.delta / (prm.c + prm.delta * z);
}

double cone_function(const AtomicMeasure& mu, double x, const ModelParams& prm) {
    double s = 0.0;
    for (const auto& a : mu.atoms()) s += a.weight * g(x * a.position, prm);
    return s;
}

double c_infinity(const AtomicMeasure& mu, const ModelParams& prm) {
    double s = 0.0;
    for (const auto& a : mu.atoms())
        for (const auto& b : mu.atoms()) s += a.weight * b.weight * g(a.position * b.position, prm);
    return 0.5 * s;
}

double choose_b(const ModelParams& prm) {
    return 2.0 * prm.c * std::abs(std::log(prm.c)) + prm.c + 1.0;
}

double ShiftedKernel::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

ShiftedKernel shifted_matrix(int K, double b, const ModelParams& prm) {
    prm.validate();
    DyadicGrid grid(K);
    const auto n = static_cast<Eigen::Index>(grid.size());
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    ShiftedKernel sk;
    sk.params = prm;
    sk.b = b;
    sk.K = K;
    sk.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            sk.matrix(i, j) = (g(grid.point(i) * grid.point(j), prm) + b) / n2;
    double mn = std::min(g(-1.0, prm), g(1.0, prm));
    if (prm.delta != 0.0) {
        double zs = (1.0 - prm.c) / prm.delta;
        if (zs > -1.0 && zs < 1.0) mn = std::min(mn, g(zs, prm));
    }
    sk.min_shifted_g = mn + b;
    return sk;
}

ExtendedNonlinearity::ExtendedNonlinearity(ShiftedKernel kernel, double R, bool require_psd)
    : kernel_(std::move(kernel)), R_(R) {
    if (!(R > 0.0)) throw std::invalid_argument("R must be positive");
    if (!(kernel_.min_shifted_g > 0.0))
        throw std::invalid_argument("shift b must make g + b strictly positive");
    const double n = static_cast<double>(kernel_.dim());
    R_prime_ = R * n * n / kernel_.min_shifted_g;
    psd_ = kernel_.is_psd();
    if (require_psd && !psd_) throw std::invalid_argument("kernel matrix is not positive semidefinite");
}

namespace {

// Solves A z = rhs in place by Gaussian elimination with partial pivoting; false if singular.
bool solve_small(std::vector<double>& A, std::vector<double>& rhs, std::size_t m) {
    double scale = 0.0;
    for (double v : A) scale = std::max(scale, std::abs(v));
    const double tiny = 1e-13 * std::max(scale, 1e-300);
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(A[r * m + col]) > std::abs(A[piv * m + col])) piv = r;
        if (std::abs(A[piv * m + col]) <= tiny) return false;
        if (piv != col) {
            for (std::size_t k = 0; k < m; ++k) std::swap(A[col * m + k], A[piv * m + k]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (std::size_t r = col + 1; r < m; ++r) {
            double f = A[r * m + col] / A[col * m + col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < m; ++k) A[r * m + k] -= f * A[col * m + k];
            rhs[r] -= f * rhs[col];
        }
    }
    for (std::size_t i = m; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t k = i + 1; k < m; ++k) s -= A[i * m + k] * rhs[k];
        rhs[i] = s / A[i * m + i];
    }
    return true;
}

double objective(const std::vector<double>& y, const Eigen::MatrixXd& M, const std::vector<double>& x) {
    const std::size_t n = y.size();
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] == 0.0) continue;
        lin += y[i] * x[i];
        for (std::size_t j = 0; j < n; ++j) quad += x[i] * M(i, j) * x[j];
    }
    return lin - 0.5 * quad;
}

}  // namespace

double ExtendedNonlinearity::evaluate(const std::vector<double>& y, std::vector<double>* argmax) const {
    if (y.size() != kernel_.dim()) throw std::invalid_argument("gradient length does not match D_K");
    return kernel_.dim() <= 8 ? solve_faces(y, argmax) : solve_gradient(y, argmax);
}

double ExtendedNonlinearity::solve_faces(const std::vector<double>& y, std::vector<double>* argmax) const {
    const std::size_t n = kernel_.dim();
    const Eigen::MatrixXd& M = kernel_.matrix;
    const double cap = static_cast<double>(n) * R_prime_;
    double best = 0.0;
    std::vector<double> best_x(n, 0.0);
    std::vector<std::size_t> S;
    std::vector<double> A, rhs, x(n);
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        S.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) S.push_back(i);
        const std::size_t m = S.size();
        for (int with_cap = 0; with_cap < 2; ++with_cap) {
            const std::size_t sz = m + static_cast<std::size_t>(with_cap);
            A.assign(sz * sz, 0.0);
            rhs.assign(sz, 0.0);
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t b = 0; b < m; ++b) A[a * sz + b] = M(S[a], S[b]);
                rhs[a] = y[S[a]];
            }
            if (with_cap) {
                for (std::size_t a = 0; a < m; ++a) {
                    A[a * sz + m] = 1.0;
                    A[m * sz + a] = 1.0;
                }
                rhs[m] = cap;
            }
            if (!solve_small(A, rhs, sz)) continue;
            bool feasible = true;
            double total = 0.0;
            std::fill(x.begin(), x.end(), 0.0);
            for (std::size_t a = 0; a < m; ++a) {
                if (!(rhs[a] > 0.0)) { feasible = false; break; }
                x[S[a]] = rhs[a];
                total += rhs[a];
            }
            if (!feasible || total > cap * (1.0 + 1e-12)) continue;
            double v = objective(y, M, x);
            if (v > best) {
                best = v;
                best_x = x;
            }
        }
    }
    if (argmax) *argmax = best_x;
    return best;
}

double ExtendedNonlinearity::solve_gradient(const std::vector<double>& y, std::vector<double>* argmax) const {
    const std::size_t n = kernel_.dim();
    const Eigen::MatrixXd& M = kernel_.matrix;
    const double cap = static_cast<double>(n) * R_prime_;
    const double L = std::max(M.cwiseAbs().rowwise().sum().maxCoeff(), 1e-300);
    auto project = [&](std::vector<double>& v) {
        for (double& e : v) e = std::max(e, 0.0);
        double s = std::accumulate(v.begin(), v.end(), 0.0);
        if (s <= cap) return;
        std::vector<double> u = v;
        std::sort(u.begin(), u.end(), std::greater<>());
        double acc = 0.0, theta = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            acc += u[k];
            double th = (acc - cap) / static_cast<double>(k + 1);
            if (k + 1 == u.size() || u[k + 1] <= th) {
                theta = th;
                break;
            }
        }
        for (double& e : v) e = std::max(e - theta, 0.0);
    };
    auto grad = [&](const std::vector<double>& v, std::vector<double>& gr) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += M(i, j) * v[j];
            gr[i] = y[i] - s;
        }
    };
    std::vector<std::vector<double>> starts;
    starts.emplace_back(n, 0.0);
    starts.emplace_back(n, 1.0);
    for (std::size_t k = 0; k < n; k += std::max<std::size_t>(1, n / 4)) {
        std::vector<double> e(n, 0.0);
        e[k] = static_cast<double>(n);
        starts.push_back(e);
    }
    double best = 0.0;
    std::vector<double> best_x(n, 0.0);
    std::vector<double> gr(n), xn(n);
    for (auto x : starts) {
        project(x);
        std::vector<double> z = x;
        double tk = 1.0;
        double fx = objective(y, M, x);
        bool restarted = false;
        for (int it = 0; it < 20000; ++it) {
            grad(z, gr);
            for (std::size_t i = 0; i < n; ++i) xn[i] = z[i] + gr[i] / L;
            project(xn);
            double fn = objective(y, M, xn);
            if (fn < fx) {
                // Restart momentum when the objective decreases.
                if (restarted) break;
                restarted = true;
                z = x;
                tk = 1.0;
                continue;
            }
            restarted = false;
            double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
            for (std::size_t i = 0; i < n; ++i) z[i] = xn[i] + ((tk - 1.0) / tn) * (xn[i] - x[i]);
            tk = tn;
            bool done = fn - fx <= 1e-9 * std::max(1.0, std::abs(fn)) && it > 10;
            x = xn;
            fx = fn;
            if (done) break;
        }
        if (fx > best) {
            best = fx;
            best_x = x;
        }
    }
    if (argmax) *argmax = best_x;
    return best;
}

double extended_nonlinearity(const std::vector<double>& y, const ShiftedKernel& kernel, double R) {
    return ExtendedNonlinearity(kernel, R)(y);
}

}  // namespace sbm
