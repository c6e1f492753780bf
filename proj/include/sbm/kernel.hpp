#pragma once

#include "sbm/measures.hpp"
#include "sbm/params.hpp"

#include <Eigen/Dense>

#include <vector>

namespace sbm {

// g(z) = (c + delta z)(log(c + delta z) - 1).
double g(double z, const ModelParams& prm);
// Power-series form (c + delta z) log c + c sum_{n>=2} (-delta/c)^n z^n / (n(n-1)) - c.
double g_series(double z, const ModelParams& prm, int terms = 50);
double g_prime(double z, const ModelParams& prm);
double g_second(double z, const ModelParams& prm);

// G_mu(x) = integral of g(x y) dmu(y).
double cone_function(const AtomicMeasure& mu, double x, const ModelParams& prm);
// C_inf = (1/2) integral of G_mu dmu.
double c_infinity(const AtomicMeasure& mu, const ModelParams& prm);

double choose_b(const ModelParams& prm);

struct ShiftedKernel {
    ModelParams params;
    double b = 0.0;
    int K = 0;
    Eigen::MatrixXd matrix;    // (g(k k') + b) / |D_K|^2
    double min_shifted_g = 0;  // min over [-1,1] of g + b

    std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
    double min_eigenvalue() const;
    bool is_psd(double tol = 1e-10) const { return min_eigenvalue() >= -tol; }
};

ShiftedKernel shifted_matrix(int K, double b, const ModelParams& prm);

// H(y) = sup { y.x - x.G x / 2 : x >= 0, ||x||_1 <= R' }, R' = R |D_K|^2 / min(g + b).
// The maximization is global: faces of the feasible polytope are enumerated for
// dim <= 8, otherwise projected gradient with Nesterov restarts from several starts.
class ExtendedNonlinearity {
public:
    ExtendedNonlinearity(ShiftedKernel kernel, double R, bool require_psd = false);

    double operator()(const std::vector<double>& y) const { return evaluate(y, nullptr); }
    double evaluate(const std::vector<double>& y, std::vector<double>* argmax) const;

    double radius() const { return R_; }
    // R' of the feasible ball, in the normalized l1 norm.
    double feasible_radius() const { return R_prime_; }
    // Lipschitz constant in the dual norm: |H(y) - H(y')| <= R' ||y - y'||_{1,*}.
    double lipschitz() const { return R_prime_; }
    const ShiftedKernel& kernel() const { return kernel_; }
    bool kernel_psd() const { return psd_; }

private:
    double solve_faces(const std::vector<double>& y, std::vector<double>* argmax) const;
    double solve_gradient(const std::vector<double>& y, std::vector<double>* argmax) const;

    ShiftedKernel kernel_;
    double R_;
    double R_prime_;
    bool psd_;
};

double extended_nonlinearity(const std::vector<double>& y, const ShiftedKernel& kernel, double R);

}  // namespace sbm
