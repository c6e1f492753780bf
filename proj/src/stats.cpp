#include "sbm/stats.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sbm {

MeanSe mean_se(std::span<const double> xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return s.summary();
}

MeanSe paired_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_difference: size mismatch");
    RunningStats s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] - b[i]);
    return s.summary();
}

MeanSe batch_means(std::span<const double> series, std::size_t n_batches, double* tau_out) {
    const std::size_t n = series.size();
    if (n_batches < 2 || n < 2 * n_batches) {
        MeanSe m = mean_se(series);
        if (tau_out) *tau_out = 1.0;
        return m;
    }
    const std::size_t len = n / n_batches;
    RunningStats batches;
    RunningStats all;
    for (std::size_t b = 0; b < n_batches; ++b) {
        double sum = 0.0;
        for (std::size_t k = b * len; k < (b + 1) * len; ++k) sum += series[k];
        batches.add(sum / static_cast<double>(len));
    }
    for (std::size_t k = 0; k < n_batches * len; ++k) all.add(series[k]);
    MeanSe out;
    out.mean = all.mean();
    out.n = n_batches * len;
    out.se = std::sqrt(batches.variance() / static_cast<double>(n_batches));
    if (tau_out) {
        double v = all.variance();
        *tau_out = v > 0.0 ? static_cast<double>(len) * batches.variance() / v : 1.0;
    }
    return out;
}

MeanSe jackknife(const std::vector<std::vector<double>>& rows,
                 const std::function<double(const std::vector<double>&)>& stat) {
    const std::size_t n = rows.size();
    if (n == 0) return {};
    const std::size_t d = rows.front().size();
    std::vector<double> total(d, 0.0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) total[j] += r[j];
    std::vector<double> means(d);
    for (std::size_t j = 0; j < d; ++j) means[j] = total[j] / static_cast<double>(n);
    MeanSe out;
    out.mean = stat(means);
    out.n = n;
    if (n < 2) return out;
    std::vector<double> loo(n);
    std::vector<double> m(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) m[j] = (total[j] - rows[i][j]) / static_cast<double>(n - 1);
        loo[i] = stat(m);
    }
    double avg = 0.0;
    for (double v : loo) avg += v;
    avg /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : loo) ss += (v - avg) * (v - avg);
    out.se = std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
    return out;
}

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) { p1 = x; p0 = 1.0; }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = 0.5 * (a + b) - 0.5 * (b - a) * x;
        weights[i] = (b - a) / ((1.0 - x * x) * dp * dp);
    }
}

double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) return -std::numeric_limits<double>::infinity();
    double m = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace sbm
