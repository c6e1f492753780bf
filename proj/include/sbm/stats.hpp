#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sbm {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// Welford accumulator.
class RunningStats {
public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double std_error() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    MeanSe summary() const { return {mean(), std_error(), n_}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

MeanSe mean_se(std::span<const double> xs);

// Paired difference a_i - b_i.
MeanSe paired_difference(std::span<const double> a, std::span<const double> b);

// Batch-means standard error of a correlated series; returns the mean and the SE.
// Also reports a crude integrated autocorrelation time through `tau_out` when non-null.
MeanSe batch_means(std::span<const double> series, std::size_t n_batches, double* tau_out = nullptr);

// Delete-one jackknife over rows; each row holds per-instance values, `stat` maps the
// column means to the statistic of interest.
MeanSe jackknife(const std::vector<std::vector<double>>& rows,
                 const std::function<double(const std::vector<double>&)>& stat);

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& nodes, std::vector<double>& weights);

double log_sum_exp(double a, double b);
double log_sum_exp(std::span<const double> xs);

}  // namespace sbm
