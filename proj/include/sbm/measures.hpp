#pragma once

#include <json.hpp>

#include <cstddef>
#include <utility>
#include <vector>

namespace sbm {

struct Atom {
    double position = 0.0;
    double weight = 0.0;
};

// Finite non-negative measure on [-1, 1] stored as weighted atoms.
class AtomicMeasure {
public:
    AtomicMeasure() = default;
    explicit AtomicMeasure(std::vector<Atom> atoms);

    static AtomicMeasure dirac(double position, double weight = 1.0);
    static AtomicMeasure zero() { return {}; }

    const std::vector<Atom>& atoms() const { return atoms_; }
    bool empty() const { return atoms_.empty(); }
    std::size_t size() const { return atoms_.size(); }

    double mass() const;
    // Unnormalized first moment, the integral of x dμ.
    double first_moment() const;
    // Mean of the normalized measure; 0 for the zero measure.
    double mean() const;

    // Sorted, merged (tolerance 1e-12), zero weights dropped.
    AtomicMeasure normal_form() const;

    AtomicMeasure scaled(double factor) const;
    AtomicMeasure operator+(const AtomicMeasure& other) const;

    void add(double position, double weight);

private:
    std::vector<Atom> atoms_;
};

class DyadicGrid {
public:
    explicit DyadicGrid(int K);
    int K() const { return K_; }
    std::size_t size() const { return points_.size(); }
    double spacing() const { return spacing_; }
    const std::vector<double>& points() const { return points_; }
    double point(std::size_t k) const { return points_[k]; }
    // Index of the half-open cell [k, k + 2^-K) containing x; x = 1 joins the last cell.
    std::size_t cell(double x) const;

private:
    int K_;
    double spacing_;
    std::vector<double> points_;
};

struct DyadicWeights {
    int K = 0;
    std::vector<double> x;
};

DyadicWeights project_to_dyadic(const AtomicMeasure& mu, int K);
AtomicMeasure measure_from_weights(const DyadicWeights& w);

// Probability weights on D_K that keep both the mass and the first moment of mu
// (each atom split linearly between its two neighbouring grid points; atoms above the
// last grid point go to it).
std::vector<double> bin_mean_preserving(const AtomicMeasure& mu, int K);

std::pair<double, AtomicMeasure> normalize(const AtomicMeasure& mu);

double norm_l1(const DyadicWeights& w);
double norm_l1_dual(const std::vector<double>& y, int K);

double tv_distance(const AtomicMeasure& mu, const AtomicMeasure& nu);
double wasserstein(const AtomicMeasure& mu, const AtomicMeasure& nu);

nlohmann::json to_json(const AtomicMeasure& mu);
AtomicMeasure measure_from_json(const nlohmann::json& j);

}  // namespace sbm
