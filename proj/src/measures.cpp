#include "sbm/measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbm {

namespace {

constexpr double kMergeTol = 1e-12;

void check_atom(double position, double weight) {
    if (!(position >= -1.0 && position <= 1.0))
        throw std::invalid_argument("atom position outside [-1, 1]");
    if (!(weight >= 0.0) || !std::isfinite(weight))
        throw std::invalid_argument("atom weight must be finite and non-negative");
}

bool is_probability(const AtomicMeasure& mu) { return std::abs(mu.mass() - 1.0) < 1e-9; }

}  // namespace

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    for (const auto& a : atoms_) check_atom(a.position, a.weight);
}

AtomicMeasure AtomicMeasure::dirac(double position, double weight) {
    return AtomicMeasure({{position, weight}});
}

double AtomicMeasure::mass() const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.weight;
    return m;
}

double AtomicMeasure::first_moment() const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.weight * a.position;
    return m;
}

double AtomicMeasure::mean() const {
    double m = mass();
    return m > 0.0 ? first_moment() / m : 0.0;
}

AtomicMeasure AtomicMeasure::normal_form() const {
    std::vector<Atom> sorted = atoms_;
    std::sort(sorted.begin(), sorted.end(),
              [](const Atom& a, const Atom& b) { return a.position < b.position; });
    std::vector<Atom> out;
    for (const auto& a : sorted) {
        if (a.weight == 0.0) continue;
        if (!out.empty() && a.position - out.back().position <= kMergeTol)
            out.back().weight += a.weight;
        else
            out.push_back(a);
    }
    AtomicMeasure m;
    m.atoms_ = std::move(out);
    return m;
}

AtomicMeasure AtomicMeasure::scaled(double factor) const {
    if (factor < 0.0) throw std::invalid_argument("negative scale factor");
    AtomicMeasure m = *this;
    for (auto& a : m.atoms_) a.weight *= factor;
    return m;
}

AtomicMeasure AtomicMeasure::operator+(const AtomicMeasure& other) const {
    AtomicMeasure m = *this;
    m.atoms_.insert(m.atoms_.end(), other.atoms_.begin(), other.atoms_.end());
    return m;
}

void AtomicMeasure::add(double position, double weight) {
    check_atom(position, weight);
    atoms_.push_back({position, weight});
}

DyadicGrid::DyadicGrid(int K) : K_(K) {
    if (K < 0 || K > 24) throw std::invalid_argument("dyadic scale K out of range");
    spacing_ = std::ldexp(1.0, -K);
    const long half = 1L << K;
    points_.reserve(static_cast<std::size_t>(2 * half));
    for (long i = -half; i < half; ++i) points_.push_back(static_cast<double>(i) * spacing_);
}

std::size_t DyadicGrid::cell(double x) const {
    long idx = static_cast<long>(std::floor((x + 1.0) / spacing_));
    idx = std::clamp(idx, 0L, static_cast<long>(points_.size()) - 1);
    return static_cast<std::size_t>(idx);
}

DyadicWeights project_to_dyadic(const AtomicMeasure& mu, int K) {
    DyadicGrid grid(K);
    DyadicWeights w{K, std::vector<double>(grid.size(), 0.0)};
    const double n = static_cast<double>(grid.size());
    for (const auto& a : mu.atoms()) w.x[grid.cell(a.position)] += n * a.weight;
    return w;
}

AtomicMeasure measure_from_weights(const DyadicWeights& w) {
    DyadicGrid grid(w.K);
    if (w.x.size() != grid.size()) throw std::invalid_argument("weights length does not match D_K");
    std::vector<Atom> atoms;
    const double n = static_cast<double>(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (w.x[k] != 0.0) atoms.push_back({grid.point(k), w.x[k] / n});
    return AtomicMeasure(std::move(atoms));
}

std::vector<double> bin_mean_preserving(const AtomicMeasure& mu, int K) {
    DyadicGrid grid(K);
    std::vector<double> w(grid.size(), 0.0);
    const double h = grid.spacing();
    const double top = grid.points().back();
    for (const auto& a : mu.atoms()) {
        if (a.position >= top) {
            w.back() += a.weight;
            continue;
        }
        std::size_t k = grid.cell(a.position);
        double frac = (a.position - grid.point(k)) / h;
        w[k] += a.weight * (1.0 - frac);
        w[k + 1] += a.weight * frac;
    }
    return w;
}

std::pair<double, AtomicMeasure> normalize(const AtomicMeasure& mu) {
    double m = mu.mass();
    if (m <= 0.0) return {0.0, AtomicMeasure::zero()};
    return {m, mu.scaled(1.0 / m)};
}

double norm_l1(const DyadicWeights& w) {
    double s = 0.0;
    for (double v : w.x) s += std::abs(v);
    return s / static_cast<double>(w.x.size());
}

double norm_l1_dual(const std::vector<double>& y, int K) {
    const double n = std::ldexp(2.0, K);
    double m = 0.0;
    for (double v : y) m = std::max(m, std::abs(v));
    return n * m;
}

double tv_distance(const AtomicMeasure& mu, const AtomicMeasure& nu) {
    AtomicMeasure diff = (mu + nu).normal_form();
    // Signed weights at each merged position.
    std::vector<double> pos;
    for (const auto& a : diff.atoms()) pos.push_back(a.position);
    std::vector<double> signed_w(pos.size(), 0.0);
    auto locate = [&](double x) {
        auto it = std::lower_bound(pos.begin(), pos.end(), x - kMergeTol);
        return static_cast<std::size_t>(it - pos.begin());
    };
    for (const auto& a : mu.atoms()) signed_w[locate(a.position)] += a.weight;
    for (const auto& a : nu.atoms()) signed_w[locate(a.position)] -= a.weight;
    double plus = 0.0, minus = 0.0;
    for (double v : signed_w) (v > 0.0 ? plus : minus) += std::abs(v);
    return std::max(plus, minus);
}

double wasserstein(const AtomicMeasure& mu, const AtomicMeasure& nu) {
    if (!is_probability(mu) || !is_probability(nu))
        throw std::invalid_argument("wasserstein requires probability measures");
    struct Event {
        double x;
        double dw;
    };
    std::vector<Event> ev;
    for (const auto& a : mu.atoms()) ev.push_back({a.position, a.weight});
    for (const auto& a : nu.atoms()) ev.push_back({a.position, -a.weight});
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.x < b.x; });
    double cdf_diff = 0.0, total = 0.0;
    for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
        cdf_diff += ev[i].dw;
        total += std::abs(cdf_diff) * (ev[i + 1].x - ev[i].x);
    }
    return total;
}

nlohmann::json to_json(const AtomicMeasure& mu) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : mu.atoms()) atoms.push_back({a.position, a.weight});
    return {{"atoms", atoms}};
}

AtomicMeasure measure_from_json(const nlohmann::json& j) {
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    return AtomicMeasure(std::move(atoms));
}

}  // namespace sbm
