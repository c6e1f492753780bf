// sbmlab: batch driver for the free-energy, variational and HJ experiments.
#include "sbm/free_energy.hpp"
#include "sbm/hj_solver.hpp"
#include "sbm/inference.hpp"
#include "sbm/io.hpp"
#include "sbm/kernel.hpp"
#include "sbm/limit_functionals.hpp"
#include "sbm/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

using namespace sbm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kRunError = 1, kConfigError = 2, kCheckFailed = 3 };

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int sig) {
    g_interrupted = true;
    std::signal(sig, SIG_DFL);
}

bool interrupted() { return g_interrupted.load(); }

// Typed access to one JSON object; records requested keys so leftovers can be reported.
class Block {
public:
    Block(const json& j, std::string name, std::vector<std::string>& errors)
        : j_(j.is_null() ? json::object() : j), name_(std::move(name)), errors_(&errors) {
        if (!j_.is_object()) errors_->push_back(name_ + ": expected an object");
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        if (!j_.is_object() || !j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const std::exception&) {
            errors_->push_back(name_ + "." + key + ": wrong type");
            return fallback;
        }
    }

    void allow(const std::string& key) { used_.insert(key); }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    Block sub(const std::string& key) {
        used_.insert(key);
        return Block(has(key) ? j_.at(key) : json::object(), name_ + "." + key, *errors_);
    }

    // Vector-valued key that also accepts a scalar.
    template <class T>
    std::vector<T> list(const std::string& key, std::vector<T> fallback) {
        used_.insert(key);
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        try {
            if (v.is_array()) return v.get<std::vector<T>>();
            return {v.get<T>()};
        } catch (const std::exception&) {
            errors_->push_back(name_ + "." + key + ": wrong type");
            return fallback;
        }
    }

    std::optional<AtomicMeasure> measure(const std::string& key) {
        used_.insert(key);
        if (!has(key)) return std::nullopt;
        try {
            return measure_from_json(j_.at(key));
        } catch (const std::exception& e) {
            errors_->push_back(name_ + "." + key + ": " + e.what());
            return std::nullopt;
        }
    }

    void finish() const {
        if (!j_.is_object()) return;
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) errors_->push_back(name_ + "." + k + ": unknown key");
    }

    void error(const std::string& msg) const { errors_->push_back(name_ + ": " + msg); }

private:
    json j_;
    std::string name_;
    std::vector<std::string>* errors_;
    std::set<std::string> used_;
};

struct Context {
    std::string command;
    json config;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    fs::path out_dir;
    bool plot_data = false;
    std::string hash;
    Manifest manifest;
    std::chrono::steady_clock::time_point start;

    std::unique_ptr<CsvWriter> csv(const std::string& name, std::vector<std::string> columns, std::size_t ids = 0) {
        auto w = std::make_unique<CsvWriter>(out_dir / name, std::move(columns), hash, ids, plot_data);
        manifest.outputs.push_back(name);
        if (plot_data) manifest.outputs.push_back(fs::path(name).stem().string() + "_long.csv");
        return w;
    }

    void write_manifest_file() {
        manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (interrupted()) {
            manifest.partial = true;
            manifest.status = "interrupted";
        }
        write_manifest(out_dir / (command + "_manifest.json"), manifest);
    }
};

ModelParams read_model(Block& b, int N = 0) {
    ModelParams prm;
    prm.N = N;
    prm.c = b.get<double>("c", 3.0);
    prm.delta = b.get<double>("delta", -1.0);
    prm.p = b.get<double>("p", 0.5);
    return prm;
}

void check_model(const ModelParams& prm, Block& b) {
    for (const auto& v : prm.violations()) b.error(v);
}

// Finite-N constraints; skipped when the model itself is invalid, which is reported once.
void check_finite(const ModelParams& prm, Block& b) {
    if (!prm.violations().empty()) return;
    try {
        prm.validate_finite();
    } catch (const std::exception& e) {
        b.error("N=" + std::to_string(prm.N) + ": " + e.what());
    }
}

void check_measure(const std::optional<AtomicMeasure>& mu, Block& b) {
    if (!mu) return;
    for (const auto& a : mu->atoms())
        if (std::abs(a.position) > 1.0) b.error("measure atom outside [-1, 1]");
}

McmcOptions read_mcmc(Block b) {
    McmcOptions o;
    o.n_sweeps = b.get<long>("n_sweeps", o.n_sweeps);
    o.burn_in = b.get<long>("burn_in", o.burn_in);
    o.n_batches = b.get<int>("n_batches", o.n_batches);
    const std::string init = b.get<std::string>("init", "planted");
    if (init == "planted")
        o.init = McmcOptions::Init::planted;
    else if (init == "random")
        o.init = McmcOptions::Init::random;
    else
        b.error("init must be planted or random");
    try {
        o.validate();
    } catch (const std::exception& e) {
        b.error(e.what());
    }
    b.finish();
    return o;
}

OptimizerOptions read_optimizer(Block& b, std::uint64_t seed) {
    OptimizerOptions o;
    o.K = b.get<int>("K", o.K);
    o.max_iter = b.get<int>("max_iter", o.max_iter);
    o.n_grad = b.get<long>("n_grad", o.n_grad);
    o.n_value = b.get<long>("n_value", o.n_value);
    o.n_final = b.get<long>("n_final", o.n_final);
    o.step = b.get<double>("step", o.step);
    o.gamma_bins = b.get<int>("gamma_bins", o.gamma_bins);
    o.include_fixed_point_start = b.get<bool>("fixed_point_start", o.include_fixed_point_start);
    o.seed = seed;
    o.fixed_point.seed = stream_seed(seed, 17);
    if (o.K < 0 || o.K > 12) b.error("K must lie in [0, 12]");
    if (o.max_iter < 1) b.error("max_iter must be positive");
    if (o.n_grad < 2 || o.n_value < 2 || o.n_final < 2) b.error("sample sizes must be at least 2");
    if (!(o.step > 0.0)) b.error("step must be positive");
    if (o.gamma_bins < 1) b.error("gamma_bins must be positive");
    return o;
}

FixedPointOptions read_fixed_point(Block& b, std::uint64_t seed) {
    FixedPointOptions o;
    o.K = b.get<int>("K", o.K);
    o.damping = b.get<double>("damping", o.damping);
    o.max_iter = b.get<int>("max_iter", o.max_iter);
    o.tol = b.get<double>("tol", o.tol);
    o.n_samples = b.get<long>("n_samples", o.n_samples);
    o.distinct_tol = b.get<double>("distinct_tol", o.distinct_tol);
    o.seed = seed;
    if (o.K < 0 || o.K > 12) b.error("K must lie in [0, 12]");
    if (!(o.damping > 0.0 && o.damping <= 1.0)) b.error("damping must lie in (0, 1]");
    if (o.max_iter < 1) b.error("max_iter must be positive");
    if (o.n_samples < 2) b.error("n_samples must be at least 2");
    return o;
}

const char* const kCommandNames[] = {"estimate-mi", "variational", "hopf-lax", "solve-hj",
                                     "fixed-point", "diagnostics", "crosscheck"};

// Top-level block: one config file may carry blocks for several commands.
Block root_block(const Context& ctx, std::vector<std::string>& errors) {
    Block root(ctx.config, "config", errors);
    for (const char* name : kCommandNames) root.allow(name);
    root.allow("seed");
    return root;
}

// Each runner validates first and returns the validation errors; a non-empty list means nothing ran.
using Runner = int (*)(Context&, std::vector<std::string>&);

int run_estimate_mi(Context& ctx, std::vector<std::string>& errors) {
    Block root = root_block(ctx, errors);
    Block mb = root.sub("model");
    Block b = root.sub("estimate-mi");
    const ModelParams base = read_model(mb);
    const auto Ns = b.list<int>("N", {8, 10, 12});
    const auto ts = b.list<double>("t", {1.0});
    const AtomicMeasure mu = b.measure("mu").value_or(AtomicMeasure::zero());
    const std::string method = b.get<std::string>("method", "exact");
    const int n_disorder = b.get<int>("n_disorder", 200);
    const int n_nodes = b.get<int>("n_nodes", 6);
    const int n_pairs = b.get<int>("n_pairs", 0);
    McmcOptions mcmc = read_mcmc(b.sub("mcmc"));
    if (method != "exact" && method != "thermo") b.error("method must be exact or thermo");
    if (n_disorder < 2) b.error("n_disorder must be at least 2");
    if (n_nodes < 1) b.error("n_nodes must be positive");
    check_model(base, mb);
    for (int N : Ns) {
        ModelParams prm = base;
        prm.N = N;
        check_finite(prm, b);
        if (method == "exact" && N > kDefaultEnumerationCap) b.error("N exceeds the enumeration cap for exact");
    }
    for (double t : ts)
        if (!(t >= 0.0)) b.error("t must be non-negative");
    check_measure(mu, b);
    mb.finish();
    b.finish();
    root.finish();
    if (!errors.empty()) return kConfigError;

    auto out = ctx.csv("estimate_mi.csv", {"N", "t", "mass", "method", "free_energy", "free_energy_se", "mi", "mi_se",
                                           "mi_form", "mixing_warning"},
                       3);
    json summary = json::array();
    std::uint64_t task = 0;
    for (int N : Ns)
        for (double t : ts) {
            if (interrupted()) break;
            ModelParams prm = base;
            prm.N = N;
            const std::uint64_t seed = stream_seed(ctx.seed, task++);
            FreeEnergyResult fe;
            MiForm form = MiForm::paired;
            if (method == "exact") {
                fe = free_energy_exact(prm, t, mu, n_disorder, seed);
            } else {
                SamplerOptions so;
                so.method = N <= kDefaultEnumerationCap ? Method::exact : Method::mcmc;
                so.mcmc = mcmc;
                so.n_pairs = n_pairs;
                so.n_disorder = n_disorder;
                so.seed = seed;
                fe = free_energy_thermo(prm, t, mu, n_nodes, so);
                form = MiForm::finite_n;
            }
            MutualInformation mi = mutual_information(prm, fe, form, mu);
            out->row({static_cast<long long>(N), t, mu.mass(), fe.method, fe.value, fe.std_error, mi.value, mi.se,
                      std::string(form == MiForm::paired ? "paired" : "finite_n"),
                      static_cast<long long>(fe.mixing_warning)});
            summary.push_back({{"N", N}, {"t", t}, {"free_energy", fe.value}, {"mi", mi.value}});
        }
    ctx.manifest.summary["rows"] = summary;
    return kOk;
}

int run_variational(Context& ctx, std::vector<std::string>& errors) {
    Block root = root_block(ctx, errors);
    Block mb = root.sub("model");
    Block b = root.sub("variational");
    const ModelParams prm = read_model(mb);
    OptimizerOptions oo = read_optimizer(b, ctx.seed);
    check_model(prm, mb);
    mb.finish();
    b.finish();
    root.finish();
    if (!errors.empty()) return kConfigError;

    VariationalResult r = optimize_parisi(prm, oo);
    auto restarts = ctx.csv("variational_restarts.csv", {"restart", "start", "value"}, 2);
    for (std::size_t i = 0; i < r.restart_names.size(); ++i)
        restarts->row({static_cast<long long>(i), r.restart_names[i], r.restart_values[i]});
    auto opt = ctx.csv("variational_optimizer.csv", {"position", "weight"}, 1);
    for (const auto& a : r.optimizer.atoms()) opt->row({a.position, a.weight});
    auto trace = ctx.csv("variational_trace.csv",
                         {"restart", "iteration", "value", "se", "constraint_residual", "step"}, 2);
    for (const auto& tp : r.trace)
        trace->row({static_cast<long long>(tp.restart), static_cast<long long>(tp.iteration), tp.value, tp.se,
                    tp.constraint_residual, tp.step});
    ctx.manifest.summary = {{"value", r.value},
                            {"se", r.se},
                            {"first_order_residual", r.first_order_residual},
                            {"best_start", r.restart_names.at(r.best_restart)},
                            {"label", r.label}};
    std::cout << "Par sup = " << r.value << " +- " << r.se << " (" << r.label << ")\n";
    return kOk;
}

int run_hopf_lax(Context& ctx, std::vector<std::string>& errors) {
    Block root = root_block(ctx, errors);
    Block mb = root.sub("model");
    Block b = root.sub("hopf-lax");
    const ModelParams prm = read_model(mb);
    const auto ts = b.list<double>("t", {1.0});
    const AtomicMeasure mu = b.measure("mu").value_or(AtomicMeasure::zero());
    HopfLaxOptions ho;
    ho.optimizer = read_optimizer(b, ctx.seed);
    ho.K = ho.optimizer.K;
    check_model(prm, mb);
    check_measure(mu, b);
    for (double t : ts)
        if (!(t >= 0.0)) b.error("t must be non-negative");
    mb.finish();
    b.finish();
    root.finish();
    if (!errors.empty()) return kConfigError;

    auto out = ctx.csv("hopf_lax.csv", {"t", "K", "value", "se", "first_order_residual", "optimizer_mass_mean", "label"}, 2);
    auto nus = ctx.csv("hopf_lax_optimizers.csv", {"t", "position", "weight"}, 2);
    json summary = json::array();
    for (std::size_t i = 0; i < ts.size() && !interrupted(); ++i) {
        HopfLaxOptions o = ho;
        o.optimizer.seed = stream_seed(ctx.seed, i);
        VariationalResult r = hopf_lax(ts[i], mu, prm, o);
        out->row({ts[i], static_cast<long long>(ho.K), r.value, r.se, r.first_order_residual, r.optimizer.mean(),
                  r.label});
        for (const auto& a : r.optimizer.atoms()) nus->row({ts[i], a.position, a.weight});
        summary.push_back({{"t", ts[i]}, {"value", r.value}, {"se", r.se}, {"label", r.label}});
    }
    ctx.manifest.summary["rows"] = summary;
    return kOk;
}

int run_solve_hj(Context& ctx, std::vector<std::string>& errors) {
    Block root = root_block(ctx, errors);
    Block mb = root.sub("model");
    Block b = root.sub("solve-hj");
    HJGridSpec spec;
    spec.params = read_model(mb);
    spec.K = b.get<int>("K", 0);
    spec.b = b.get<double>("b", choose_b(spec.params));
    spec.R = b.get<double>("R", 0.0);
    spec.x_max = b.get<double>("x_max", 4.0);
    spec.h = b.get<double>("h", 0.05);
    spec.tau = b.get<double>("tau", 0.0);
    spec.T = b.get<double>("T", 1.0);
    spec.save_every = b.get<int>("save_every", 10);
    spec.require_psd = b.get<bool>("require_psd", false);
    const std::string boundary = b.get<std::string>("boundary", "neumann");
    if (boundary == "neumann")
        spec.boundary = Boundary::neumann;
    else if (boundary == "extrapolate")
        spec.boundary = Boundary::extrapolate;
    else
        b.error("boundary must be neumann or extrapolate");
    const auto evaluate = b.measure("mu");
    check_model(spec.params, mb);
    check_measure(evaluate, b);
    for (const auto& v : spec.violations()) b.error(v);
    mb.finish();
    b.finish();
    root.finish();
    if (!errors.empty()) return kConfigError;

    HJSolution sol = solve_grid(spec, shifted_initial_condition(spec.params, spec.K, spec.b));
    {
        std::ofstream os(ctx.out_dir / "solve_hj_slices.csv");
        sol.write_csv(os);
        ctx.manifest.outputs.push_back("solve_hj_slices.csv");
    }
    {
        json sj = to_json(spec);
        sj["tau"] = sol.tau;
        sj["R"] = sol.R;
        sj["feasible_radius"] = sol.feasible_radius;
        sj["n_steps"] = sol.n_steps;
        sj["kernel_psd"] = sol.kernel_psd;
        std::ofstream os(ctx.out_dir / "solve_hj_spec.json");
        os << sj.dump(2) << '\n';
        ctx.manifest.outputs.push_back("solve_hj_spec.json");
    }
    auto lip = ctx.csv("solve_hj_lipschitz.csv", {"t", "lipschitz"}, 1);
    for (std::size_t k = 0; k < sol.times.size(); ++k) lip->row({sol.times[k], sol.lipschitz[k]});
    ctx.manifest.summary = {{"tau", sol.tau}, {"n_steps", sol.n_steps}, {"kernel_psd", sol.kernel_psd}};
    if (evaluate) {
        DyadicWeights x = project_to_dyadic(*evaluate, spec.K);
        const double shifted = sol.final_value_at(x.x);
        const double shift = spec.b * norm_l1(x) + 0.5 * spec.b * spec.T;
        ctx.manifest.summary["assembled"] = {{"mu", to_json(*evaluate)}, {"shifted", shifted}, {"f", shifted - shift}};
        std::cout << "f(T, mu) = " << shifted - shift << "\n";
    }
    return kOk;
}

int run_fixed_point(Context& ctx, std::vector<std::string>& errors) {
    Block root = root_block(ctx, errors);
    Block mb = root.sub("model");
    Block b = root.sub("fixed-point");
    const ModelParams prm = read_model(mb);
    const double t = b.get<double>("t", 1.0);
    const AtomicMeasure mu = b.measure("mu").value_or(AtomicMeasure::zero());
    const long n_mc = b.get<long>("n_mc", 200000);
    FixedPointOptions fo = read_fixed_point(b, ctx.seed);
    check_model(prm, mb);
    check_measure(mu, b);
    if (!(t >= 0.0)) b.error("t must be non-negative");
    if (n_mc < 2) b.error("n_mc must be at least 2");
    mb.finish();
    b.finish();
    root.finish();
    if (!errors.empty()) return kConfigError;

    FixedPointReport rep = fixed_point(t, mu, prm, fo);
    CharacteristicsResult ch = characteristics_solve(t, mu, prm, n_mc, fo);
    auto runs = ctx.csv("fixed_point_runs.csv", {"run", "start", "converged", "iterations", "residual", "mean",
                                                 "distinct"},
                        2);
    auto nus = ctx.csv("fixed_point_measures.csv", {"run", "position", "weight"}, 1);
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
        const auto& r = rep.runs[i];
        const bool distinct = std::find(rep.distinct.begin(), rep.distinct.end(), i) != rep.distinct.end();
        runs->row({static_cast<long long>(i), r.start, static_cast<long long>(r.converged),
                   static_cast<long long>(r.history.size()), r.residual, r.nu.mean(), static_cast<long long>(distinct)});
        for (const auto& a : r.nu.atoms()) nus->row({static_cast<long long>(i), a.position, a.weight});
    }
    ctx.manifest.summary = {{"value", ch.value},
                            {"se", ch.se},
                            {"distinct_solutions", rep.distinct.size()},
                            {"multiple", ch.multiple},
                            {"converged", ch.converged},
                            {"label", ch.label}};
    std::cout << "characteristics value = " << ch.value << " +- " << ch.se << ", " << rep.distinct.size()
              << " distinct fixed point(s)\n";
    return kOk;
}

int run_diagnostics(Context& ctx, std::vector<std::string>& errors) {
    Block root = root_block(ctx, errors);
    Block mb = root.sub("model");
    Block b = root.sub("diagnostics");
    const ModelParams base = read_model(mb);
    Block nb = b.sub("nishimori");
    const int nN = nb.get<int>("N", 10);
    const double nt = nb.get<double>("t", 1.0);
    const AtomicMeasure nmu = nb.measure("mu").value_or(AtomicMeasure::dirac(0.5, 0.5));
    const int n_dis = nb.get<int>("n_disorder", 500);
    Block pb = b.sub("perturbation");
    const int pN = pb.get<int>("N", 64);
    const double pt = pb.get<double>("t", 1.0);
    const int n_inst = pb.get<int>("n_instances", 100);
    PerturbationSpec ps;
    ps.gamma = pb.get<double>("gamma", ps.gamma);
    ps.eta = pb.get<double>("eta", ps.eta);
    ps.K_plus = pb.get<int>("K_plus", ps.K_plus);
    ps.lambda = pb.list<double>("lambda", {});
    McmcOptions mcmc = read_mcmc(pb.sub("mcmc"));
    Block ab = b.sub("poisson_binomial");
    const auto aNs = ab.list<int>("N", {8, 12, 16});
    const int a_dis = ab.get<int>("n_disorder", 200);
    const double k_se = b.get<double>("k_se", 3.0);
    for (const auto& v : ps.violations()) pb.error(v);
    check_model(base, mb);
    ModelParams pn = base;
    pn.N = nN;
    check_finite(pn, nb);
    if (nN > kDefaultEnumerationCap) nb.error("N exceeds the enumeration cap");
    pn.N = pN;
    check_finite(pn, pb);
    for (int N : aNs) {
        pn.N = N;
        check_finite(pn, ab);
        if (N > kDefaultEnumerationCap) ab.error("N exceeds the enumeration cap");
    }
    if (n_dis < 2 || a_dis < 2) b.error("n_disorder must be at least 2");
    if (n_inst < 3) pb.error("n_instances must be at least 3");
    check_measure(nmu, nb);
    for (Block* x : {&mb, &nb, &pb, &ab, &b, &root}) x->finish();
    if (!errors.empty()) return kConfigError;

    auto out = ctx.csv("diagnostics.csv", {"identity", "lhs", "rhs", "residual", "bound", "se", "status"}, 1);
    auto emit = [&](const std::string& name, double lhs, double rhs, double residual, double bound, double se) {
        const bool ok = residual <= bound + k_se * se + 1e-12;
        out->row({name, lhs, rhs, residual, bound, se, std::string(ok ? "PASS" : "FAIL")});
    };
    ModelParams prm = base;
    prm.N = nN;
    for (const auto& r : nishimori_suite(prm, nt, nmu, n_dis, stream_seed(ctx.seed, 1)))
        emit("nishimori_" + r.name, r.lhs, r.rhs, r.residual, 0.0, r.se);
    if (!interrupted()) {
        prm.N = pN;
        std::vector<PerturbationStats> stats;
        for (int r = 0; r < n_inst && !interrupted(); ++r) {
            Instance inst = sample_instance(prm, pt, AtomicMeasure::zero(), ps, stream_seed(ctx.seed, 1000 + r));
            McmcOptions mo = mcmc;
            mo.seed = stream_seed(ctx.seed, 100000 + r);
            stats.push_back(perturbation_stats(inst, pN <= kDefaultEnumerationCap ? Method::exact : Method::mcmc, mo));
        }
        if (stats.size() >= 3) {
            auto rep = overlap_concentration_report(stats);
            emit("overlap_concentration", rep.R12_var.mean, 4 * rep.L0_var.mean,
                 std::max(0.0, -rep.overlap_margin.mean), 0.0, rep.overlap_margin.se);
            emit("gaussian_ibp", rep.ibp.lhs, rep.ibp.rhs, rep.ibp.residual, 0.0, rep.ibp.se);
            for (int k = 1; k <= std::min(3, ps.K_plus); ++k)
                for (int n = 1; n <= 2; ++n) {
                    auto f = franz_de_sanctis_residual(stats, k, n, FdsFunction::site_product, 64,
                                                       stream_seed(ctx.seed, 10 * k + n));
                    emit("franz_de_sanctis_k" + std::to_string(k) + "_n" + std::to_string(n), f.lhs_diff, 0.0,
                         f.lhs_diff, f.bound, f.combined_se());
                }
        }
    }
    for (int N : aNs) {
        if (interrupted()) break;
        prm.N = N;
        auto g = appendix_a_gap(prm, a_dis, stream_seed(ctx.seed, 2));
        out->row({"poisson_binomial_gap_N" + std::to_string(N), g.f_poisson, g.f_binomial, g.gap, 0.0, g.se,
                  std::string("INFO")});
    }
    return kOk;
}

int run_crosscheck(Context& ctx, std::vector<std::string>& errors) {
    Block root = root_block(ctx, errors);
    Block mb = root.sub("model");
    Block b = root.sub("crosscheck");
    ModelParams prm = read_model(mb);
    prm.N = b.get<int>("N", 300);
    const int n_disorder = b.get<int>("n_disorder", 40);
    const int n_nodes = b.get<int>("n_nodes", 6);
    const int n_pairs = b.get<int>("n_pairs", 4000);
    const double tol = b.get<double>("tolerance", 0.03);
    const double k_se = b.get<double>("k_se", 3.0);
    McmcOptions mcmc = read_mcmc(b.sub("mcmc"));
    OptimizerOptions oo = read_optimizer(b, ctx.seed);
    check_model(prm, mb);
    check_finite(prm, b);
    if (prm.delta > 0.0) mb.error("crosscheck needs delta <= 0");
    if (n_disorder < 2) b.error("n_disorder must be at least 2");
    if (n_nodes < 1) b.error("n_nodes must be positive");
    mb.finish();
    b.finish();
    root.finish();
    if (!errors.empty()) return kConfigError;

    SamplerOptions so;
    so.method = prm.N <= kDefaultEnumerationCap ? Method::exact : Method::mcmc;
    so.mcmc = mcmc;
    so.n_disorder = n_disorder;
    so.n_pairs = n_pairs;
    so.seed = stream_seed(ctx.seed, 1);
    FreeEnergyResult fe = free_energy_thermo(prm, 1.0, AtomicMeasure::zero(), n_nodes, so);
    struct Value {
        std::string name;
        double v, se;
    };
    std::vector<Value> vals{{"thermo_integration", fe.value, fe.std_error}};
    if (!interrupted()) {
        OptimizerOptions o = oo;
        o.seed = stream_seed(ctx.seed, 2);
        VariationalResult par = optimize_parisi(prm, o);
        vals.push_back({"parisi", par.value, par.se});
        if (!interrupted()) {
            auto parN = parisi_finite_n(par.optimizer, prm, 400, stream_seed(ctx.seed, 4));
            ctx.manifest.summary["interpolation_bound"] = {{"par_N", parN.value}, {"se", parN.se}};
        }
    }
    if (!interrupted()) {
        HopfLaxOptions ho;
        ho.optimizer = oo;
        ho.K = oo.K;
        ho.optimizer.seed = stream_seed(ctx.seed, 3);
        VariationalResult hl = hopf_lax(1.0, AtomicMeasure::zero(), prm, ho);
        vals.push_back({"hopf_lax", hl.value, hl.se});
    }
    auto values = ctx.csv("crosscheck_values.csv", {"method", "value", "se"}, 1);
    for (const auto& v : vals) values->row({v.name, v.v, v.se});
    auto pairs = ctx.csv("crosscheck_pairs.csv", {"a", "b", "difference", "allowed", "status"}, 2);
    bool ok = vals.size() == 3;
    for (std::size_t i = 0; i < vals.size(); ++i)
        for (std::size_t j = i + 1; j < vals.size(); ++j) {
            const double diff = std::abs(vals[i].v - vals[j].v);
            const double allowed = tol + k_se * std::hypot(vals[i].se, vals[j].se);
            const bool pass = diff <= allowed;
            ok = ok && pass;
            pairs->row({vals[i].name, vals[j].name, diff, allowed, std::string(pass ? "PASS" : "FAIL")});
            std::cout << vals[i].name << " vs " << vals[j].name << ": " << diff << " (allowed " << allowed << ") "
                      << (pass ? "PASS" : "FAIL") << "\n";
        }
    ctx.manifest.summary["agree"] = ok;
    return ok ? kOk : kCheckFailed;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path);
    return json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse two-community block model: free energies, variational formulas and HJ solvers"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all");
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    unsigned threads = 0;
    std::string out_dir = "out";
    bool plot_data = false;
    app.add_option("--config", config_path, "JSON configuration file")->envname("SBMLAB_CONFIG");
    app.add_option_function<std::uint64_t>(
           "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "Master seed (overrides config)")
        ->envname("SBMLAB_SEED");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->envname("SBMLAB_THREADS");
    app.add_option("--out-dir", out_dir, "Directory for CSV and manifest output")->envname("SBMLAB_OUT_DIR");
    app.add_flag("--emit-plot-data", plot_data, "Also write long-format copies of every table")
        ->envname("SBMLAB_EMIT_PLOT_DATA");

    const std::vector<std::pair<std::string, std::pair<std::string, Runner>>> commands = {
        {"estimate-mi", {"Free energy and mutual information sweep", run_estimate_mi}},
        {"variational", {"Maximize the Parisi functional over M_p", run_variational}},
        {"hopf-lax", {"Hopf-Lax value over probability measures", run_hopf_lax}},
        {"solve-hj", {"Dense-grid HJ solve for K <= 1", run_solve_hj}},
        {"fixed-point", {"Fixed points nu = Gamma(mu + t nu) and characteristic values", run_fixed_point}},
        {"diagnostics", {"Nishimori, overlap, Franz-de Sanctis and Poisson-binomial checks", run_diagnostics}},
        {"crosscheck", {"Thermodynamic integration vs Parisi vs Hopf-Lax", run_crosscheck}},
    };
    for (const auto& [name, info] : commands) app.add_subcommand(name, info.first);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    Context ctx;
    Runner runner = nullptr;
    for (const auto& [name, info] : commands)
        if (app.got_subcommand(name)) {
            ctx.command = name;
            runner = info.second;
        }
    try {
        ctx.config = load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    if (!ctx.config.is_object()) {
        std::cerr << "config error: top level must be an object\n";
        return kConfigError;
    }
    if (seed_given)
        ctx.config["seed"] = seed;
    else if (ctx.config.contains("seed") && ctx.config["seed"].is_number_unsigned())
        seed = ctx.config["seed"].get<std::uint64_t>();
    ctx.seed = seed;
    ctx.threads = threads;
    ctx.plot_data = plot_data;
    ctx.out_dir = out_dir;
    ctx.hash = config_hash(ctx.config);
    ctx.manifest.command = ctx.command;
    ctx.manifest.config = ctx.config;
    ctx.manifest.seed = seed;
    ctx.manifest.threads = threads;
    ctx.start = std::chrono::steady_clock::now();
    set_thread_count(threads);

    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) {
        std::cerr << "run error: cannot create " << out_dir << ": " << ec.message() << "\n";
        return kRunError;
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    std::vector<std::string> errors;
    int rc = kOk;
    try {
        rc = runner(ctx, errors);
    } catch (const std::exception& e) {
        std::cerr << "run error: " << e.what() << "\n";
        ctx.manifest.status = std::string("error: ") + e.what();
        ctx.manifest.partial = true;
        ctx.write_manifest_file();
        return kRunError;
    }
    if (rc == kConfigError) {
        std::cerr << "config error: " << errors.size() << " violation(s)\n";
        for (const auto& e : errors) std::cerr << "  - " << e << "\n";
        return kConfigError;
    }
    if (rc == kCheckFailed) ctx.manifest.status = "check_failed";
    ctx.write_manifest_file();
    if (interrupted()) {
        std::cerr << "interrupted; partial results flushed\n";
        return kRunError;
    }
    return rc;
}
