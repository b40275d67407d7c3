#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bitmc/io.hpp"
#include "bitmc/link.hpp"
#include "bitmc/matrix.hpp"
#include "bitmc/metrics.hpp"
#include "bitmc/objective.hpp"
#include "bitmc/observation.hpp"
#include "bitmc/projection.hpp"
#include "bitmc/rng.hpp"
#include "bitmc/solver.hpp"
#include "bitmc/svd.hpp"

namespace bitmc {

class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchemaVersion = 1;

/// Published reference accuracies of the raw-rating nuclear-norm baseline on
/// MovieLens 100k; kept for side-by-side reports, not recomputed here.
inline const std::map<double, double>& standard_mc_baseline_per_rating() {
    static const std::map<double, double> table = {
        {1.0, 0.64}, {2.0, 0.56}, {3.0, 0.44}, {4.0, 0.65}, {5.0, 0.75}};
    return table;
}
inline constexpr double kStandardMcBaselineOverall = 0.60;

enum class ExperimentKind { recover, sweep_sigma, sweep_n, recsys_eval };

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline double json_number(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ExperimentError(std::string("config: ") + key + " must be a number");
    return j[key].get<double>();
}

inline std::int64_t json_integer(const nlohmann::json& j, const char* key, std::int64_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer())
        throw ExperimentError(std::string("config: ") + key + " must be an integer");
    return j[key].get<std::int64_t>();
}

inline std::string json_string(const nlohmann::json& j, const char* key, std::string fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw ExperimentError(std::string("config: ") + key + " must be a string");
    return j[key].get<std::string>();
}

inline bool json_bool(const nlohmann::json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ExperimentError(std::string("config: ") + key + " must be a bool");
    return j[key].get<bool>();
}

inline SolverOptions parse_solver_options(const nlohmann::json& j) {
    SolverOptions opts;
    if (!j.is_object()) return opts;
    opts.max_iters = static_cast<int>(json_integer(j, "max_iters", opts.max_iters));
    opts.opt_tol = json_number(j, "opt_tol", opts.opt_tol);
    opts.history_len = static_cast<int>(json_integer(j, "history_len", opts.history_len));
    opts.armijo = json_number(j, "armijo", opts.armijo);
    opts.backtrack = json_number(j, "backtrack", opts.backtrack);
    opts.gamma_min = json_number(j, "gamma_min", opts.gamma_min);
    opts.gamma_max = json_number(j, "gamma_max", opts.gamma_max);
    opts.max_backtracks = static_cast<int>(json_integer(j, "max_backtracks", opts.max_backtracks));
    if (j.contains("time_limit_s")) opts.time_limit_s = json_number(j, "time_limit_s", 0.0);
    if (j.contains("admm") && j["admm"].is_object()) {
        const auto& a = j["admm"];
        opts.admm.mu0 = json_number(a, "mu0", opts.admm.mu0);
        opts.admm.growth = json_number(a, "growth", opts.admm.growth);
        opts.admm.max_iters = static_cast<int>(json_integer(a, "max_iters", opts.admm.max_iters));
        if (a.contains("eps")) opts.admm.eps = json_number(a, "eps", 0.0);
    }
    try {
        opts.validate();
    } catch (const std::invalid_argument& e) {
        throw ExperimentError(std::string("config: ") + e.what());
    }
    return opts;
}

inline nlohmann::json solver_options_json(const SolverOptions& o) {
    nlohmann::json j{{"max_iters", o.max_iters},         {"opt_tol", o.opt_tol},
                     {"history_len", o.history_len},     {"armijo", o.armijo},
                     {"backtrack", o.backtrack},         {"gamma_min", o.gamma_min},
                     {"gamma_max", o.gamma_max},         {"max_backtracks", o.max_backtracks},
                     {"admm",
                      {{"mu0", o.admm.mu0},
                       {"growth", o.admm.growth},
                       {"max_iters", o.admm.max_iters}}}};
    if (o.time_limit_s) j["time_limit_s"] = *o.time_limit_s;
    if (o.admm.eps) j["admm"]["eps"] = *o.admm.eps;
    return j;
}

inline nlohmann::json solution_json(const Solution& s) {
    return nlohmann::json{{"iterations", s.iterations},
                          {"residual", s.residual},
                          {"converged", s.converged},
                          {"objective", s.objective_trace.back()},
                          {"objective_trace", s.objective_trace},
                          {"linear_searches", s.linear_searches},
                          {"curvilinear_searches", s.curvilinear_searches},
                          {"clamp_hits", s.clamp_hits},
                          {"max_nuclear_excess", s.max_nuclear_excess},
                          {"max_box_excess", s.max_box_excess},
                          {"admm_eps_max", s.admm_eps_max},
                          {"wall_ms", s.wall_ms}};
}

/// Run indexed jobs on a small pool; results land in caller-owned slots so
/// output order never depends on scheduling.
template <typename Fn>
void run_pool(std::size_t jobs, int threads, Fn&& fn) {
    if (jobs == 0) return;
    unsigned n = threads > 0 ? static_cast<unsigned>(threads)
                             : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, jobs));
    if (n <= 1) {
        for (std::size_t k = 0; k < jobs; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= jobs) return;
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// τ = alpha * sqrt(r * d1 * d2), the nuclear-ball radius used throughout.
inline double nuclear_radius(double alpha, Index r, Index d1, Index d2) {
    return alpha * std::sqrt(static_cast<double>(r) * static_cast<double>(d1) *
                             static_cast<double>(d2));
}

// ---------------------------------------------------------------------------
// configuration

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::recover;
    std::uint64_t seed = 1;
    SolverOptions solver;
    bool debias = false;
    int threads = 0;
    std::string out_dir = "results";

    // problem geometry
    Index d1 = 0, d2 = 0;
    std::vector<Index> r_grid;  // sweep_n; single entry elsewhere
    double alpha = 1.0;
    std::optional<double> kappa;
    std::string link_spec = "logistic";

    // recover inputs
    std::optional<std::string> observations_path;
    bool synthetic = false;
    double n = 0.0;  // expected observation count for synthetic draws

    // sweeps
    std::vector<double> sigma_grid;
    std::vector<double> n_grid;
    int replicates = 1;
    bool run_box_program = false;      // program with the infinity-norm box
    bool run_nuclear_program = true;   // program with the nuclear ball only
    double sigma = 0.18;

    // recsys
    std::string ratings_path;
    RatingsFormat ratings_format = RatingsFormat::tsv_uirt;
    double holdout_fraction = 0.05;
    std::optional<double> threshold;

    Index r() const { return r_grid.empty() ? 1 : r_grid.front(); }

    nlohmann::json resolved;  // fully-defaulted config; hashed for provenance
    std::string config_hash;
};

namespace detail {

inline std::vector<double> default_sigma_grid() {
    std::vector<double> grid(9);
    for (int i = 0; i < 9; ++i) grid[i] = std::pow(10.0, -2.0 + 3.0 * i / 8.0);
    return grid;
}

inline void finish_config(ExperimentConfig& cfg, nlohmann::json resolved) {
    cfg.resolved = std::move(resolved);
    cfg.config_hash = hex64(fnv1a(cfg.resolved.dump()));
}

}  // namespace detail

/// Parse and validate an experiment config. Desk-scale defaults keep the
/// sweeps workstation-sized; paper_scale switches the defaulted dimensions
/// and replicate counts to the full-size study.
inline ExperimentConfig load_config(const nlohmann::json& j, bool paper_scale = false) {
    if (!j.is_object()) throw ExperimentError("config: expected a JSON object");
    const int version = static_cast<int>(detail::json_integer(j, "schema_version", kConfigSchemaVersion));
    if (version != kConfigSchemaVersion)
        throw ExperimentError("config: schema_version " + std::to_string(version) +
                              " is not supported (expected " +
                              std::to_string(kConfigSchemaVersion) + ")");
    const std::string kind = detail::json_string(j, "kind", "");
    ExperimentConfig cfg;
    if (kind == "recover")
        cfg.kind = ExperimentKind::recover;
    else if (kind == "sweep_sigma")
        cfg.kind = ExperimentKind::sweep_sigma;
    else if (kind == "sweep_n")
        cfg.kind = ExperimentKind::sweep_n;
    else if (kind == "recsys_eval")
        cfg.kind = ExperimentKind::recsys_eval;
    else
        throw ExperimentError("config: unknown kind '" + kind + "'");

    cfg.seed = static_cast<std::uint64_t>(detail::json_integer(j, "seed", 1));
    cfg.solver = detail::parse_solver_options(j.contains("solver") ? j["solver"] : nlohmann::json());
    cfg.debias = detail::json_bool(j, "debias", cfg.kind != ExperimentKind::recsys_eval &&
                                                    cfg.kind != ExperimentKind::recover);
    cfg.threads = static_cast<int>(detail::json_integer(j, "threads", 0));
    cfg.out_dir = detail::json_string(j, "out", "results");
    cfg.alpha = detail::json_number(j, "alpha", cfg.kind == ExperimentKind::recsys_eval ? 3.0 : 1.0);
    if (!(cfg.alpha > 0.0)) throw ExperimentError("config: alpha must be positive");
    if (j.contains("kappa")) cfg.kappa = detail::json_number(j, "kappa", 0.0);

    const Index default_d = cfg.kind == ExperimentKind::sweep_sigma ? (paper_scale ? 500 : 100)
                           : cfg.kind == ExperimentKind::sweep_n    ? (paper_scale ? 200 : 100)
                                                                    : 20;
    const Index d = static_cast<Index>(detail::json_integer(j, "d", default_d));
    cfg.d1 = static_cast<Index>(detail::json_integer(j, "d1", d));
    cfg.d2 = static_cast<Index>(detail::json_integer(j, "d2", d));
    if (cfg.kind != ExperimentKind::recsys_eval && (cfg.d1 <= 0 || cfg.d2 <= 0))
        throw ExperimentError("config: dimensions must be positive");

    if (j.contains("r_grid")) {
        if (!j["r_grid"].is_array() || j["r_grid"].empty())
            throw ExperimentError("config: r_grid must be a nonempty array");
        for (const auto& v : j["r_grid"]) cfg.r_grid.push_back(v.get<Index>());
    } else {
        const Index default_r = cfg.kind == ExperimentKind::recsys_eval ? 10
                                : cfg.kind == ExperimentKind::sweep_n   ? 3
                                                                        : 1;
        cfg.r_grid.push_back(static_cast<Index>(detail::json_integer(j, "r", default_r)));
    }
    for (Index r : cfg.r_grid)
        if (r < 1) throw ExperimentError("config: rank must be positive");

    cfg.link_spec = detail::json_string(j, "link", "logistic");
    try {
        parse_link(cfg.link_spec);  // fail early on bad spec
    } catch (const std::invalid_argument& e) {
        throw ExperimentError(std::string("config: ") + e.what());
    }

    const double cells = static_cast<double>(cfg.d1) * static_cast<double>(cfg.d2);
    const double n_fraction = detail::json_number(j, "n_fraction", 0.15);
    cfg.n = detail::json_number(j, "n", n_fraction * cells);

    switch (cfg.kind) {
        case ExperimentKind::recover: {
            cfg.synthetic = detail::json_bool(j, "synthetic", !j.contains("observations"));
            if (j.contains("observations"))
                cfg.observations_path = detail::json_string(j, "observations", "");
            if (!cfg.synthetic && !cfg.observations_path)
                throw ExperimentError("config: recover needs observations or synthetic=true");
            if (cfg.synthetic)
                cfg.n = detail::json_number(j, "n", detail::json_number(j, "n_fraction", 0.8) * cells);
            break;
        }
        case ExperimentKind::sweep_sigma: {
            if (j.contains("sigma_grid")) {
                if (!j["sigma_grid"].is_array() || j["sigma_grid"].empty())
                    throw ExperimentError("config: sigma_grid must be a nonempty array");
                for (const auto& v : j["sigma_grid"]) cfg.sigma_grid.push_back(v.get<double>());
            } else {
                cfg.sigma_grid = detail::default_sigma_grid();
            }
            for (double s : cfg.sigma_grid)
                if (!(s > 0.0)) throw ExperimentError("config: sigma values must be positive");
            cfg.replicates = static_cast<int>(detail::json_integer(j, "replicates", paper_scale ? 15 : 5));
            cfg.run_box_program = true;
            cfg.run_nuclear_program = true;
            if (j.contains("programs")) {
                if (!j["programs"].is_array() || j["programs"].empty())
                    throw ExperimentError("config: programs must be a nonempty array");
                cfg.run_box_program = false;
                cfg.run_nuclear_program = false;
                for (const auto& p : j["programs"]) {
                    const std::string name = p.get<std::string>();
                    if (name == "nuclear-box")
                        cfg.run_box_program = true;
                    else if (name == "nuclear")
                        cfg.run_nuclear_program = true;
                    else
                        throw ExperimentError("config: unknown program '" + name + "'");
                }
            }
            break;
        }
        case ExperimentKind::sweep_n: {
            if (j.contains("n_grid")) {
                if (!j["n_grid"].is_array() || j["n_grid"].empty())
                    throw ExperimentError("config: n_grid must be a nonempty array");
                for (const auto& v : j["n_grid"]) cfg.n_grid.push_back(v.get<double>());
            } else {
                nlohmann::json fractions = j.contains("n_fractions")
                                               ? j["n_fractions"]
                                               : nlohmann::json{0.15, 0.25, 0.35, 0.45, 0.6};
                for (const auto& v : fractions) cfg.n_grid.push_back(v.get<double>() * cells);
            }
            for (double n : cfg.n_grid)
                if (n < 0.0 || n > cells) throw ExperimentError("config: n must lie in [0, d1*d2]");
            cfg.replicates = static_cast<int>(detail::json_integer(j, "replicates", 5));
            cfg.sigma = detail::json_number(j, "sigma", 0.18);
            if (!(cfg.sigma > 0.0)) throw ExperimentError("config: sigma must be positive");
            break;
        }
        case ExperimentKind::recsys_eval: {
            cfg.ratings_path = detail::json_string(j, "ratings", "data/ml-100k/u.data");
            const std::string fmt = detail::json_string(j, "ratings_format", "tsv_uirt");
            if (fmt == "tsv_uirt")
                cfg.ratings_format = RatingsFormat::tsv_uirt;
            else if (fmt == "csv_uir")
                cfg.ratings_format = RatingsFormat::csv_uir;
            else
                throw ExperimentError("config: unknown ratings_format '" + fmt + "'");
            cfg.holdout_fraction = detail::json_number(j, "holdout_fraction", 0.05);
            if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0))
                throw ExperimentError("config: holdout_fraction must lie in (0,1)");
            if (j.contains("threshold")) cfg.threshold = detail::json_number(j, "threshold", 0.0);
            break;
        }
    }
    if (cfg.kind == ExperimentKind::sweep_sigma || cfg.kind == ExperimentKind::sweep_n) {
        if (cfg.replicates < 1) throw ExperimentError("config: replicates must be >= 1");
    }

    nlohmann::json resolved{{"schema_version", kConfigSchemaVersion},
                            {"kind", kind},
                            {"seed", cfg.seed},
                            {"debias", cfg.debias},
                            {"alpha", cfg.alpha},
                            {"link", cfg.link_spec},
                            {"solver", detail::solver_options_json(cfg.solver)}};
    if (cfg.kappa) resolved["kappa"] = *cfg.kappa;
    if (cfg.kind != ExperimentKind::recsys_eval) {
        resolved["d1"] = cfg.d1;
        resolved["d2"] = cfg.d2;
        resolved["r_grid"] = cfg.r_grid;
    }
    switch (cfg.kind) {
        case ExperimentKind::recover:
            resolved["synthetic"] = cfg.synthetic;
            resolved["n"] = cfg.n;
            if (cfg.observations_path) resolved["observations"] = *cfg.observations_path;
            break;
        case ExperimentKind::sweep_sigma:
            resolved["sigma_grid"] = cfg.sigma_grid;
            resolved["n"] = cfg.n;
            resolved["replicates"] = cfg.replicates;
            resolved["programs"] = nlohmann::json::array();
            if (cfg.run_box_program) resolved["programs"].push_back("nuclear-box");
            if (cfg.run_nuclear_program) resolved["programs"].push_back("nuclear");
            break;
        case ExperimentKind::sweep_n:
            resolved["n_grid"] = cfg.n_grid;
            resolved["sigma"] = cfg.sigma;
            resolved["replicates"] = cfg.replicates;
            break;
        case ExperimentKind::recsys_eval:
            resolved["ratings"] = cfg.ratings_path;
            resolved["ratings_format"] =
                cfg.ratings_format == RatingsFormat::tsv_uirt ? "tsv_uirt" : "csv_uir";
            resolved["holdout_fraction"] = cfg.holdout_fraction;
            if (cfg.threshold) resolved["threshold"] = *cfg.threshold;
            break;
    }
    detail::finish_config(cfg, std::move(resolved));
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path, bool paper_scale = false) {
    std::ifstream in(path);
    if (!in) throw ExperimentError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ExperimentError("config: " + path + ": " + e.what());
    }
    return load_config(j, paper_scale);
}

// ---------------------------------------------------------------------------
// per-cell execution shared by the sweep runners

struct CellRun {
    std::size_t param_index = 0;
    int replicate = 0;
    std::string program;  // "nuclear-box" or "nuclear"
    double sigma = 0.0;
    double n = 0.0;
    Index r = 0;
    double rel_fro_sq = 0.0;
    double hellinger_sq = 0.0;
    bool converged = false;
    double residual = 0.0;
    int iterations = 0;
    double max_nuclear_excess = 0.0;
    double max_box_excess = 0.0;
    double admm_eps_max = 0.0;
    double wall_ms = 0.0;
    bool errored = false;
    std::string error;
};

namespace detail {

struct CellProblem {
    DenseMatrix m;
    ObservationSet obs;
    Link link;
};

inline CellProblem make_cell_problem(Index d1, Index d2, Index r, double n, double sigma,
                                     RngSeed cell_seed) {
    CellProblem p{DenseMatrix(), ObservationSet{}, Link::probit(sigma)};
    p.m = synth_low_rank(d1, d2, r, substream(cell_seed, 0));
    const auto omega = sample_omega(d1, d2, n, substream(cell_seed, 1));
    p.obs = sample_observations(p.m, omega, p.link, substream(cell_seed, 2));
    return p;
}

inline void fill_cell_metrics(CellRun& cell, const Solution& sol, const CellProblem& prob,
                              Index r, bool debias) {
    const DenseMatrix m_hat = debias ? rank_truncate(sol.x_hat, r) : sol.x_hat;
    cell.rel_fro_sq = rel_fro_error(m_hat, prob.m);
    // distribution error uses the raw (non-truncated) estimate
    DenseMatrix p_true(prob.m.rows(), prob.m.cols());
    DenseMatrix p_hat(prob.m.rows(), prob.m.cols());
    for (Index t = 0; t < prob.m.size(); ++t) {
        p_true.values()[t] = prob.link.eval(prob.m.values()[t]);
        p_hat.values()[t] = prob.link.eval(sol.x_hat.values()[t]);
    }
    cell.hellinger_sq = hellinger_sq(ProbMatrix(std::move(p_true)), ProbMatrix(std::move(p_hat)));
    cell.converged = sol.converged;
    cell.residual = sol.residual;
    cell.iterations = sol.iterations;
    cell.max_nuclear_excess = sol.max_nuclear_excess;
    cell.max_box_excess = sol.max_box_excess;
    cell.admm_eps_max = sol.admm_eps_max;
    cell.wall_ms = sol.wall_ms;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// runners

struct RecoverResult {
    Solution solution;
    nlohmann::json result;
    std::string x_hat_path;
    std::string result_path;
};

inline RecoverResult run_recover(const ExperimentConfig& cfg) {
    const Link link = parse_link(cfg.link_spec);
    ObservationSet obs;
    std::optional<DenseMatrix> truth;
    if (cfg.observations_path) {
        obs = read_observations(*cfg.observations_path);
    } else {
        const RngSeed base{cfg.seed};
        truth = synth_low_rank(cfg.d1, cfg.d2, cfg.r(), substream(base, 0));
        const auto omega = sample_omega(cfg.d1, cfg.d2, cfg.n, substream(base, 1));
        obs = sample_observations(*truth, omega, link, substream(base, 2));
    }
    const double tau = nuclear_radius(cfg.alpha, cfg.r(), obs.d1, obs.d2);
    const ConstraintSet c = cfg.kappa ? ConstraintSet::nuclear_box(tau, *cfg.kappa)
                                      : ConstraintSet::nuclear_ball(tau);
    Solution sol = solve(obs, link, c, cfg.solver);
    DenseMatrix estimate = cfg.debias ? rank_truncate(sol.x_hat, cfg.r()) : sol.x_hat;

    nlohmann::json metrics;
    if (truth) {
        metrics["rel_fro_sq"] = rel_fro_error(estimate, *truth);
        DenseMatrix p_true(truth->rows(), truth->cols()), p_hat(truth->rows(), truth->cols());
        for (Index t = 0; t < truth->size(); ++t) {
            p_true.values()[t] = link.eval(truth->values()[t]);
            p_hat.values()[t] = link.eval(sol.x_hat.values()[t]);
        }
        metrics["hellinger_sq"] =
            hellinger_sq(ProbMatrix(std::move(p_true)), ProbMatrix(std::move(p_hat)));
    }

    std::filesystem::create_directories(cfg.out_dir);
    RecoverResult out;
    out.x_hat_path = (std::filesystem::path(cfg.out_dir) / "recovered.csv").string();
    out.result_path = (std::filesystem::path(cfg.out_dir) / "recover_result.json").string();
    write_matrix_csv(out.x_hat_path, estimate);
    out.result = nlohmann::json{{"config", cfg.resolved},
                                {"config_hash", cfg.config_hash},
                                {"seed", cfg.seed},
                                {"metrics", metrics},
                                {"solver", detail::solution_json(sol)}};
    write_result_json(out.result_path, out.result);
    out.solution = std::move(sol);
    return out;
}

struct SweepRow {
    Index r = 0;
    double param = 0.0;  // sigma or n
    std::string program;
    double mean_rel_fro_sq = 0.0;
    double mean_hellinger_sq = 0.0;
    int replicates = 0;
    int failed = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<CellRun> cells;
    std::string csv;
    nlohmann::json result;
    std::string csv_path;
    std::string result_path;
};

inline SweepResult run_sweep_sigma(const ExperimentConfig& cfg) {
    if (cfg.kind != ExperimentKind::sweep_sigma)
        throw ExperimentError("run_sweep_sigma: config kind mismatch");
    const Index r = cfg.r();
    const double tau = nuclear_radius(cfg.alpha, r, cfg.d1, cfg.d2);
    std::vector<std::string> programs;
    if (cfg.run_box_program) programs.push_back("nuclear-box");
    if (cfg.run_nuclear_program) programs.push_back("nuclear");
    if (programs.empty()) throw ExperimentError("config: no programs requested");

    const std::size_t points = cfg.sigma_grid.size();
    const std::size_t reps = static_cast<std::size_t>(cfg.replicates);
    std::vector<CellRun> cells(points * reps * programs.size());

    detail::run_pool(points * reps, cfg.threads, [&](std::size_t job) {
        const std::size_t p = job / reps;
        const int rep = static_cast<int>(job % reps);
        const double sigma = cfg.sigma_grid[p];
        const RngSeed cell_seed = substream(RngSeed{cfg.seed}, job);
        const auto prob = detail::make_cell_problem(cfg.d1, cfg.d2, r, cfg.n, sigma, cell_seed);
        for (std::size_t pr = 0; pr < programs.size(); ++pr) {
            CellRun& cell = cells[(p * reps + rep) * programs.size() + pr];
            cell.param_index = p;
            cell.replicate = rep;
            cell.program = programs[pr];
            cell.sigma = sigma;
            cell.n = cfg.n;
            cell.r = r;
            const ConstraintSet c = programs[pr] == "nuclear-box"
                                        ? ConstraintSet::nuclear_box(tau, cfg.alpha)
                                        : ConstraintSet::nuclear_ball(tau);
            try {
                const Solution sol = solve(prob.obs, prob.link, c, cfg.solver);
                detail::fill_cell_metrics(cell, sol, prob, r, cfg.debias);
            } catch (const std::exception& e) {  // a bad cell flags its row, never the sweep
                cell.errored = true;
                cell.error = e.what();
            }
        }
    });

    SweepResult out;
    for (std::size_t p = 0; p < points; ++p) {
        for (const auto& program : programs) {
            SweepRow row;
            row.r = r;
            row.param = cfg.sigma_grid[p];
            row.program = program;
            double acc_rel = 0.0, acc_hel = 0.0;
            int usable = 0;
            for (const auto& cell : cells) {
                if (cell.param_index != p || cell.program != program) continue;
                row.replicates += 1;
                if (cell.errored || !cell.converged) row.failed += 1;
                if (cell.errored) continue;
                acc_rel += cell.rel_fro_sq;
                acc_hel += cell.hellinger_sq;
                ++usable;
            }
            row.mean_rel_fro_sq = usable ? acc_rel / usable : std::nan("");
            row.mean_hellinger_sq = usable ? acc_hel / usable : std::nan("");
            out.rows.push_back(row);
        }
    }

    std::ostringstream csv;
    csv << "sigma,program,mean_rel_fro_sq,replicates,failed,seed,config_hash\n";
    for (const auto& row : out.rows)
        csv << detail::format_double(row.param) << "," << row.program << ","
            << detail::format_double(row.mean_rel_fro_sq) << "," << row.replicates << ","
            << row.failed << "," << cfg.seed << "," << cfg.config_hash << "\n";
    out.csv = csv.str();
    out.cells = std::move(cells);

    std::filesystem::create_directories(cfg.out_dir);
    out.csv_path = (std::filesystem::path(cfg.out_dir) / "sweep_sigma.csv").string();
    out.result_path = (std::filesystem::path(cfg.out_dir) / "sweep_sigma_result.json").string();
    {
        auto f = detail::open_output(out.csv_path);
        f << out.csv;
    }
    out.result = nlohmann::json{{"config", cfg.resolved},
                                {"config_hash", cfg.config_hash},
                                {"seed", cfg.seed},
                                {"csv", out.csv_path}};
    write_result_json(out.result_path, out.result);
    return out;
}

/// Least-squares slope of log(y) against log(x); null when fewer than two
/// usable points or any y is nonpositive.
inline std::optional<double> loglog_slope(const std::vector<double>& x,
                                          const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) return std::nullopt;
        lx.push_back(std::log(x[k]));
        ly.push_back(std::log(y[k]));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= lx.size();
    my /= ly.size();
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        num += (lx[k] - mx) * (ly[k] - my);
        den += (lx[k] - mx) * (lx[k] - mx);
    }
    if (den == 0.0) return std::nullopt;
    return num / den;
}

inline SweepResult run_sweep_n(const ExperimentConfig& cfg) {
    if (cfg.kind != ExperimentKind::sweep_n)
        throw ExperimentError("run_sweep_n: config kind mismatch");
    const std::size_t points = cfg.n_grid.size();
    const std::size_t reps = static_cast<std::size_t>(cfg.replicates);
    const std::size_t ranks = cfg.r_grid.size();
    std::vector<CellRun> cells(ranks * points * reps);
    const double total = static_cast<double>(cfg.d1) * static_cast<double>(cfg.d2);

    // One job per (rank, replicate): the whole n-grid shares that replicate's
    // ground truth, inclusion uniforms, and label uniforms, so the observed
    // sets are nested across the grid and the decay curve is read off a
    // common sample path. Each single point still follows the binomial
    // observation model exactly.
    detail::run_pool(ranks * reps, cfg.threads, [&](std::size_t job) {
        const std::size_t ri = job / reps;
        const int rep = static_cast<int>(job % reps);
        const Index r = cfg.r_grid[ri];
        const RngSeed rep_seed = substream(RngSeed{cfg.seed}, job);
        detail::CellProblem prob{DenseMatrix(), ObservationSet{}, Link::probit(cfg.sigma)};
        prob.m = synth_low_rank(cfg.d1, cfg.d2, r, substream(rep_seed, 0));
        std::vector<double> include_u(static_cast<std::size_t>(cfg.d1) * cfg.d2);
        std::vector<double> label_u(include_u.size());
        {
            Rng rng_inc(substream(rep_seed, 1));
            for (double& v : include_u) v = rng_inc.uniform01();
            Rng rng_lab(substream(rep_seed, 2));
            for (double& v : label_u) v = rng_lab.uniform01();
        }
        const double tau = nuclear_radius(cfg.alpha, r, cfg.d1, cfg.d2);
        const ConstraintSet c = cfg.kappa ? ConstraintSet::nuclear_box(tau, *cfg.kappa)
                                          : ConstraintSet::nuclear_ball(tau);
        for (std::size_t p = 0; p < points; ++p) {
            const double n = cfg.n_grid[p];
            const double inclusion = n / total;
            prob.obs = ObservationSet{cfg.d1, cfg.d2, {}};
            for (Index i = 0; i < cfg.d1; ++i)
                for (Index j = 0; j < cfg.d2; ++j) {
                    const std::size_t t = static_cast<std::size_t>(i) * cfg.d2 + j;
                    if (include_u[t] < inclusion)
                        prob.obs.entries.push_back(
                            {i, j, label_u[t] < prob.link.eval(prob.m(i, j)) ? 1 : -1});
                }
            CellRun& cell = cells[ri * points * reps + p * reps + rep];
            cell.param_index = ri * points + p;
            cell.replicate = rep;
            cell.program = cfg.kappa ? "nuclear-box" : "nuclear";
            cell.sigma = cfg.sigma;
            cell.n = n;
            cell.r = r;
            try {
                const Solution sol = solve(prob.obs, prob.link, c, cfg.solver);
                detail::fill_cell_metrics(cell, sol, prob, r, cfg.debias);
            } catch (const std::exception& e) {
                cell.errored = true;
                cell.error = e.what();
            }
        }
    });

    SweepResult out;
    nlohmann::json slopes = nlohmann::json::array();
    for (std::size_t ri = 0; ri < ranks; ++ri) {
        std::vector<double> ns, rels, hels;
        for (std::size_t p = 0; p < points; ++p) {
            SweepRow row;
            row.r = cfg.r_grid[ri];
            row.param = cfg.n_grid[p];
            row.program = cfg.kappa ? "nuclear-box" : "nuclear";
            double acc_rel = 0.0, acc_hel = 0.0;
            int usable = 0;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                const auto& cell = cells[ri * points * reps + p * reps + rep];
                row.replicates += 1;
                if (cell.errored || !cell.converged) row.failed += 1;
                if (cell.errored) continue;
                acc_rel += cell.rel_fro_sq;
                acc_hel += cell.hellinger_sq;
                ++usable;
            }
            row.mean_rel_fro_sq = usable ? acc_rel / usable : std::nan("");
            row.mean_hellinger_sq = usable ? acc_hel / usable : std::nan("");
            out.rows.push_back(row);
            ns.push_back(row.param);
            rels.push_back(row.mean_rel_fro_sq);
            hels.push_back(row.mean_hellinger_sq);
        }
        const auto rel_slope = loglog_slope(ns, rels);
        const auto hel_slope = loglog_slope(ns, hels);
        nlohmann::json entry{{"r", cfg.r_grid[ri]}};
        entry["rel_fro_slope"] = rel_slope ? nlohmann::json(*rel_slope) : nlohmann::json();
        entry["hellinger_slope"] = hel_slope ? nlohmann::json(*hel_slope) : nlohmann::json();
        slopes.push_back(entry);
    }

    std::ostringstream csv;
    csv << "r,n,mean_rel_fro_sq,mean_hellinger_sq,replicates,failed,seed,config_hash\n";
    for (const auto& row : out.rows)
        csv << row.r << "," << detail::format_double(row.param) << ","
            << detail::format_double(row.mean_rel_fro_sq) << ","
            << detail::format_double(row.mean_hellinger_sq) << "," << row.replicates << ","
            << row.failed << "," << cfg.seed << "," << cfg.config_hash << "\n";
    out.csv = csv.str();
    out.cells = std::move(cells);

    std::filesystem::create_directories(cfg.out_dir);
    out.csv_path = (std::filesystem::path(cfg.out_dir) / "sweep_n.csv").string();
    out.result_path = (std::filesystem::path(cfg.out_dir) / "sweep_n_result.json").string();
    {
        auto f = detail::open_output(out.csv_path);
        f << out.csv;
    }
    out.result = nlohmann::json{{"config", cfg.resolved},
                                {"config_hash", cfg.config_hash},
                                {"seed", cfg.seed},
                                {"slopes", slopes},
                                {"csv", out.csv_path}};
    write_result_json(out.result_path, out.result);
    return out;
}

struct RecsysResult {
    bool skipped = false;
    std::string skip_reason;
    AccuracyReport report;
    Solution solution;
    std::string csv;
    nlohmann::json result;
    std::string csv_path;
    std::string result_path;
};

inline RecsysResult run_recsys_eval(const ExperimentConfig& cfg) {
    if (cfg.kind != ExperimentKind::recsys_eval)
        throw ExperimentError("run_recsys_eval: config kind mismatch");
    RecsysResult out;
    if (!std::filesystem::exists(cfg.ratings_path)) {
        out.skipped = true;
        out.skip_reason = "skipped: dataset (" + cfg.ratings_path + " not found)";
        return out;
    }
    const RatingsTable table = parse_ratings(cfg.ratings_path, cfg.ratings_format);
    if (table.records.empty()) throw ExperimentError("recsys: ratings file has no records");
    const SplitObservations split =
        binarize_split(table, cfg.holdout_fraction, RngSeed{cfg.seed}, cfg.threshold);

    const Link link = parse_link(cfg.link_spec);
    const double tau = nuclear_radius(cfg.alpha, cfg.r(), table.d1, table.d2);
    const ConstraintSet c = cfg.kappa ? ConstraintSet::nuclear_box(tau, *cfg.kappa)
                                      : ConstraintSet::nuclear_ball(tau);
    Solution sol = solve(split.train, link, c, cfg.solver);
    out.report = sign_accuracy(sol.x_hat, split.holdout);

    std::ostringstream csv;
    csv << "method";
    for (const auto& [rating, frac] : out.report.per_rating) csv << "," << rating;
    csv << ",overall,seed,config_hash\n";
    csv << "binary-mle";
    for (const auto& [rating, frac] : out.report.per_rating) csv << "," << detail::format_double(frac);
    csv << "," << detail::format_double(out.report.overall) << "," << cfg.seed << ","
        << cfg.config_hash << "\n";
    csv << "standard-mc-reference";
    const auto& baseline = standard_mc_baseline_per_rating();
    for (const auto& [rating, frac] : out.report.per_rating) {
        csv << ",";
        const auto it = baseline.find(rating);
        if (it != baseline.end()) csv << detail::format_double(it->second);
    }
    csv << "," << detail::format_double(kStandardMcBaselineOverall) << "," << cfg.seed << ","
        << cfg.config_hash << "\n";
    out.csv = csv.str();

    nlohmann::json per_rating = nlohmann::json::object();
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [rating, frac] : out.report.per_rating) {
        per_rating[detail::format_double(rating)] = frac;
        counts[detail::format_double(rating)] = out.report.counts.at(rating);
    }

    std::filesystem::create_directories(cfg.out_dir);
    out.csv_path = (std::filesystem::path(cfg.out_dir) / "recsys_accuracy.csv").string();
    out.result_path = (std::filesystem::path(cfg.out_dir) / "recsys_result.json").string();
    {
        auto f = detail::open_output(out.csv_path);
        f << out.csv;
    }
    out.result = nlohmann::json{{"config", cfg.resolved},
                                {"config_hash", cfg.config_hash},
                                {"seed", cfg.seed},
                                {"metrics",
                                 {{"accuracy_report",
                                   {{"overall", out.report.overall},
                                    {"per_rating", per_rating},
                                    {"counts", counts}}},
                                  {"threshold", split.threshold}}},
                                {"solver", detail::solution_json(sol)}};
    write_result_json(out.result_path, out.result);
    out.solution = std::move(sol);
    return out;
}

}  // namespace bitmc
