#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitmc/link.hpp"
#include "bitmc/matrix.hpp"
#include "bitmc/objective.hpp"
#include "bitmc/observation.hpp"
#include "bitmc/projection.hpp"
#include "bitmc/svd.hpp"

namespace bitmc {

struct SolverOptions {
    int max_iters = 2000;
    double opt_tol = 1e-4;
    int history_len = 10;  // nonmonotone window
    double armijo = 1e-4;
    double backtrack = 0.5;
    double gamma_min = 1e-10;
    double gamma_max = 1e10;
    int max_backtracks = 20;
    std::optional<double> time_limit_s;
    AdmmOptions admm;               // used for box-constrained projections
    bool track_feasibility = true;  // per-iterate nuclear/box excess diagnostics

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("SolverOptions: max_iters must be >= 1");
        if (!(opt_tol > 0.0)) throw std::invalid_argument("SolverOptions: opt_tol must be > 0");
        if (history_len < 1) throw std::invalid_argument("SolverOptions: history_len must be >= 1");
        if (!(armijo > 0.0 && armijo < 1.0))
            throw std::invalid_argument("SolverOptions: armijo must lie in (0,1)");
        if (!(backtrack > 0.0 && backtrack < 1.0))
            throw std::invalid_argument("SolverOptions: backtrack must lie in (0,1)");
        if (!(gamma_min > 0.0 && gamma_min <= gamma_max))
            throw std::invalid_argument("SolverOptions: need 0 < gamma_min <= gamma_max");
    }
};

enum class StopReason { converged, max_iters, time_limit, line_search_failure, zero_gradient };

struct Solution {
    DenseMatrix x_hat;
    std::vector<double> objective_trace;  // objective at every accepted iterate
    double residual = 0.0;                // ||P(x - g) - x||_F / max(1, ||x||_F)
    int iterations = 0;
    bool converged = false;
    int linear_searches = 0;       // accepted steps per line-search kind
    int curvilinear_searches = 0;
    StopReason stop_reason = StopReason::converged;
    // diagnostics
    std::vector<double> sufficient_decrease_rhs;  // nonmonotone bound per accepted step
    std::size_t clamp_hits = 0;
    double max_nuclear_excess = 0.0;  // max over iterates of ||x||_* - tau
    double max_box_excess = 0.0;      // max over iterates of ||x||_inf - kappa
    double admm_eps_max = 0.0;        // largest stopping tolerance any iterate inherited
    double wall_ms = 0.0;
};

/// Barzilai-Borwein step length <s,s>/<s,y>, clamped to the safeguards;
/// nonpositive curvature falls back to gamma_max.
inline double spectral_step(const DenseMatrix& s, const DenseMatrix& y,
                            const SolverOptions& opts) {
    const double ss = frobenius_inner(s, s);
    const double sy = frobenius_inner(s, y);
    if (sy <= 0.0) return opts.gamma_max;
    return std::clamp(ss / sy, opts.gamma_min, opts.gamma_max);
}

/// Fixed-point residual of the projected-gradient map at unit step.
inline double optimality_residual(const DenseMatrix& x, const DenseMatrix& grad,
                                  const ConstraintSet& c, const AdmmOptions& admm = {}) {
    DenseMatrix moved = x;
    moved -= grad;
    const DenseMatrix projected = project(moved, c, admm);
    return frobenius_norm(projected - x) / std::max(1.0, frobenius_norm(x));
}

namespace detail {

struct ObsValues {
    std::vector<double> x_at;  // iterate entries at observed positions
    std::vector<double> d_at;  // direction entries at observed positions
};

inline void gather(const DenseMatrix& m, const ObservationSet& obs, std::vector<double>& out) {
    out.resize(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k)
        out[k] = m(obs.entries[k].i, obs.entries[k].j);
}

/// Objective along the linear trajectory, evaluated from observed entries
/// only; arithmetic identical to a full evaluation at x + alpha*d.
inline double nll_along(const ObsValues& v, double alpha, const ObservationSet& obs,
                        const Link& link) {
    std::vector<double> terms(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k) {
        const double xt = v.x_at[k] + alpha * v.d_at[k];
        const auto [log_p, log_q] = link.log_terms(xt);
        terms[k] = obs.entries[k].y > 0 ? -log_p : -log_q;
    }
    return pairwise_sum(terms);
}

}  // namespace detail

/// Spectral projected-gradient solve of
///   min over X in C of the negative log-likelihood of the observations,
/// where C is a nuclear ball, optionally intersected with an entrywise box.
inline Solution solve(const ObservationSet& obs, const Link& link, const ConstraintSet& c,
                      const SolverOptions& opts = {}) {
    opts.validate();
    obs.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const auto elapsed_s = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    Solution sol;
    DenseMatrix x(obs.d1, obs.d2);  // X0 = 0, feasible for any constraint set
    ObjectiveState st = objective_state(x, obs, link);
    sol.objective_trace.push_back(st.value);
    sol.clamp_hits += st.clamp_hits;

    // projections that produce iterates; box feasibility is only guaranteed
    // up to the stopping tolerance of the loosest one
    const auto tracked_project = [&](const DenseMatrix& v) {
        if (c.kappa) sol.admm_eps_max = std::max(sol.admm_eps_max, opts.admm.resolve_eps(v));
        return project(v, c, opts.admm);
    };

    const auto record_feasibility = [&](const DenseMatrix& xk) {
        if (!opts.track_feasibility) return;
        sol.max_nuclear_excess =
            std::max(sol.max_nuclear_excess, norm(xk, NormKind::nuclear) - c.tau);
        if (c.kappa) sol.max_box_excess = std::max(sol.max_box_excess, max_abs(xk) - *c.kappa);
    };

    const double g0_inf = max_abs(st.grad);
    if (g0_inf == 0.0) {
        sol.x_hat = std::move(x);
        sol.residual = 0.0;
        sol.converged = true;
        sol.stop_reason = StopReason::zero_gradient;
        sol.wall_ms = elapsed_s() * 1e3;
        return sol;
    }
    double gamma = std::clamp(1.0 / g0_inf, opts.gamma_min, opts.gamma_max);

    DenseMatrix best_x = x;
    double best_f = st.value;

    detail::ObsValues along;
    StopReason reason = StopReason::max_iters;
    bool residual_known = false;
    bool stagnant_step = false;
    int residual_cooldown = 0;

    for (int iter = 1; iter <= opts.max_iters; ++iter) {
        if (opts.time_limit_s && elapsed_s() > *opts.time_limit_s) {
            reason = StopReason::time_limit;
            break;
        }

        // projected-gradient direction
        DenseMatrix step = st.grad;
        step *= -gamma;
        step += x;
        DenseMatrix projected = tracked_project(step);
        DenseMatrix d = projected - x;
        const double d_norm = frobenius_norm(d);
        const double scale = std::max(1.0, frobenius_norm(x));

        // ||P(x - t g) - x|| is nondecreasing in t and ||.||/t nonincreasing,
        // so d_norm / min(1, gamma) bounds the unit-step residual from above.
        // Stagnating steps and a periodic sweep also trigger the exact check,
        // since the bound is loose when gamma is large.
        const bool cheap_bound_small = d_norm / std::min(1.0, gamma) <= opts.opt_tol * scale;
        if (residual_cooldown > 0) --residual_cooldown;
        if (cheap_bound_small ||
            (residual_cooldown == 0 && (stagnant_step || iter % 25 == 0))) {
            sol.residual = optimality_residual(x, st.grad, c, opts.admm);
            residual_known = true;
            if (sol.residual <= opts.opt_tol) {
                reason = StopReason::converged;
                break;
            }
            residual_cooldown = 10;
        }

        const std::size_t window =
            std::min<std::size_t>(opts.history_len, sol.objective_trace.size());
        double f_ref = -std::numeric_limits<double>::infinity();
        for (std::size_t k = sol.objective_trace.size() - window;
             k < sol.objective_trace.size(); ++k)
            f_ref = std::max(f_ref, sol.objective_trace[k]);

        const double gd = frobenius_inner(st.grad, d);

        bool accepted = false;
        bool used_curvilinear = false;
        DenseMatrix x_next;
        double f_next = 0.0, rhs_used = 0.0;

        if (gd < 0.0) {  // linear trajectory x + alpha*d
            detail::gather(x, obs, along.x_at);
            detail::gather(d, obs, along.d_at);
            double alpha = 1.0;
            for (int bt = 0; bt < opts.max_backtracks; ++bt) {
                const double ft = detail::nll_along(along, alpha, obs, link);
                const double rhs = f_ref + opts.armijo * alpha * gd;
                if (ft <= rhs) {
                    x_next = DenseMatrix(obs.d1, obs.d2);
                    for (Index t = 0; t < x.size(); ++t)
                        x_next.values()[t] = x.values()[t] + alpha * d.values()[t];
                    f_next = ft;
                    rhs_used = rhs;
                    accepted = true;
                    break;
                }
                alpha *= opts.backtrack;
            }
        }

        if (!accepted) {  // curvilinear trajectory P(x - alpha*gamma*g)
            used_curvilinear = true;
            double alpha = 1.0;
            for (int bt = 0; bt < opts.max_backtracks; ++bt) {
                DenseMatrix xt;
                if (bt == 0) {
                    xt = projected;  // alpha = 1 reuses the direction projection
                } else {
                    DenseMatrix moved = st.grad;
                    moved *= -alpha * gamma;
                    moved += x;
                    xt = tracked_project(moved);
                }
                const double delta = frobenius_inner(st.grad, xt - x);
                const double ft = neg_log_likelihood(xt, obs, link);
                const double rhs = f_ref + opts.armijo * delta;
                if (ft <= rhs && delta < 0.0) {
                    x_next = std::move(xt);
                    f_next = ft;
                    rhs_used = rhs;
                    accepted = true;
                    break;
                }
                alpha *= opts.backtrack;
            }
        }

        if (!accepted) {
            // both searches exhausted; this is expected at a solution, so
            // certify optimality before reporting a failure
            sol.residual = optimality_residual(x, st.grad, c, opts.admm);
            residual_known = true;
            reason = sol.residual <= opts.opt_tol ? StopReason::converged
                                                  : StopReason::line_search_failure;
            break;
        }

        ObjectiveState st_next = objective_state(x_next, obs, link);
        DenseMatrix s = x_next - x;
        DenseMatrix y = st_next.grad - st.grad;
        gamma = spectral_step(s, y, opts);
        stagnant_step = frobenius_norm(s) <= opts.opt_tol * std::max(1.0, frobenius_norm(x));

        x = std::move(x_next);
        st = std::move(st_next);
        sol.objective_trace.push_back(f_next);
        sol.sufficient_decrease_rhs.push_back(rhs_used);
        sol.clamp_hits += st.clamp_hits;
        (used_curvilinear ? sol.curvilinear_searches : sol.linear_searches) += 1;
        sol.iterations = iter;
        record_feasibility(x);
        residual_known = false;

        if (f_next < best_f) {
            best_f = f_next;
            best_x = x;
        }
    }

    if (reason != StopReason::converged &&
        (reason == StopReason::max_iters || reason == StopReason::time_limit)) {
        // return the lowest-objective iterate seen
        if (best_f < sol.objective_trace.back()) {
            x = std::move(best_x);
            st = objective_state(x, obs, link);
            residual_known = false;
        }
    }
    if (!residual_known) sol.residual = optimality_residual(x, st.grad, c, opts.admm);
    sol.converged = reason == StopReason::converged;
    sol.stop_reason = reason;
    sol.x_hat = std::move(x);
    sol.wall_ms = elapsed_s() * 1e3;
    return sol;
}

}  // namespace bitmc
