#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "bitmc/link.hpp"
#include "bitmc/matrix.hpp"
#include "bitmc/observation.hpp"

namespace bitmc {

/// Value and gradient of the negative log-likelihood at one iterate.
/// grad is d1 x d2 with support inside the observed index set.
struct ObjectiveState {
    double value = 0.0;
    DenseMatrix grad;
    std::size_t clamp_hits = 0;  // log terms that hit the probability floor
};

namespace detail {

/// Order-independent pairwise-tree sum; keeps evaluations reproducible and
/// accurate at large observation counts.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline void require_dims(const DenseMatrix& x, const ObservationSet& obs) {
    if (x.rows() != obs.d1 || x.cols() != obs.d2)
        throw std::invalid_argument("objective: matrix dimensions do not match observations");
}

}  // namespace detail

/// -sum over observed entries of log f(x_ij) (y=+1) or log(1-f(x_ij)) (y=-1).
inline double neg_log_likelihood(const DenseMatrix& x, const ObservationSet& obs,
                                 const Link& link) {
    detail::require_dims(x, obs);
    std::vector<double> terms;
    terms.reserve(obs.size());
    for (const auto& e : obs.entries) {
        const auto [log_p, log_q] = link.log_terms(x(e.i, e.j));
        terms.push_back(e.y > 0 ? -log_p : -log_q);
    }
    return detail::pairwise_sum(terms);
}

/// Fused value and gradient in one pass over the observations.
inline ObjectiveState objective_state(const DenseMatrix& x, const ObservationSet& obs,
                                      const Link& link) {
    detail::require_dims(x, obs);
    ObjectiveState out;
    out.grad = DenseMatrix(obs.d1, obs.d2);
    const double floor_log = std::log(std::max(link.prob_floor(), 1e-300));
    std::vector<double> terms;
    terms.reserve(obs.size());
    for (const auto& e : obs.entries) {
        const double xe = x(e.i, e.j);
        const auto [log_p, log_q] = link.log_terms(xe);
        const auto [ratio_p, ratio_q] = link.grad_ratios(xe);
        if (e.y > 0) {
            terms.push_back(-log_p);
            out.grad(e.i, e.j) = -ratio_p;
            if (log_p <= floor_log) ++out.clamp_hits;
        } else {
            terms.push_back(-log_q);
            out.grad(e.i, e.j) = ratio_q;
            if (log_q <= floor_log) ++out.clamp_hits;
        }
    }
    out.value = detail::pairwise_sum(terms);
    return out;
}

inline DenseMatrix gradient(const DenseMatrix& x, const ObservationSet& obs, const Link& link) {
    return objective_state(x, obs, link).grad;
}

}  // namespace bitmc
