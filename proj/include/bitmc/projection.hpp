#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bitmc/matrix.hpp"
#include "bitmc/svd.hpp"

namespace bitmc {

/// Feasible set: nuclear ball of radius tau, optionally intersected with the
/// entrywise box |x_ij| <= kappa. No kappa means the plain nuclear ball.
struct ConstraintSet {
    double tau = 0.0;
    std::optional<double> kappa;

    static ConstraintSet nuclear_ball(double tau) {
        check_radius(tau);
        return {tau, std::nullopt};
    }
    static ConstraintSet nuclear_box(double tau, double kappa) {
        check_radius(tau);
        if (!(kappa > 0.0)) throw std::invalid_argument("ConstraintSet: kappa must be positive");
        return {tau, kappa};
    }

private:
    static void check_radius(double tau) {
        if (!(tau > 0.0)) throw std::invalid_argument("ConstraintSet: tau must be positive");
    }
};

inline DenseMatrix project_box(const DenseMatrix& x, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("project_box: kappa must be positive");
    DenseMatrix out = x;
    for (double& v : out.values()) v = std::clamp(v, -kappa, kappa);
    return out;
}

/// Singular-value soft thresholding: shift singular values down by lambda,
/// floor at zero, keep the singular vectors.
inline DenseMatrix soft_threshold(const DenseMatrix& x, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("soft_threshold: lambda must be nonnegative");
    auto f = svd(x);
    for (double& s : f.s) s = std::max(s - lambda, 0.0);
    return svd_reconstruct(f, f.s);
}

namespace detail {

/// Smallest lambda >= 0 with sum_i max(s_i - lambda, 0) <= tau, solved exactly
/// on the piecewise-linear segments of the sum (s sorted nonincreasing).
inline double nuclear_shift(const std::vector<double>& s, double tau) {
    const std::size_t k = s.size();
    double prefix = 0.0;
    for (std::size_t m = 1; m <= k; ++m) {
        prefix += s[m - 1];
        const double lambda = (prefix - tau) / static_cast<double>(m);
        const double next = m < k ? s[m] : 0.0;
        if (lambda >= next && lambda <= s[m - 1]) return std::max(lambda, 0.0);
    }
    return std::max((prefix - tau) / static_cast<double>(k), 0.0);
}

}  // namespace detail

inline DenseMatrix project_nuclear_ball(const DenseMatrix& x, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("project_nuclear_ball: tau must be positive");
    auto f = svd(x);
    double nuclear = 0.0;
    for (double s : f.s) nuclear += s;
    if (nuclear <= tau) return x;
    const double lambda = detail::nuclear_shift(f.s, tau);
    for (double& s : f.s) s = std::max(s - lambda, 0.0);
    return svd_reconstruct(f, f.s);
}

struct AdmmOptions {
    double mu0 = 1.0;
    double growth = 1.05;
    /// Stopping tolerance; defaults to 1e-6 * max(1, ||x||_F) when unset.
    std::optional<double> eps;
    int max_iters = 500;

    double resolve_eps(const DenseMatrix& x) const {
        if (eps) {
            if (!(*eps > 0.0)) throw std::invalid_argument("AdmmOptions: eps must be positive");
            return *eps;
        }
        return 1e-6 * std::max(1.0, frobenius_norm(x));
    }
};

struct AdmmResult {
    DenseMatrix z;
    double wz_gap = 0.0;        // ||W - Z||_F at the returned iterate
    double z_inf_norm = 0.0;    // ||Z||_inf at the returned iterate
    double w_nuclear_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    double eps = 0.0;
};

/// Alternating projections with a scaled dual variable and growing penalty,
/// approximating the orthogonal projection onto the tau-nuclear-ball
/// intersected with the kappa-box. Returns the nuclear-feasible iterate Z.
inline AdmmResult project_intersection_full(const DenseMatrix& x, const ConstraintSet& c,
                                            const AdmmOptions& opts = {}) {
    if (!c.kappa) throw std::invalid_argument("project_intersection: constraint has no kappa");
    if (!(opts.growth > 1.0)) throw std::invalid_argument("AdmmOptions: growth must exceed 1");
    if (opts.max_iters < 1) throw std::invalid_argument("AdmmOptions: max_iters must be >= 1");
    const double kappa = *c.kappa;
    const double eps = opts.resolve_eps(x);

    DenseMatrix w = project_box(x, kappa);
    DenseMatrix z = project_nuclear_ball(w, c.tau);
    DenseMatrix y(x.rows(), x.cols());
    double mu = opts.mu0;

    AdmmResult best;
    best.eps = eps;
    double best_violation = std::numeric_limits<double>::infinity();

    for (int iter = 0;; ++iter) {
        const double gap = frobenius_norm(w - z);
        const double z_inf = max_abs(z);
        const double violation = std::max(gap, z_inf - kappa);
        if (violation < best_violation) {
            best_violation = violation;
            best.z = z;
            best.wz_gap = gap;
            best.z_inf_norm = z_inf;
            best.iterations = iter;
        }
        if (gap <= eps && z_inf - kappa <= eps) {
            best.z = z;
            best.wz_gap = gap;
            best.z_inf_norm = z_inf;
            best.iterations = iter;
            best.converged = true;
            best.w_nuclear_norm = norm(w, NormKind::nuclear);
            return best;
        }
        if (iter >= opts.max_iters) {
            best.converged = false;
            best.w_nuclear_norm = norm(w, NormKind::nuclear);
            return best;
        }

        DenseMatrix b = x;
        {
            auto bv = b.values();
            auto yv = y.values();
            auto zv = z.values();
            const double inv = 1.0 / (1.0 + mu);
            for (std::size_t t = 0; t < bv.size(); ++t)
                bv[t] = (bv[t] + yv[t] + mu * zv[t]) * inv;
        }
        w = project_box(b, kappa);

        DenseMatrix shifted = w;
        {
            auto sv = shifted.values();
            auto yv = y.values();
            const double inv_mu = 1.0 / mu;
            for (std::size_t t = 0; t < sv.size(); ++t) sv[t] -= inv_mu * yv[t];
        }
        z = project_nuclear_ball(shifted, c.tau);

        {
            auto yv = y.values();
            auto wv = w.values();
            auto zv = z.values();
            for (std::size_t t = 0; t < yv.size(); ++t) yv[t] -= mu * (wv[t] - zv[t]);
        }
        mu *= opts.growth;
    }
}

inline DenseMatrix project_intersection(const DenseMatrix& x, const ConstraintSet& c,
                                        const AdmmOptions& opts = {}) {
    return project_intersection_full(x, c, opts).z;
}

/// Projection onto whichever feasible set the constraint describes.
inline DenseMatrix project(const DenseMatrix& x, const ConstraintSet& c,
                           const AdmmOptions& admm = {}) {
    if (c.kappa) return project_intersection(x, c, admm);
    return project_nuclear_ball(x, c.tau);
}

}  // namespace bitmc
