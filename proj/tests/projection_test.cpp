#include <gtest/gtest.h>

#include <cmath>

#include "bitmc/projection.hpp"
#include "bitmc/rng.hpp"

using namespace bitmc;

namespace {

DenseMatrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
    Rng rng(RngSeed{seed});
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) v = 2.0 * scale * rng.uniform_symmetric();
    return m;
}

DenseMatrix diag2(double a, double b) {
    DenseMatrix m(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

/// Reference nuclear-ball projection: dense scan over the shift, taking the
/// smallest lambda on a 1e-6 grid whose thresholded sum fits in the ball.
DenseMatrix oracle_nuclear_projection(const DenseMatrix& x, double tau) {
    auto f = svd(x);
    double nuclear = 0.0;
    for (double s : f.s) nuclear += s;
    if (nuclear <= tau) return x;
    const double step = 1e-6;
    double lambda = 0.0;
    for (;; lambda += step) {
        double sum = 0.0;
        for (double s : f.s) sum += std::max(s - lambda, 0.0);
        if (sum <= tau) break;
    }
    for (double& s : f.s) s = std::max(s - lambda, 0.0);
    return svd_reconstruct(f, f.s);
}

TEST(ProjectBox, ClampsEntrywise) {
    DenseMatrix x(1, 3, {0.5, 5.0, -3.5});
    const DenseMatrix inside = project_box(x, 6.0);
    EXPECT_TRUE(inside == x);
    const DenseMatrix clamped = project_box(x, 2.0);
    EXPECT_DOUBLE_EQ(clamped(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(clamped(0, 1), 2.0);
    EXPECT_DOUBLE_EQ(clamped(0, 2), -2.0);
    DenseMatrix single(1, 1, {5.0});
    EXPECT_DOUBLE_EQ(project_box(single, 1.0)(0, 0), 1.0);
}

TEST(SoftThreshold, KnownValues) {
    const DenseMatrix a = random_matrix(4, 3, 1);
    EXPECT_LE(max_abs(soft_threshold(a, 0.0) - a), 1e-10);
    EXPECT_LE(max_abs(soft_threshold(diag2(3.0, 1.0), 1.0) - diag2(2.0, 0.0)), 1e-12);
    const double op = norm(a, NormKind::operator_norm);
    EXPECT_LE(frobenius_norm(soft_threshold(a, op + 0.1)), 1e-12);
}

TEST(ProjectNuclearBall, InsideBallUnchanged) {
    const DenseMatrix a = random_matrix(3, 3, 2, 0.1);
    const double nuc = norm(a, NormKind::nuclear);
    EXPECT_TRUE(project_nuclear_ball(a, nuc + 1.0) == a);
}

TEST(ProjectNuclearBall, DiagonalCase) {
    // singular values (3,1), tau=2: the piecewise-linear solve gives shift 1
    EXPECT_LE(max_abs(project_nuclear_ball(diag2(3.0, 1.0), 2.0) - diag2(2.0, 0.0)), 1e-12);
}

TEST(ProjectNuclearBall, ShrinksToZeroWithRadius) {
    const DenseMatrix a = random_matrix(4, 4, 3);
    double prev = frobenius_norm(a);
    for (double tau : {2.0, 1.0, 0.5, 0.1, 1e-3, 1e-6}) {
        const double now = frobenius_norm(project_nuclear_ball(a, tau));
        EXPECT_LE(now, prev + 1e-12);
        prev = now;
    }
    EXPECT_LE(prev, 1e-6);
}

TEST(ProjectNuclearBall, MatchesDenseShiftOracle) {
    int cases = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const DenseMatrix x = random_matrix(4, 4, 100 + seed);
        for (double tau : {0.5, 1.0, 2.0}) {
            const DenseMatrix fast = project_nuclear_ball(x, tau);
            const DenseMatrix slow = oracle_nuclear_projection(x, tau);
            EXPECT_LE(frobenius_norm(fast - slow), 1e-4);
            ++cases;
        }
    }
    EXPECT_EQ(cases, 60);
}

TEST(Projections, NonexpansiveOnRandomPairs) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const DenseMatrix x = random_matrix(4, 4, 1000 + 2 * seed);
        const DenseMatrix y = random_matrix(4, 4, 1001 + 2 * seed);
        const double dist = frobenius_norm(x - y);
        EXPECT_LE(frobenius_norm(project_box(x, 0.7) - project_box(y, 0.7)), dist + 1e-12);
        EXPECT_LE(frobenius_norm(project_nuclear_ball(x, 1.5) - project_nuclear_ball(y, 1.5)),
                  dist + 1e-10);
    }
}

TEST(Projections, Idempotent) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const DenseMatrix x = random_matrix(5, 4, 500 + seed);
        const DenseMatrix bx = project_box(x, 0.6);
        EXPECT_LE(max_abs(project_box(bx, 0.6) - bx), 1e-12);
        const DenseMatrix nx = project_nuclear_ball(x, 1.2);
        EXPECT_LE(frobenius_norm(project_nuclear_ball(nx, 1.2) - nx), 1e-8);
    }
}

TEST(ProjectIntersection, FixedPointInsideSet) {
    DenseMatrix x = random_matrix(3, 3, 7, 0.05);
    const ConstraintSet c = ConstraintSet::nuclear_box(norm(x, NormKind::nuclear) + 1.0,
                                                       max_abs(x) + 0.1);
    const auto res = project_intersection_full(x, c);
    EXPECT_TRUE(res.converged);
    EXPECT_TRUE(res.z == x);
}

TEST(ProjectIntersection, ScalarClamp) {
    DenseMatrix x(1, 1, {5.0});
    const DenseMatrix z = project_intersection(x, ConstraintSet::nuclear_box(1.0, 1.0));
    EXPECT_DOUBLE_EQ(z(0, 0), 1.0);
}

TEST(ProjectIntersection, MatchesNuclearBallWhenBoxInactive) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const DenseMatrix x = random_matrix(6, 6, 300 + seed);
        const double tau = 2.0;
        const DenseMatrix ball = project_nuclear_ball(x, tau);
        const double kappa = max_abs(ball) * 2.0 + 0.5;
        const DenseMatrix z = project_intersection(x, ConstraintSet::nuclear_box(tau, kappa));
        EXPECT_LE(frobenius_norm(z - ball), 1e-3);
    }
}

TEST(ProjectIntersection, ResultNearlyFeasible) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const DenseMatrix x = random_matrix(6, 6, 400 + seed, 2.0);
        const ConstraintSet c = ConstraintSet::nuclear_box(1.5, 0.4);
        const auto res = project_intersection_full(x, c);
        EXPECT_LE(norm(res.z, NormKind::nuclear), c.tau + res.eps);
        EXPECT_LE(max_abs(res.z), *c.kappa + res.eps);
    }
}

TEST(ProjectIntersection, NoFartherThanDiagonalGridOracle) {
    // on diagonal input the projection onto the intersection is diagonal, so
    // a dense grid over feasible diagonals brackets the true projection
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(RngSeed{900 + seed});
        const double tau = 1.4, kappa = 0.9;
        DenseMatrix x = diag2(3.0 * rng.uniform01(), 3.0 * rng.uniform01());
        const DenseMatrix z = project_intersection(x, ConstraintSet::nuclear_box(tau, kappa));

        double best = std::numeric_limits<double>::infinity();
        const int steps = 1200;
        for (int a = 0; a <= steps; ++a)
            for (int b = 0; b <= steps; ++b) {
                const double za = kappa * a / steps;
                const double zb = kappa * b / steps;
                if (za + zb > tau) continue;  // nuclear norm of a diagonal
                const double da = za - x(0, 0), db = zb - x(1, 1);
                best = std::min(best, std::sqrt(da * da + db * db));
            }
        EXPECT_LE(frobenius_norm(z - x), best + 1e-3);
    }
}

TEST(ProjectIntersection, FlagsNonConvergence) {
    AdmmOptions opts;
    opts.max_iters = 2;
    const DenseMatrix x = random_matrix(5, 5, 1234, 3.0);
    const auto res = project_intersection_full(x, ConstraintSet::nuclear_box(1.0, 0.3), opts);
    EXPECT_FALSE(res.converged);
    EXPECT_LE(norm(res.z, NormKind::nuclear), 1.0 + 1e-9);
}

TEST(ConstraintSetType, Validation) {
    EXPECT_THROW(ConstraintSet::nuclear_ball(0.0), std::invalid_argument);
    EXPECT_THROW(ConstraintSet::nuclear_box(1.0, -1.0), std::invalid_argument);
    EXPECT_THROW(project_intersection(DenseMatrix(2, 2), ConstraintSet::nuclear_ball(1.0)),
                 std::invalid_argument);
}

}  // namespace
