#include <gtest/gtest.h>

#include <cmath>

#include "bitmc/metrics.hpp"
#include "bitmc/rng.hpp"

using namespace bitmc;

namespace {

ProbMatrix scalar(double p) {
    DenseMatrix m(1, 1);
    m(0, 0) = p;
    return ProbMatrix(std::move(m));
}

TEST(ProbMatrixType, RejectsOutOfRange) {
    DenseMatrix m(1, 2);
    m(0, 0) = 0.5;
    m(0, 1) = 1.5;
    EXPECT_THROW(ProbMatrix{std::move(m)}, std::invalid_argument);
}

TEST(Hellinger, KnownValues) {
    EXPECT_DOUBLE_EQ(hellinger_sq(scalar(0.3), scalar(0.3)), 0.0);
    EXPECT_DOUBLE_EQ(hellinger_sq(scalar(0.0), scalar(1.0)), 2.0);
    const double expected = std::pow(std::sqrt(0.5) - std::sqrt(0.25), 2) +
                            std::pow(std::sqrt(0.5) - std::sqrt(0.75), 2);
    EXPECT_NEAR(hellinger_sq(scalar(0.5), scalar(0.25)), expected, 1e-15);
}

TEST(Hellinger, SymmetricAndAveraged) {
    Rng rng(RngSeed{1});
    DenseMatrix p(4, 3), q(4, 3);
    for (double& v : p.values()) v = rng.uniform01();
    for (double& v : q.values()) v = rng.uniform01();
    const ProbMatrix P(p), Q(q);
    EXPECT_DOUBLE_EQ(hellinger_sq(P, Q), hellinger_sq(Q, P));
    EXPECT_LE(hellinger_sq(P, Q), 2.0);
    double acc = 0.0;
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 3; ++j) acc += hellinger_sq_scalar(P(i, j), Q(i, j));
    EXPECT_NEAR(hellinger_sq(P, Q), acc / 12.0, 1e-15);
}

TEST(Hellinger, RejectsDimensionMismatch) {
    EXPECT_THROW(hellinger_sq(scalar(0.5), ProbMatrix(DenseMatrix(2, 1))),
                 std::invalid_argument);
}

TEST(KlDivergence, KnownValues) {
    EXPECT_DOUBLE_EQ(kl_divergence(scalar(0.4), scalar(0.4)), 0.0);
    const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    EXPECT_NEAR(kl_divergence(scalar(0.5), scalar(0.25)), expected, 1e-15);
}

TEST(KlDivergence, BoundaryConventions) {
    // 0 log 0 = 0: p matching a boundary q gives zero divergence
    EXPECT_DOUBLE_EQ(kl_divergence_scalar(0.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(kl_divergence_scalar(1.0, 1.0), 0.0);
    EXPECT_TRUE(std::isinf(kl_divergence_scalar(0.5, 0.0)));
    EXPECT_TRUE(std::isinf(kl_divergence_scalar(0.5, 1.0)));
    EXPECT_DOUBLE_EQ(kl_divergence_scalar(0.0, 0.5), std::log(2.0));
}

TEST(KlDivergence, DominatesSquaredHellinger) {
    Rng rng(RngSeed{2});
    for (int k = 0; k < 10000; ++k) {
        const double p = rng.uniform01();
        const double q = 0.001 + 0.998 * rng.uniform01();
        EXPECT_GE(kl_divergence_scalar(p, q) + 1e-15, hellinger_sq_scalar(p, q));
    }
}

TEST(KlDivergence, QuadraticUpperBoundOnGrid) {
    // D(x||y) <= (x-y)^2 / (y(1-y)) across the percent grid
    for (int xi = 1; xi <= 99; ++xi)
        for (int yi = 1; yi <= 99; ++yi) {
            const double x = xi / 100.0;
            const double y = yi / 100.0;
            const double bound = (x - y) * (x - y) / (y * (1.0 - y));
            EXPECT_LE(kl_divergence_scalar(x, y), bound + 1e-12);
        }
}

TEST(RelFroError, KnownValues) {
    Rng rng(RngSeed{3});
    DenseMatrix m(3, 3);
    for (double& v : m.values()) v = rng.uniform_symmetric() + 0.1;
    EXPECT_DOUBLE_EQ(rel_fro_error(m, m), 0.0);
    EXPECT_DOUBLE_EQ(rel_fro_error(DenseMatrix(3, 3), m), 1.0);
    DenseMatrix twice = m;
    twice *= 2.0;
    EXPECT_NEAR(rel_fro_error(twice, m), 1.0, 1e-12);
    EXPECT_THROW(rel_fro_error(m, DenseMatrix(3, 3)), std::invalid_argument);
}

TEST(SignAccuracy, AllCorrectAndHalfBucket) {
    DenseMatrix pred(2, 2);
    pred(0, 0) = 1.0;
    pred(0, 1) = -2.0;
    pred(1, 0) = 3.0;
    pred(1, 1) = -4.0;
    std::vector<HoldoutEntry> all_match = {
        {0, 0, 5.0, 1}, {0, 1, 1.0, -1}, {1, 0, 4.0, 1}, {1, 1, 2.0, -1}};
    EXPECT_DOUBLE_EQ(sign_accuracy(pred, all_match).overall, 1.0);

    std::vector<HoldoutEntry> half = {{0, 0, 3.0, 1}, {0, 1, 3.0, 1}};
    const auto report = sign_accuracy(pred, half);
    EXPECT_DOUBLE_EQ(report.per_rating.at(3.0), 0.5);
}

TEST(SignAccuracy, ZeroPredictionCountsAsPositive) {
    DenseMatrix pred(1, 1);
    const auto report = sign_accuracy(pred, {{0, 0, 4.0, 1}});
    EXPECT_DOUBLE_EQ(report.overall, 1.0);
}

TEST(SignAccuracy, OverallIsCountWeightedMean) {
    DenseMatrix pred(2, 3);
    pred(0, 0) = 1.0;
    pred(0, 1) = 1.0;
    pred(0, 2) = -1.0;
    pred(1, 0) = -1.0;
    pred(1, 1) = 1.0;
    pred(1, 2) = -1.0;
    std::vector<HoldoutEntry> holdout = {{0, 0, 5.0, 1},  {0, 1, 5.0, -1}, {0, 2, 5.0, -1},
                                         {1, 0, 2.0, -1}, {1, 1, 2.0, -1}, {1, 2, 1.0, -1}};
    const auto report = sign_accuracy(pred, holdout);
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& [rating, frac] : report.per_rating) {
        weighted += frac * static_cast<double>(report.counts.at(rating));
        total += report.counts.at(rating);
    }
    EXPECT_EQ(total, holdout.size());
    EXPECT_DOUBLE_EQ(report.overall, weighted / static_cast<double>(total));
}

TEST(SignAccuracy, RejectsEmptyHoldout) {
    EXPECT_THROW(sign_accuracy(DenseMatrix(1, 1), {}), std::invalid_argument);
}

}  // namespace
