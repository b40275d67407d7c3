#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "bitmc/matrix.hpp"

namespace bitmc {

/// Matrix of probabilities: entries constrained to [0, 1].
class ProbMatrix {
public:
    explicit ProbMatrix(DenseMatrix m) : m_(std::move(m)) {
        for (double v : m_.values())
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("ProbMatrix: entry outside [0,1]");
    }
    const DenseMatrix& matrix() const { return m_; }
    Index rows() const { return m_.rows(); }
    Index cols() const { return m_.cols(); }
    double operator()(Index i, Index j) const { return m_(i, j); }

private:
    DenseMatrix m_;
};

/// Squared Hellinger distance between two scalar Bernoulli parameters.
inline double hellinger_sq_scalar(double p, double q) {
    const double a = std::sqrt(p) - std::sqrt(q);
    const double b = std::sqrt(1.0 - p) - std::sqrt(1.0 - q);
    return a * a + b * b;
}

/// Average per-entry squared Hellinger distance; lies in [0, 2].
inline double hellinger_sq(const ProbMatrix& p, const ProbMatrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols())
        throw std::invalid_argument("hellinger_sq: dimension mismatch");
    double acc = 0.0;
    const auto pv = p.matrix().values(), qv = q.matrix().values();
    for (std::size_t k = 0; k < pv.size(); ++k) acc += hellinger_sq_scalar(pv[k], qv[k]);
    return acc / static_cast<double>(pv.size());
}

/// KL divergence between Bernoulli(p) and Bernoulli(q), with 0 log 0 = 0.
/// Boundary q with mismatched p yields +infinity.
inline double kl_divergence_scalar(double p, double q) {
    double acc = 0.0;
    if (p > 0.0) {
        if (q <= 0.0) return std::numeric_limits<double>::infinity();
        acc += p * std::log(p / q);
    }
    if (p < 1.0) {
        if (q >= 1.0) return std::numeric_limits<double>::infinity();
        acc += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    }
    return acc;
}

/// Average per-entry KL divergence.
inline double kl_divergence(const ProbMatrix& p, const ProbMatrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols())
        throw std::invalid_argument("kl_divergence: dimension mismatch");
    double acc = 0.0;
    const auto pv = p.matrix().values(), qv = q.matrix().values();
    for (std::size_t k = 0; k < pv.size(); ++k) {
        const double d = kl_divergence_scalar(pv[k], qv[k]);
        if (std::isinf(d)) return d;
        acc += d;
    }
    return acc / static_cast<double>(pv.size());
}

/// ||m_hat - m||_F^2 / ||m||_F^2.
inline double rel_fro_error(const DenseMatrix& m_hat, const DenseMatrix& m) {
    if (!m_hat.same_shape(m)) throw std::invalid_argument("rel_fro_error: dimension mismatch");
    const double denom = frobenius_norm(m);
    if (denom == 0.0) throw std::invalid_argument("rel_fro_error: reference matrix is zero");
    const double num = frobenius_norm(m_hat - m);
    return (num * num) / (denom * denom);
}

struct HoldoutEntry {
    Index i = 0;
    Index j = 0;
    double original_rating = 0.0;
    int binary_label = 0;  // -1 or +1
};

struct AccuracyReport {
    std::map<double, double> per_rating;       // fraction correct per rating value
    std::map<double, std::size_t> counts;      // holdout size per rating value
    double overall = 0.0;

    std::size_t total_count() const {
        std::size_t n = 0;
        for (const auto& [r, c] : counts) n += c;
        return n;
    }
};

/// Fraction of holdout entries whose sign is predicted correctly, bucketed by
/// the original rating. sign(0) counts as +1.
inline AccuracyReport sign_accuracy(const DenseMatrix& predicted,
                                    const std::vector<HoldoutEntry>& holdout) {
    if (holdout.empty()) throw std::invalid_argument("sign_accuracy: empty holdout");
    std::map<double, std::size_t> correct, counts;
    for (const auto& h : holdout) {
        if (h.i < 0 || h.i >= predicted.rows() || h.j < 0 || h.j >= predicted.cols())
            throw std::invalid_argument("sign_accuracy: holdout index out of range");
        if (h.binary_label != -1 && h.binary_label != 1)
            throw std::invalid_argument("sign_accuracy: label must be -1 or +1");
        const int sign = predicted(h.i, h.j) >= 0.0 ? 1 : -1;
        counts[h.original_rating] += 1;
        if (sign == h.binary_label) correct[h.original_rating] += 1;
    }
    AccuracyReport report;
    report.counts = counts;
    std::size_t total_correct = 0, total = 0;
    for (const auto& [rating, n] : counts) {
        const std::size_t c = correct.count(rating) ? correct[rating] : 0;
        report.per_rating[rating] = static_cast<double>(c) / static_cast<double>(n);
        total_correct += c;
        total += n;
    }
    report.overall = static_cast<double>(total_correct) / static_cast<double>(total);
    return report;
}

}  // namespace bitmc
