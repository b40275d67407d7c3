#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bitmc {

using Index = std::ptrdiff_t;

/// Dense real matrix, row-major storage.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(Index rows, Index cols)
        : rows_(rows), cols_(cols), data_(check_dims(rows, cols), 0.0) {}

    DenseMatrix(Index rows, Index cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != check_dims(rows, cols))
            throw std::invalid_argument("DenseMatrix: data length does not match rows*cols");
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index size() const { return rows_ * cols_; }

    double operator()(Index i, Index j) const { return data_[i * cols_ + j]; }
    double& operator()(Index i, Index j) { return data_[i * cols_ + j]; }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }
    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }

    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    DenseMatrix& operator+=(const DenseMatrix& rhs) {
        require_same_shape(rhs);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
        return *this;
    }
    DenseMatrix& operator-=(const DenseMatrix& rhs) {
        require_same_shape(rhs);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
        return *this;
    }
    DenseMatrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
    friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
    friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    static std::size_t check_dims(Index rows, Index cols) {
        if (rows <= 0 || cols <= 0)
            throw std::invalid_argument("DenseMatrix: dimensions must be positive");
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
    void require_same_shape(const DenseMatrix& rhs) const {
        if (!same_shape(rhs)) throw std::invalid_argument("DenseMatrix: shape mismatch");
    }

    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(const DenseMatrix& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) return false;
    return true;
}

/// Frobenius inner product <a, b> = sum_ij a_ij b_ij.
inline double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("frobenius_inner: shape mismatch");
    double acc = 0.0;
    auto av = a.values(), bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) acc += av[k] * bv[k];
    return acc;
}

inline double frobenius_norm(const DenseMatrix& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v * v;
    return std::sqrt(acc);
}

inline double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    DenseMatrix c(a.rows(), b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (Index j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

}  // namespace bitmc
