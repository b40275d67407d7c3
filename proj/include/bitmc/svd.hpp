#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitmc/matrix.hpp"

extern "C" void openblas_set_num_threads(int);

namespace bitmc {

/// Thrown when the singular value decomposition fails to converge.
class DecompositionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thin SVD a = u * diag(s) * v^T with k = min(rows, cols).
/// Columns of u and v are orthonormal; s is nonincreasing and nonnegative.
struct SvdResult {
    DenseMatrix u;          // d1 x k
    std::vector<double> s;  // length k
    DenseMatrix v;          // d2 x k
};

namespace detail {

// BLAS-level threading off: solves here are small and the harness already
// parallelizes across experiment cells.
inline void pin_blas_threads() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

using EigenMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
    DenseMatrix out(m.rows(), m.cols());
    for (Index i = 0; i < out.rows(); ++i)
        for (Index j = 0; j < out.cols(); ++j) out(i, j) = m(i, j);
    return out;
}

inline bool svd_lapack(const DenseMatrix& a, SvdResult& out) {
    pin_blas_threads();
    const auto m = static_cast<lapack_int>(a.rows());
    const auto n = static_cast<lapack_int>(a.cols());
    const lapack_int k = std::min(m, n);
    DenseMatrix work = a;  // dgesdd destroys its input
    out.u = DenseMatrix(a.rows(), k);
    out.s.assign(static_cast<std::size_t>(k), 0.0);
    std::vector<double> vt(static_cast<std::size_t>(k) * static_cast<std::size_t>(n));
    const lapack_int info =
        LAPACKE_dgesdd(LAPACK_ROW_MAJOR, 'S', m, n, work.data(), n, out.s.data(), out.u.data(),
                       k, vt.data(), n);
    if (info != 0) return false;
    out.v = DenseMatrix(a.cols(), k);
    for (Index j = 0; j < a.cols(); ++j)
        for (Index t = 0; t < k; ++t) out.v(j, t) = vt[static_cast<std::size_t>(t) * n + j];
    return true;
}

inline bool svd_eigen(const DenseMatrix& a, SvdResult& out) {
    Eigen::BDCSVD<Eigen::MatrixXd> dec(EigenMap(a.data(), a.rows(), a.cols()),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) return false;
    out.u = from_eigen(dec.matrixU());
    out.v = from_eigen(dec.matrixV());
    const auto& sv = dec.singularValues();
    out.s.assign(sv.data(), sv.data() + sv.size());
    return true;
}

}  // namespace detail

inline SvdResult svd(const DenseMatrix& a) {
    if (!all_finite(a)) throw std::invalid_argument("svd: input has non-finite entries");
    SvdResult out;
    if (detail::svd_lapack(a, out)) return out;
    if (detail::svd_eigen(a, out)) return out;  // slower but sturdier fallback
    throw DecompositionError("svd: decomposition failed for " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " matrix");
}

/// Reassemble u * diag(s) * v^T. s may be shorter than the stored k
/// (trailing singular values treated as zero).
inline DenseMatrix svd_reconstruct(const SvdResult& f, std::span<const double> s) {
    const Index d1 = f.u.rows(), d2 = f.v.rows();
    DenseMatrix out(d1, d2);
    for (std::size_t t = 0; t < s.size(); ++t) {
        const double st = s[t];
        if (st == 0.0) continue;
        for (Index i = 0; i < d1; ++i) {
            const double uis = f.u(i, static_cast<Index>(t)) * st;
            for (Index j = 0; j < d2; ++j) out(i, j) += uis * f.v(j, static_cast<Index>(t));
        }
    }
    return out;
}

enum class NormKind { frobenius, nuclear, inf, operator_norm };

inline double norm(const DenseMatrix& a, NormKind kind) {
    switch (kind) {
        case NormKind::frobenius: return frobenius_norm(a);
        case NormKind::inf: return max_abs(a);
        case NormKind::nuclear: {
            const auto f = svd(a);
            double acc = 0.0;
            for (double s : f.s) acc += s;
            return acc;
        }
        case NormKind::operator_norm: {
            const auto f = svd(a);
            return f.s.empty() ? 0.0 : f.s.front();
        }
    }
    throw std::invalid_argument("norm: unknown kind");
}

/// Best rank-r approximation: keep the r largest singular triplets.
inline DenseMatrix rank_truncate(const DenseMatrix& a, Index r) {
    const Index k = std::min(a.rows(), a.cols());
    if (r < 1 || r > k) throw std::invalid_argument("rank_truncate: rank out of range");
    auto f = svd(a);
    return svd_reconstruct(f, std::span<const double>(f.s.data(), static_cast<std::size_t>(r)));
}

}  // namespace bitmc
