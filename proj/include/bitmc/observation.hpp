#pragma once

#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bitmc/link.hpp"
#include "bitmc/matrix.hpp"
#include "bitmc/rng.hpp"

namespace bitmc {

struct Observation {
    Index i = 0;
    Index j = 0;
    int y = 0;  // -1 or +1
};

/// Binary observations on a subset of entries of a d1 x d2 matrix.
struct ObservationSet {
    Index d1 = 0;
    Index d2 = 0;
    std::vector<Observation> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }

    void validate() const {
        if (d1 <= 0 || d2 <= 0)
            throw std::invalid_argument("ObservationSet: dimensions must be positive");
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(entries.size());
        for (const auto& e : entries) {
            if (e.i < 0 || e.i >= d1 || e.j < 0 || e.j >= d2)
                throw std::invalid_argument("ObservationSet: index out of range");
            if (e.y != -1 && e.y != 1)
                throw std::invalid_argument("ObservationSet: label must be -1 or +1");
            const auto key = static_cast<std::uint64_t>(e.i) * static_cast<std::uint64_t>(d2) +
                             static_cast<std::uint64_t>(e.j);
            if (!seen.insert(key).second)
                throw std::invalid_argument("ObservationSet: duplicate entry index");
        }
    }
};

/// Draw the observed index set: each of the d1*d2 entries is included
/// independently with probability n / (d1*d2).
inline std::vector<std::pair<Index, Index>> sample_omega(Index d1, Index d2, double n,
                                                         RngSeed seed) {
    if (d1 <= 0 || d2 <= 0) throw std::invalid_argument("sample_omega: dims must be positive");
    const double total = static_cast<double>(d1) * static_cast<double>(d2);
    if (n < 0.0 || n > total)
        throw std::invalid_argument("sample_omega: n must lie in [0, d1*d2]");
    const double p = n / total;
    Rng rng(seed);
    std::vector<std::pair<Index, Index>> omega;
    omega.reserve(static_cast<std::size_t>(n * 1.1) + 16);
    for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
            if (rng.uniform01() < p) omega.emplace_back(i, j);
    return omega;
}

/// Sample y = +1 with probability f(m_ij) independently on each omega entry.
inline ObservationSet sample_observations(const DenseMatrix& m,
                                          const std::vector<std::pair<Index, Index>>& omega,
                                          const Link& link, RngSeed seed) {
    Rng rng(seed);
    ObservationSet out;
    out.d1 = m.rows();
    out.d2 = m.cols();
    out.entries.reserve(omega.size());
    for (const auto& [i, j] : omega) {
        if (i < 0 || i >= m.rows() || j < 0 || j >= m.cols())
            throw std::invalid_argument("sample_observations: omega index out of range");
        const int y = rng.uniform01() < link.eval(m(i, j)) ? 1 : -1;
        out.entries.push_back({i, j, y});
    }
    return out;
}

/// Random rank <= r matrix: product of two factors with entries uniform on
/// [-1/2, 1/2), rescaled so the largest-magnitude entry is exactly +-1.
inline DenseMatrix synth_low_rank(Index d1, Index d2, Index r, RngSeed seed) {
    if (d1 <= 0 || d2 <= 0) throw std::invalid_argument("synth_low_rank: dims must be positive");
    if (r < 1 || r > std::min(d1, d2))
        throw std::invalid_argument("synth_low_rank: rank out of range");
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(substream(seed, attempt));
        DenseMatrix m1(d1, r), m2(d2, r);
        for (double& v : m1.values()) v = rng.uniform_symmetric();
        for (double& v : m2.values()) v = rng.uniform_symmetric();
        DenseMatrix m = matmul(m1, transpose(m2));
        const double scale = max_abs(m);
        if (scale == 0.0) continue;  // probability-zero degenerate draw
        for (double& v : m.values()) v /= scale;  // max entry becomes exactly +-1
        return m;
    }
}

}  // namespace bitmc
