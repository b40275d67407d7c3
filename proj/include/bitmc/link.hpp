#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace bitmc {

namespace detail {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)
inline constexpr double kLogSqrt2Pi = 0.9189385332046727418;  // log(sqrt(2*pi))

inline double softplus(double t) {
    // log(1 + e^t), safe for any t
    return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

/// log Phi(z); asymptotic expansion below z = -8 where erfc underflows long
/// before the log does.
inline double normal_logcdf(double z) {
    if (z >= -8.0) return std::log(normal_cdf(z));
    const double zz = z * z;
    // Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - ...) for z -> -inf
    double term = 1.0, series = 0.0;
    for (int k = 1; k <= 8; ++k) {
        term *= -(2 * k - 1) / zz;
        series += term;
    }
    return -0.5 * zz - std::log(-z) - kLogSqrt2Pi + std::log1p(series);
}

}  // namespace detail

enum class LinkKind { logistic, probit, custom };

/// Observation model f: R -> (0,1), strictly increasing, with derivative.
/// Probabilities returned by eval() are clamped to [prob_floor, 1-prob_floor]
/// and log terms are floored at log(prob_floor) so that -log f stays finite
/// for arbitrarily large iterates.
class Link {
public:
    static Link logistic() { return Link(LinkKind::logistic, 1.0, nullptr, nullptr); }

    static Link probit(double sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("Link::probit: sigma must be positive");
        return Link(LinkKind::probit, sigma, nullptr, nullptr);
    }

    static Link custom(std::function<double(double)> f, std::function<double(double)> fprime) {
        if (!f || !fprime) throw std::invalid_argument("Link::custom: callables required");
        return Link(LinkKind::custom, 1.0, std::move(f), std::move(fprime));
    }

    LinkKind kind() const { return kind_; }
    double sigma() const { return sigma_; }

    double prob_floor() const { return prob_floor_; }
    void set_prob_floor(double p) {
        if (!(p >= 0.0 && p < 0.5)) throw std::invalid_argument("Link: prob floor out of range");
        prob_floor_ = p;
    }

    /// (f(x), 1 - f(x)) with the complement computed without cancellation.
    std::pair<double, double> eval_pair(double x) const {
        switch (kind_) {
            case LinkKind::logistic: {
                const double p = 1.0 / (1.0 + std::exp(-x));
                const double q = 1.0 / (1.0 + std::exp(x));
                return {p, q};
            }
            case LinkKind::probit: {
                const double z = x / sigma_;
                return {detail::normal_cdf(z), detail::normal_cdf(-z)};
            }
            case LinkKind::custom: {
                const double p = f_(x);
                return {p, 1.0 - p};
            }
        }
        throw std::logic_error("Link: bad kind");
    }

    double eval(double x) const {
        const double p = eval_pair(x).first;
        return std::clamp(p, prob_floor_, 1.0 - prob_floor_);
    }

    double deriv(double x) const {
        switch (kind_) {
            case LinkKind::logistic: {
                auto [p, q] = eval_pair(x);
                return p * q;
            }
            case LinkKind::probit: return detail::normal_pdf(x / sigma_) / sigma_;
            case LinkKind::custom: return fprime_(x);
        }
        throw std::logic_error("Link: bad kind");
    }

    /// (log f(x), log(1 - f(x))), each floored at log(prob_floor).
    std::pair<double, double> log_terms(double x) const {
        const double floor = log_floor();
        auto [lp, lq] = log_pair(x);
        return {std::max(lp, floor), std::max(lq, floor)};
    }

    /// (f'/f, f'/(1-f)) with denominators floored at prob_floor; computed in
    /// log space for the probit model so deep tails stay informative.
    std::pair<double, double> grad_ratios(double x) const {
        switch (kind_) {
            case LinkKind::logistic: {
                auto [p, q] = eval_pair(x);
                const double pc = std::clamp(p, prob_floor_, 1.0 - prob_floor_);
                const double qc = std::clamp(q, prob_floor_, 1.0 - prob_floor_);
                return {qc, pc};  // f' = p*q
            }
            case LinkKind::probit: {
                const double z = x / sigma_;
                const double log_fp =
                    -0.5 * z * z - detail::kLogSqrt2Pi - std::log(sigma_);
                auto [lp, lq] = log_pair(x);
                const double floor = log_floor();
                return {std::exp(log_fp - std::max(lp, floor)),
                        std::exp(log_fp - std::max(lq, floor))};
            }
            case LinkKind::custom: {
                const double fp = fprime_(x);
                auto [p, q] = eval_pair(x);
                return {fp / std::max(p, prob_floor_), fp / std::max(q, prob_floor_)};
            }
        }
        throw std::logic_error("Link: bad kind");
    }

private:
    Link(LinkKind kind, double sigma, std::function<double(double)> f,
         std::function<double(double)> fprime)
        : kind_(kind), sigma_(sigma), f_(std::move(f)), fprime_(std::move(fprime)) {}

    double log_floor() const {
        return prob_floor_ > 0.0 ? std::log(prob_floor_)
                                 : -std::numeric_limits<double>::infinity();
    }

    std::pair<double, double> log_pair(double x) const {
        switch (kind_) {
            case LinkKind::logistic:
                return {-detail::softplus(-x), -detail::softplus(x)};
            case LinkKind::probit: {
                const double z = x / sigma_;
                return {detail::normal_logcdf(z), detail::normal_logcdf(-z)};
            }
            case LinkKind::custom: {
                auto [p, q] = eval_pair(x);
                return {std::log(p), std::log(q)};
            }
        }
        throw std::logic_error("Link: bad kind");
    }

    LinkKind kind_;
    double sigma_;
    std::function<double(double)> f_;
    std::function<double(double)> fprime_;
    double prob_floor_ = 1e-12;
};

namespace detail {

/// Supremum of ratio over [-alpha, alpha]: uniform grid of 10001 points,
/// then a bracketed ternary refinement around the best grid point.
template <typename Ratio>
double grid_sup(const Ratio& ratio, double alpha) {
    constexpr int kGridPoints = 10001;
    double best = -std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < kGridPoints; ++i) {
        const double x = -alpha + (2.0 * alpha) * i / (kGridPoints - 1);
        const double v = ratio(x);
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    const double h = 2.0 * alpha / (kGridPoints - 1);
    double lo = std::max(-alpha, -alpha + (best_i - 1) * h);
    double hi = std::min(alpha, -alpha + (best_i + 1) * h);
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, alpha); ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (ratio(m1) < ratio(m2))
            lo = m1;
        else
            hi = m2;
    }
    best = std::max(best, ratio(0.5 * (lo + hi)));
    return best;
}

}  // namespace detail

/// Largest value of |f'(x)| / (f(x)(1-f(x))) over |x| <= alpha.
inline double steepness(const Link& link, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("steepness: alpha must be nonnegative");
    return detail::grid_sup(
        [&](double x) {
            auto [p, q] = link.eval_pair(x);
            const double floor = link.prob_floor();
            return std::abs(link.deriv(x)) /
                   (std::max(p, floor) * std::max(q, floor));
        },
        alpha);
}

/// Largest value of f(x)(1-f(x)) / f'(x)^2 over |x| <= alpha.
inline double flatness(const Link& link, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("flatness: alpha must be nonnegative");
    return detail::grid_sup(
        [&](double x) {
            auto [p, q] = link.eval_pair(x);
            const double d = link.deriv(x);
            return p * q / (d * d);
        },
        alpha);
}

/// Parse a link spec string: "logistic" or "probit:<sigma>".
inline Link parse_link(const std::string& spec) {
    if (spec == "logistic") return Link::logistic();
    if (spec.rfind("probit:", 0) == 0) {
        std::size_t pos = 0;
        const std::string arg = spec.substr(7);
        const double sigma = std::stod(arg, &pos);
        if (pos != arg.size()) throw std::invalid_argument("parse_link: bad sigma in " + spec);
        return Link::probit(sigma);
    }
    throw std::invalid_argument("parse_link: unknown link " + spec);
}

inline std::string link_name(const Link& link) {
    switch (link.kind()) {
        case LinkKind::logistic: return "logistic";
        case LinkKind::probit: return "probit:" + std::to_string(link.sigma());
        case LinkKind::custom: return "custom";
    }
    return "unknown";
}

}  // namespace bitmc
