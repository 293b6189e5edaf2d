#ifndef TRUG_TRUNCNORM_HPP
#define TRUG_TRUNCNORM_HPP

// Univariate doubly truncated Gaussian N_[lower, upper](mean, variance).
//
// Everything is reduced to the standard normal truncated to [alpha, beta],
// alpha = (lower - mean) / sd, beta = (upper - mean) / sd. The interval is
// reflected so that alpha + beta <= 0, i.e. the bulk of the work happens on
// the left tail where Phi(x) = phi(x) * r(x) with r the lower Mills ratio.
// Dividing numerator and denominator of the moment formulas by phi(beta)
// removes the 0/0 that direct evaluation hits for tail arguments below -38.

#include "errors.hpp"
#include "linalg.hpp"
#include "normal.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace trug {

/// Truncation points (xi1, xi2). Infinite endpoints are +-kInf and always take an explicit branch.
struct TruncationInterval {
    double lower = -kInf;
    double upper = kInf;

    TruncationInterval() = default;
    TruncationInterval(double lo, double hi) : lower(lo), upper(hi) {
        if (std::isnan(lo) || std::isnan(hi) || !(lo < hi) || lo == kInf || hi == -kInf)
            throw ContractError("truncation interval requires lower < upper, got (" + std::to_string(lo) +
                                ", " + std::to_string(hi) + ")");
    }

    bool has_lower() const { return std::isfinite(lower); }
    bool has_upper() const { return std::isfinite(upper); }
    bool untruncated() const { return !has_lower() && !has_upper(); }
    bool contains(double h) const { return h >= lower && h <= upper; }

    friend bool operator==(const TruncationInterval&, const TruncationInterval&) = default;
};

/// Gaussian N(mean, variance) before truncation.
struct GaussianBase {
    double mean = 0.0;
    double variance = 1.0;

    GaussianBase() = default;
    GaussianBase(double m, double v) : mean(m), variance(v) {
        if (!std::isfinite(m)) throw DomainError("gaussian base mean must be finite");
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("gaussian base variance must be positive and finite");
    }

    double sd() const { return std::sqrt(variance); }
};

/// Selects how phi(x)/Phi(x) is evaluated for x < -38.
enum class TailRatio {
    exact,      ///< scaled complementary error function, full double precision
    asymptotic  ///< (sqrt(x^2 + 4) - x) / 2, relative error below 4.8e-7
};

inline constexpr double kAsymptoticSwitch = -38.0;

/// phi(z)/Phi(z): log-domain evaluation for z >= -38, (sqrt(z^2+4) - z)/2 below.
inline double stable_ratio(double z) {
    if (!std::isfinite(z)) throw DomainError("stable_ratio requires a finite argument");
    if (z < kAsymptoticSwitch) return 0.5 * (std::sqrt(z * z + 4.0) - z);
    return std::exp(normal::log_pdf(z) - normal::log_cdf(z));
}

/// Moments of the standard normal truncated to [alpha, beta].
struct StandardTruncation {
    double log_mass = 0.0;  ///< ln(Phi(beta) - Phi(alpha))
    double mean = 0.0;
    double variance = 1.0;
};

namespace detail {

// Phi(x)/phi(x) for x <= 0 under the chosen tail policy.
inline double lower_ratio(double x, TailRatio policy) {
    if (policy == TailRatio::asymptotic && x < kAsymptoticSwitch) return 1.0 / stable_ratio(x);
    return normal::lower_mills(x);
}

inline bool is_narrow(double alpha, double beta) {
    const double width = beta - alpha;
    return width <= 0.5 && width * std::max(std::fabs(alpha), std::fabs(beta)) <= 1.0;
}

// [alpha, beta] is narrow: integrate exp((beta^2 - t^2)/2) directly, the integrand varies by at most e.
inline StandardTruncation narrow_interval(double alpha, double beta, bool want_moments) {
    using Rule = boost::math::quadrature::gauss<double, 20>;
    const double b2 = beta * beta;
    auto weight = [b2](double t) { return std::exp(0.5 * (b2 - t * t)); };
    StandardTruncation out;
    const double mass = Rule::integrate(weight, alpha, beta);
    out.log_mass = normal::log_pdf(beta) + std::log(mass);
    if (want_moments) {
        const double m1 = Rule::integrate([&](double t) { return t * weight(t); }, alpha, beta) / mass;
        const double m2 =
            Rule::integrate([&](double t) { return (t - m1) * (t - m1) * weight(t); }, alpha, beta) / mass;
        out.mean = m1;
        out.variance = m2;
    }
    return out;
}

inline StandardTruncation standard_truncation(double alpha, double beta, TailRatio policy, bool want_moments) {
    StandardTruncation out;
    if (alpha == -kInf && beta == kInf) return out;

    const bool reflect = alpha + beta > 0.0;
    if (reflect) {
        const double a = -beta;
        beta = -alpha;
        alpha = a;
    }

    if (alpha == -kInf) {
        // One-sided: (-inf, beta].
        out.log_mass = normal::log_cdf(beta);
        if (want_moments) {
            const double lambda = beta > 0.0 ? normal::inverse_mills(beta) : 1.0 / lower_ratio(beta, policy);
            out.mean = -lambda;
            out.variance = 1.0 - lambda * (lambda + beta);
        }
    } else if (is_narrow(alpha, beta)) {
        out = narrow_interval(alpha, beta, want_moments);
    } else if (beta <= 0.0) {
        // Both endpoints on the left tail, |alpha| >= |beta|. Scale everything by phi(beta).
        const double expo = 0.5 * (beta - alpha) * (beta + alpha);  // <= 0
        const double e = std::exp(expo);
        const double scaled_mass = lower_ratio(beta, policy) - e * lower_ratio(alpha, policy);
        out.log_mass = normal::log_pdf(beta) + std::log(scaled_mass);
        if (want_moments) {
            const double m1 = std::expm1(expo) / scaled_mass;
            const double m2 = (alpha * e - beta) / scaled_mass;
            out.mean = m1;
            out.variance = 1.0 + m2 - m1 * m1;
        }
    } else {
        // alpha < 0 < beta: the mass is bounded away from zero.
        const double mass = 1.0 - normal::cdf(alpha) - normal::cdf(-beta);
        out.log_mass = std::log(mass);
        if (want_moments) {
            const double pa = normal::pdf(alpha);
            const double pb = normal::pdf(beta);
            const double m1 = (pa - pb) / mass;
            const double m2 = (alpha * pa - beta * pb) / mass;
            out.mean = m1;
            out.variance = 1.0 + m2 - m1 * m1;
        }
    }
    if (reflect) out.mean = -out.mean;
    return out;
}

inline void standardize(const GaussianBase& base, const TruncationInterval& interval, double& alpha, double& beta) {
    const double sd = base.sd();
    alpha = interval.has_lower() ? (interval.lower - base.mean) / sd : -kInf;
    beta = interval.has_upper() ? (interval.upper - base.mean) / sd : kInf;
}

}  // namespace detail

/// ln(Phi(beta) - Phi(alpha)) for alpha < beta, either possibly infinite.
inline double log_diff_cdf(double alpha, double beta, TailRatio policy = TailRatio::exact) {
    return detail::standard_truncation(alpha, beta, policy, false).log_mass;
}

inline StandardTruncation standard_moments(double alpha, double beta, TailRatio policy = TailRatio::exact) {
    return detail::standard_truncation(alpha, beta, policy, true);
}

/// ln of the untruncated Gaussian mass inside the interval; 0 for (-inf, +inf).
inline double log_partial_mass(const GaussianBase& base, const TruncationInterval& interval) {
    double alpha, beta;
    detail::standardize(base, interval, alpha, beta);
    return log_diff_cdf(alpha, beta);
}

struct TruncatedMoments {
    double mean = 0.0;
    double variance = 1.0;
    double log_mass = 0.0;
};

inline TruncatedMoments trunc_moments(const GaussianBase& base, const TruncationInterval& interval,
                                      TailRatio policy = TailRatio::exact) {
    double alpha, beta;
    detail::standardize(base, interval, alpha, beta);
    const StandardTruncation s = standard_moments(alpha, beta, policy);
    const double sd = base.sd();
    TruncatedMoments out;
    out.mean = std::clamp(base.mean + sd * s.mean, interval.lower, interval.upper);
    out.variance = base.variance * s.variance;
    out.log_mass = s.log_mass;
    return out;
}

inline double trunc_mean(const GaussianBase& base, const TruncationInterval& interval) {
    return trunc_moments(base, interval).mean;
}

inline double trunc_var(const GaussianBase& base, const TruncationInterval& interval) {
    return trunc_moments(base, interval).variance;
}

/// Renormalised density at `point`; 0 outside the interval.
inline double trunc_density_at(const GaussianBase& base, const TruncationInterval& interval, double point) {
    if (!std::isfinite(point)) throw DomainError("density point must be finite");
    if (!interval.contains(point)) return 0.0;
    const double sd = base.sd();
    const double t = (point - base.mean) / sd;
    return std::exp(normal::log_pdf(t) - std::log(sd) - log_partial_mass(base, interval));
}

/// Interval mass at or above which plain resampling from the untruncated normal is used.
inline constexpr double kNaiveMassThreshold = 0.3;
inline constexpr long kMaxProposals = 1'000'000;

namespace detail {

[[noreturn]] inline void proposal_cap_exceeded() {
    throw NumericalError("truncated normal sampler exceeded " + std::to_string(kMaxProposals) + " proposals");
}

// Uniform proposal on [alpha, beta], accepted with exp((peak^2 - u^2)/2); `peak` is the
// point of the interval closest to zero.
template <class Urbg>
double uniform_rejection(double alpha, double beta, double peak, Urbg& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (long i = 0; i < kMaxProposals; ++i) {
        const double u = alpha + (beta - alpha) * unif(rng);
        if (std::log1p(-unif(rng)) <= 0.5 * (peak - u) * (peak + u)) return u;
    }
    proposal_cap_exceeded();
}

// Exponential envelope with the optimal rate for the left endpoint alpha >= 0, truncated
// to [alpha, beta] by inversion when beta is finite.
template <class Urbg>
double exponential_rejection(double alpha, double beta, Urbg& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double rate = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
    const double tail = std::isfinite(beta) ? -std::expm1(-rate * (beta - alpha)) : 1.0;
    for (long i = 0; i < kMaxProposals; ++i) {
        const double x = alpha - std::log1p(-unif(rng) * tail) / rate;
        if (x > beta) continue;
        const double diff = x - rate;
        if (std::log1p(-unif(rng)) <= -0.5 * diff * diff) return x;
    }
    proposal_cap_exceeded();
}

}  // namespace detail

/// Exact draw from the standard normal truncated to [alpha, beta].
template <class Urbg>
double sample_standard(double alpha, double beta, Urbg& rng, double naive_threshold = kNaiveMassThreshold) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (alpha == -kInf && beta == kInf) return gauss(rng);

    if (std::exp(log_diff_cdf(alpha, beta)) >= naive_threshold) {
        for (long i = 0; i < kMaxProposals; ++i) {
            const double x = gauss(rng);
            if (x >= alpha && x <= beta) return x;
        }
        detail::proposal_cap_exceeded();
    }

    bool flip = false;
    if (beta <= 0.0) {
        const double a = -beta;
        beta = -alpha;
        alpha = a;
        flip = true;
    }
    double x;
    if (alpha < 0.0) {
        x = detail::uniform_rejection(alpha, beta, 0.0, rng);
    } else if (std::isfinite(beta) && (beta - alpha) * std::max(alpha, 1.0) <= 1.0) {
        x = detail::uniform_rejection(alpha, beta, alpha, rng);
    } else {
        x = detail::exponential_rejection(alpha, beta, rng);
    }
    return flip ? -x : x;
}

/// One exact draw from N_[lower, upper](mean, variance); always inside the interval.
template <class Urbg>
double sample(const GaussianBase& base, const TruncationInterval& interval, Urbg& rng) {
    double alpha, beta;
    detail::standardize(base, interval, alpha, beta);
    const double x = base.mean + base.sd() * sample_standard(alpha, beta, rng);
    return std::clamp(x, interval.lower, interval.upper);
}

}  // namespace trug

#endif  // TRUG_TRUNCNORM_HPP
