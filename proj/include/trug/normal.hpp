#ifndef TRUG_NORMAL_HPP
#define TRUG_NORMAL_HPP

// Standard normal primitives hardened for the far tails.

#include <cmath>
#include <limits>

namespace trug::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kSqrtHalfPi = 1.25331413731550025121;
inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrtPi = 0.56418958354775628695;

inline double pdf(double x) {
    if (std::isinf(x)) return 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double log_pdf(double x) {
    if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
    return -0.5 * x * x - kLogSqrt2Pi;
}

inline double cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Scaled complementary error function exp(y^2) erfc(y).
inline double erfcx(double y) {
    if (y < 0.0) {
        // Overflows to +inf for y < -26.6, which is the correct limit.
        return 2.0 * std::exp(y * y) - erfcx(-y);
    }
    if (y < 6.0) return std::exp(y * y) * std::erfc(y);
    if (std::isinf(y)) return 0.0;

    // Continued fraction erfc(y) = e^{-y^2}/sqrt(pi) / (y + (1/2)/(y + 1/(y + (3/2)/(y + ...)))),
    // evaluated with the modified Lentz algorithm.
    constexpr double tiny = 1e-300;
    double f = y;
    double c = f;
    double d = 0.0;
    for (int k = 1; k < 500; ++k) {
        const double a = 0.5 * k;
        d = y + a * d;
        if (std::fabs(d) < tiny) d = tiny;
        d = 1.0 / d;
        c = y + a / c;
        if (std::fabs(c) < tiny) c = tiny;
        const double delta = c * d;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return kInvSqrtPi / f;
}

/// Phi(x) / phi(x). Exact for every finite x <= 0; overflows for x > ~37.
inline double lower_mills(double x) { return kSqrtHalfPi * erfcx(-x * kInvSqrt2); }

/// ln Phi(x), accurate in both tails.
inline double log_cdf(double x) {
    if (x == -std::numeric_limits<double>::infinity()) return x;
    if (x == std::numeric_limits<double>::infinity()) return 0.0;
    if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
    if (x > -5.0) return std::log(cdf(x));
    return log_pdf(x) + std::log(lower_mills(x));
}

/// phi(x) / Phi(x) without the asymptotic switch.
inline double inverse_mills(double x) {
    if (x > 0.0) return pdf(x) / cdf(x);
    return 1.0 / lower_mills(x);
}

}  // namespace trug::normal

#endif  // TRUG_NORMAL_HPP
