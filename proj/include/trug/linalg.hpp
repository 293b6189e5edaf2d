#ifndef TRUG_LINALG_HPP
#define TRUG_LINALG_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

namespace trug {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Default random stream. Every stochastic operation takes the generator explicitly.
using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline double sigmoid(double a) {
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

/// ln(1 + e^a) without overflow.
inline double softplus(double a) {
    if (a > 0.0) return a + std::log1p(std::exp(-a));
    return std::log1p(std::exp(a));
}

template <class Urbg>
double uniform01(Urbg& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Independent Bernoulli draws with the given success probabilities.
template <class Urbg>
Matrix bernoulli(const Matrix& probs, Urbg& rng) {
    Matrix out(probs.rows(), probs.cols());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index c = 0; c < probs.cols(); ++c)
        for (Eigen::Index r = 0; r < probs.rows(); ++r) out(r, c) = unif(rng) < probs(r, c) ? 1.0 : 0.0;
    return out;
}

inline Matrix sigmoid(const Matrix& a) { return a.unaryExpr([](double v) { return sigmoid(v); }); }

/// ln(mean(exp(v))) with max shift.
inline double log_mean_exp(const Vector& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().mean());
}

inline double log_sum_exp(const Vector& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace trug

#endif  // TRUG_LINALG_HPP
