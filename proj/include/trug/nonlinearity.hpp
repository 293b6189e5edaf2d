#ifndef TRUG_NONLINEARITY_HPP
#define TRUG_NONLINEARITY_HPP

// TruG nonlinearity parameters: the truncation points shared by all hidden
// units or owned by each unit, plus the vectorised conditional layer that all
// three models use for their truncated-Gaussian hidden units.

#include "errors.hpp"
#include "linalg.hpp"
#include "truncnorm.hpp"

#include <cmath>
#include <string>

namespace trug {

enum class TruncationMode { shared, per_unit };

struct TrainableMask {
    bool lower = true;
    bool upper = true;

    friend bool operator==(const TrainableMask&, const TrainableMask&) = default;
};

/// Truncation points of a TruG layer. In shared mode both vectors have length 1 and broadcast.
struct TrugParams {
    TruncationMode mode = TruncationMode::shared;
    Vector lower = Vector::Constant(1, 0.0);
    Vector upper = Vector::Constant(1, 1.0);
    TrainableMask trainable;

    static TrugParams shared(double lo, double hi, TrainableMask mask = {}) {
        TrugParams p;
        p.lower = Vector::Constant(1, lo);
        p.upper = Vector::Constant(1, hi);
        p.trainable = mask;
        p.validate();
        return p;
    }

    static TrugParams per_unit(Vector lo, Vector hi, TrainableMask mask = {}) {
        TrugParams p;
        p.mode = TruncationMode::per_unit;
        p.lower = std::move(lo);
        p.upper = std::move(hi);
        p.trainable = mask;
        p.validate();
        return p;
    }

    static TrugParams per_unit(Eigen::Index units, double lo, double hi, TrainableMask mask = {}) {
        return per_unit(Vector::Constant(units, lo), Vector::Constant(units, hi), mask);
    }

    Eigen::Index size() const { return lower.size(); }

    double lower_at(Eigen::Index unit) const { return mode == TruncationMode::shared ? lower[0] : lower[unit]; }
    double upper_at(Eigen::Index unit) const { return mode == TruncationMode::shared ? upper[0] : upper[unit]; }
    TruncationInterval interval(Eigen::Index unit) const { return {lower_at(unit), upper_at(unit)}; }

    void validate() const {
        require(lower.size() == upper.size() && lower.size() >= 1, "truncation point vectors must match in length");
        require(mode == TruncationMode::per_unit || lower.size() == 1, "shared truncation mode holds one pair");
        for (Eigen::Index j = 0; j < lower.size(); ++j) {
            require(!std::isnan(lower[j]) && !std::isnan(upper[j]) && lower[j] < upper[j] && lower[j] != kInf &&
                        upper[j] != -kInf,
                    "truncation points must satisfy lower < upper (unit " + std::to_string(j) + ")");
        }
    }

    /// Throws unless the parameters can serve a layer of `units` hidden units.
    void check_units(Eigen::Index units) const {
        require(mode == TruncationMode::shared || lower.size() == units,
                "per-unit truncation has " + std::to_string(lower.size()) + " pairs for " + std::to_string(units) +
                    " units");
    }

    friend bool operator==(const TrugParams& a, const TrugParams& b) {
        return a.mode == b.mode && a.lower == b.lower && a.upper == b.upper && a.trainable == b.trainable;
    }
};

/// Gradient of an objective w.r.t. the truncation points; same shape as the owning TrugParams.
struct TrugGrad {
    Vector d_lower;
    Vector d_upper;

    static TrugGrad zeros_like(const TrugParams& p) {
        return {Vector::Zero(p.size()), Vector::Zero(p.size())};
    }

    TrugGrad& operator+=(const TrugGrad& other) {
        d_lower += other.d_lower;
        d_upper += other.d_upper;
        return *this;
    }

    TrugGrad& operator*=(double s) {
        d_lower *= s;
        d_upper *= s;
        return *this;
    }
};

struct Moments {
    Vector mean;
    Vector variance;
};

/// Element-wise truncated-normal mean and variance: the TruG activation.
inline Moments activate(const TrugParams& params, const Vector& z, const Vector& sigma2) {
    require(z.size() == sigma2.size(), "activate: z and sigma2 differ in length");
    params.check_units(z.size());
    Moments out{Vector(z.size()), Vector(z.size())};
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const auto m = trunc_moments({z[j], sigma2[j]}, params.interval(j));
        out.mean[j] = m.mean;
        out.variance[j] = m.variance;
    }
    return out;
}

/// Restores upper >= lower + min_gap after an unconstrained step. Both endpoints trainable:
/// symmetric about the midpoint; otherwise only the trainable one moves. Infinite endpoints never move.
inline TrugParams clamp_after_step(TrugParams params, double min_gap) {
    require(min_gap > 0.0, "min_gap must be positive");
    for (Eigen::Index j = 0; j < params.size(); ++j) {
        double& lo = params.lower[j];
        double& hi = params.upper[j];
        if (!std::isfinite(lo) || !std::isfinite(hi) || hi - lo >= min_gap) continue;
        const bool move_lower = params.trainable.lower || !params.trainable.upper;
        const bool move_upper = params.trainable.upper || !params.trainable.lower;
        if (move_lower && move_upper) {
            const double mid = 0.5 * (lo + hi);
            lo = mid - 0.5 * min_gap;
            hi = mid + 0.5 * min_gap;
        } else if (move_upper) {
            hi = lo + min_gap;
        } else {
            lo = hi - min_gap;
        }
    }
    return params;
}

/// Densities at the two truncation points, examples x units; zero where the endpoint is infinite.
struct BoundaryDensities {
    Matrix lower;
    Matrix upper;
};

/// Truncation-point gradient from clamped ("data") and free ("model") boundary densities:
/// d_upper = mean(data - model) at xi2, d_lower = mean(model - data) at xi1; shared mode sums units.
inline TrugGrad accumulate_boundary_grad(const TrugParams& params, const BoundaryDensities& data,
                                         const BoundaryDensities& model) {
    require(data.lower.rows() == model.lower.rows() && data.lower.cols() == model.lower.cols() &&
                data.upper.rows() == model.upper.rows() && data.upper.cols() == model.upper.cols() &&
                data.lower.rows() == data.upper.rows() && data.lower.cols() == data.upper.cols(),
            "boundary density matrices differ in shape");
    require(data.lower.rows() > 0, "boundary densities for an empty batch");
    params.check_units(data.lower.cols());
    if (!(data.lower.allFinite() && data.upper.allFinite() && model.lower.allFinite() && model.upper.allFinite()))
        throw NumericalError("boundary densities are not finite");
    require((data.lower.array() >= 0).all() && (data.upper.array() >= 0).all() && (model.lower.array() >= 0).all() &&
                (model.upper.array() >= 0).all(),
            "boundary densities must be non-negative");

    const Vector up = (data.upper - model.upper).colwise().mean().transpose();
    const Vector low = (model.lower - data.lower).colwise().mean().transpose();
    TrugGrad g = TrugGrad::zeros_like(params);
    if (params.mode == TruncationMode::shared) {
        g.d_upper[0] = up.sum();
        g.d_lower[0] = low.sum();
    } else {
        g.d_upper = up;
        g.d_lower = low;
    }
    for (Eigen::Index j = 0; j < params.size(); ++j) {
        if (!std::isfinite(params.upper[j])) g.d_upper[j] = 0.0;
        if (!std::isfinite(params.lower[j])) g.d_lower[j] = 0.0;
    }
    return g;
}

/// A batch of factorised TruG conditionals: unit j of example b is N_[xi1j, xi2j](base_mean(b, j), variance(j)).
struct TrugLayer {
    Matrix base_mean;
    Vector variance;
    TrugParams params;

    TrugLayer(Matrix mean, Vector var, TrugParams p)
        : base_mean(std::move(mean)), variance(std::move(var)), params(std::move(p)) {
        require(base_mean.cols() == variance.size(), "layer variance length differs from unit count");
        params.check_units(base_mean.cols());
    }

    Eigen::Index examples() const { return base_mean.rows(); }
    Eigen::Index units() const { return base_mean.cols(); }

    struct LayerMoments {
        Matrix mean;
        Matrix variance;
        /// E[h^2] = Var + mean^2
        Matrix second_moment() const { return variance + mean.cwiseProduct(mean); }
    };

    LayerMoments moments() const {
        LayerMoments out{Matrix(examples(), units()), Matrix(examples(), units())};
        for (Eigen::Index j = 0; j < units(); ++j) {
            const TruncationInterval iv = params.interval(j);
            for (Eigen::Index b = 0; b < examples(); ++b) {
                const auto m = trunc_moments({base_mean(b, j), variance[j]}, iv);
                out.mean(b, j) = m.mean;
                out.variance(b, j) = m.variance;
            }
        }
        return out;
    }

    template <class Urbg>
    Matrix sample(Urbg& rng) const {
        Matrix out(examples(), units());
        for (Eigen::Index b = 0; b < examples(); ++b)
            for (Eigen::Index j = 0; j < units(); ++j)
                out(b, j) = trug::sample({base_mean(b, j), variance[j]}, params.interval(j), rng);
        return out;
    }

    BoundaryDensities boundary_densities() const {
        BoundaryDensities out{Matrix::Zero(examples(), units()), Matrix::Zero(examples(), units())};
        for (Eigen::Index j = 0; j < units(); ++j) {
            const TruncationInterval iv = params.interval(j);
            const double sd = std::sqrt(variance[j]);
            for (Eigen::Index b = 0; b < examples(); ++b) {
                const GaussianBase base(base_mean(b, j), variance[j]);
                const double log_mass = log_partial_mass(base, iv);
                auto density = [&](double point) {
                    return std::exp(normal::log_pdf((point - base.mean) / sd) - std::log(sd) - log_mass);
                };
                if (iv.has_lower()) out.lower(b, j) = density(iv.lower);
                if (iv.has_upper()) out.upper(b, j) = density(iv.upper);
            }
        }
        return out;
    }
};

}  // namespace trug

#endif  // TRUG_NONLINEARITY_HPP
