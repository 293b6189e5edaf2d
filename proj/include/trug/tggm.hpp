#ifndef TRUG_TGGM_HPP
#define TRUG_TGGM_HPP

// TruG-TGGM: y | h ~ N(W1 h + b1, sigma2 I), h | x ~ N_[xi1, xi2](W0 x + b0, sigma2 I).
// Energy E(y, h, x) = (|y - W1 h - b1|^2 + |h - W0 x - b0|^2) / (2 sigma2).
// Batches hold one example per row.

#include "errors.hpp"
#include "linalg.hpp"
#include "nonlinearity.hpp"
#include "truncnorm.hpp"

#include <cmath>
#include <random>

namespace trug {

struct TggmModel {
    Matrix W0;  // m x p
    Vector b0;  // m
    Matrix W1;  // q x m
    Vector b1;  // q
    double sigma2 = 1.0;
    TrugParams trug;
    bool learn_sigma2 = true;

    Eigen::Index inputs() const { return W0.cols(); }
    Eigen::Index hidden() const { return W0.rows(); }
    Eigen::Index outputs() const { return W1.rows(); }

    void validate() const {
        require(b0.size() == W0.rows() && W1.cols() == W0.rows() && b1.size() == W1.rows(),
                "tggm: inconsistent shapes");
        require(std::isfinite(sigma2) && sigma2 > 0.0, "tggm: sigma2 must be positive and finite");
        require(W0.allFinite() && b0.allFinite() && W1.allFinite() && b1.allFinite(), "tggm: non-finite parameter");
        trug.validate();
        trug.check_units(hidden());
    }

    static TggmModel zeros(Eigen::Index p, Eigen::Index m, Eigen::Index q, TrugParams trug, double sigma2 = 1.0) {
        TggmModel model{Matrix::Zero(m, p), Vector::Zero(m), Matrix::Zero(q, m), Vector::Zero(q), sigma2,
                        std::move(trug)};
        model.validate();
        return model;
    }
};

template <class Urbg>
TggmModel initialize_tggm(Eigen::Index p, Eigen::Index m, Eigen::Index q, TrugParams trug, Urbg& rng,
                          double weight_sd = 0.1, double sigma2 = 1.0) {
    TggmModel model = TggmModel::zeros(p, m, q, std::move(trug), sigma2);
    std::normal_distribution<double> noise(0.0, weight_sd);
    for (Matrix* w : {&model.W0, &model.W1})
        for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = noise(rng);
    return model;
}

struct TggmGrad {
    Matrix dW0;
    Vector db0;
    Matrix dW1;
    Vector db1;
    double dsigma2 = 0.0;

    static TggmGrad zeros_like(const TggmModel& m) {
        return {Matrix::Zero(m.W0.rows(), m.W0.cols()), Vector::Zero(m.b0.size()),
                Matrix::Zero(m.W1.rows(), m.W1.cols()), Vector::Zero(m.b1.size()), 0.0};
    }

    TggmGrad& operator+=(const TggmGrad& o) {
        dW0 += o.dW0;
        db0 += o.db0;
        dW1 += o.dW1;
        db1 += o.db1;
        dsigma2 += o.dsigma2;
        return *this;
    }
};

struct TggmGradients {
    TggmGrad weights;
    TrugGrad trunc;
};

/// Factorised q(h | x, y) for each row: means, variances and the per-unit base parameters
/// (base_mean, base_var) of the univariate truncated normals that produced them.
struct MeanFieldState {
    Matrix q_mean;
    Matrix q_var;
    Matrix base_mean;
    Vector base_var;
    int cycles_run = 0;
};

/// Prior conditional p(h | x): base mean W0 x + b0, variance sigma2.
inline TrugLayer prior_layer(const TggmModel& model, const Matrix& x) {
    require(x.cols() == model.inputs(), "tggm: input width mismatch");
    Matrix mu = x * model.W0.transpose();
    mu.rowwise() += model.b0.transpose();
    return TrugLayer(std::move(mu), Vector::Constant(model.hidden(), model.sigma2), model.trug);
}

/// E[y | x] = W1 E[h | x] + b1 for each row.
inline Matrix predict(const TggmModel& model, const Matrix& x) {
    Matrix y = prior_layer(model, x).moments().mean * model.W1.transpose();
    y.rowwise() += model.b1.transpose();
    return y;
}

/// Coordinate-ascent mean field on p(h | x, y), exactly n_cycles sweeps over units in ascending order.
/// Starts from the prior moments, or from `init` when given.
inline MeanFieldState mean_field_posterior(const TggmModel& model, const Matrix& x, const Matrix& y, int n_cycles,
                                           const MeanFieldState* init = nullptr) {
    require(n_cycles >= 1, "tggm: n_cycles must be at least 1");
    require(y.rows() == x.rows() && y.cols() == model.outputs(), "tggm: target shape mismatch");
    const TrugLayer prior = prior_layer(model, x);
    const Eigen::Index rows = x.rows(), m = model.hidden();

    MeanFieldState st;
    if (init != nullptr) {
        require(init->q_mean.rows() == rows && init->q_mean.cols() == m, "tggm: initial state shape mismatch");
        st.q_mean = init->q_mean;
        st.q_var = init->q_var;
    } else {
        auto mom = prior.moments();
        st.q_mean = std::move(mom.mean);
        st.q_var = std::move(mom.variance);
    }
    st.base_mean.resize(rows, m);
    st.base_var.resize(m);

    // Residual y - b1 - W1 q per row, kept current as units change.
    Matrix resid = y - st.q_mean * model.W1.transpose();
    resid.rowwise() -= model.b1.transpose();
    const Vector w_norm2 = model.W1.colwise().squaredNorm().transpose();
    Vector lin(rows);
    for (int cycle = 0; cycle < n_cycles; ++cycle) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double scale = 1.0 + w_norm2[j];
            st.base_var[j] = model.sigma2 / scale;
            const TruncationInterval iv = model.trug.interval(j);
            // w_j' (y - b1 - sum_{k != j} w_k q_k)
            lin.noalias() = resid * model.W1.col(j);
            lin += w_norm2[j] * st.q_mean.col(j);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const double mean = (lin[r] + prior.base_mean(r, j)) / scale;
                st.base_mean(r, j) = mean;
                const auto mom = trunc_moments({mean, st.base_var[j]}, iv);
                lin[r] = mom.mean - st.q_mean(r, j);  // reused as the change in q_j
                st.q_mean(r, j) = mom.mean;
                st.q_var(r, j) = mom.variance;
            }
            resid.noalias() -= lin * model.W1.col(j).transpose();
        }
        ++st.cycles_run;
    }
    return st;
}

/// Maximum-likelihood gradient of the mean of ln p(y | x) over the batch: clamped phase from mean field,
/// free phase in closed form.
inline TggmGradients ml_gradients(const TggmModel& model, const Matrix& x, const Matrix& y, int n_cycles) {
    require(x.rows() > 0, "tggm: empty batch");
    const TrugLayer prior = prior_layer(model, x);
    const auto free = prior.moments();
    const MeanFieldState mf = mean_field_posterior(model, x, y, n_cycles);
    const double s2 = model.sigma2;
    const double inv_b = 1.0 / static_cast<double>(x.rows());

    TggmGradients out{TggmGrad::zeros_like(model), TrugGrad::zeros_like(model.trug)};
    Matrix resid = y - mf.q_mean * model.W1.transpose();
    resid.rowwise() -= model.b1.transpose();

    // E[h h'] under mean field is q q' + diag(v).
    const Vector v_sum = mf.q_var.colwise().sum().transpose();
    out.weights.dW1 = (resid.transpose() * mf.q_mean - model.W1 * v_sum.asDiagonal()) * (inv_b / s2);
    out.weights.db1 = resid.colwise().sum().transpose() * (inv_b / s2);
    const Matrix dq = mf.q_mean - free.mean;
    out.weights.dW0 = dq.transpose() * x * (inv_b / s2);
    out.weights.db0 = dq.colwise().sum().transpose() * (inv_b / s2);

    // -dE/dsigma2 = (A + B) / (2 sigma2^2) with A the output and B the hidden squared residual.
    const Vector w_norm2 = model.W1.colwise().squaredNorm().transpose();
    const double clamped_a = resid.squaredNorm() + mf.q_var.colwise().sum().dot(w_norm2);
    const double clamped_b = (mf.q_mean - prior.base_mean).squaredNorm() + mf.q_var.sum();
    const double free_a = static_cast<double>(x.rows() * model.outputs()) * s2;
    const double free_b = (free.mean - prior.base_mean).squaredNorm() + free.variance.sum();
    if (model.learn_sigma2)
        out.weights.dsigma2 = (clamped_a + clamped_b - free_a - free_b) * inv_b / (2.0 * s2 * s2);

    const TrugLayer clamped(mf.base_mean, mf.base_var, model.trug);
    out.trunc = accumulate_boundary_grad(model.trug, clamped.boundary_densities(), prior.boundary_densities());
    return out;
}

inline TggmGrad ml_weight_grad(const TggmModel& model, const Matrix& x, const Matrix& y, int n_cycles) {
    return ml_gradients(model, x, y, n_cycles).weights;
}

inline TrugGrad ml_trunc_grad(const TggmModel& model, const Matrix& x, const Matrix& y, int n_cycles) {
    return ml_gradients(model, x, y, n_cycles).trunc;
}

/// Root mean squared error of predict over all rows and outputs. With `target_scale` (per-output
/// standard deviation of a standardised target) the error is reported in the original units.
inline double rmse(const TggmModel& model, const Matrix& x, const Matrix& y, const Vector& target_scale = Vector()) {
    require(x.rows() > 0 && y.rows() == x.rows() && y.cols() == model.outputs(), "tggm: rmse shape mismatch");
    Matrix err = predict(model, x) - y;
    if (target_scale.size() > 0) {
        require(target_scale.size() == y.cols(), "tggm: target scale length mismatch");
        err.array().rowwise() *= target_scale.transpose().array();
    }
    return std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
}

}  // namespace trug

#endif  // TRUG_TGGM_HPP
