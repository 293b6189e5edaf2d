#ifndef TRUG_AIS_HPP
#define TRUG_AIS_HPP

// Annealed importance sampling for the TruG-RBM partition function.
//
// The base model A has visible biases b_A and hidden energy d_j h_j^2 / 2 on the same
// truncation intervals; p_k mixes A and the target B at inverse temperature beta_k with
// separate hidden blocks h_A (precision (1 - beta) d) and h_B (precision beta d).

#include "errors.hpp"
#include "linalg.hpp"
#include "rbm.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace trug {

struct AisConfig {
    int n_temps = 10000;  // K
    int n_chains = 100;   // M
    std::vector<double> schedule;  // custom beta_0..beta_K; empty means linear
    Vector base_bias;              // b_A; empty means zeros

    std::vector<double> betas() const {
        std::vector<double> out = schedule;
        if (out.empty()) {
            require(n_temps >= 1, "ais: n_temps must be positive");
            out.resize(static_cast<std::size_t>(n_temps) + 1);
            for (int k = 0; k <= n_temps; ++k) out[static_cast<std::size_t>(k)] = static_cast<double>(k) / n_temps;
        }
        require(out.size() >= 2 && out.front() == 0.0 && out.back() == 1.0, "ais: schedule must run from 0 to 1");
        for (std::size_t k = 1; k < out.size(); ++k)
            require(out[k] > out[k - 1], "ais: schedule must be strictly increasing");
        return out;
    }

    Vector bias_for(const RbmModel& model) const {
        if (base_bias.size() == 0) return Vector::Zero(model.visible());
        require(base_bias.size() == model.visible(), "ais: base bias length differs from visible count");
        return base_bias;
    }
};

struct AisEstimate {
    double log_z = 0.0;
    Vector log_weights;
    double std_err = 0.0;
    double ess = 0.0;
};

/// Per-pixel logit of the data marginals, clipped to [0.001, 0.999].
inline Vector base_bias_from_data(const Matrix& x) {
    require(x.rows() > 0, "base_bias_from_data: empty data");
    const Vector p = x.colwise().mean().transpose().cwiseMax(0.001).cwiseMin(0.999);
    return (p.array() / (1.0 - p.array())).log();
}

inline double base_log_partition(const AisConfig& config, const RbmModel& model) {
    const Vector ba = config.bias_for(model);
    double out = 0.0;
    for (Eigen::Index i = 0; i < ba.size(); ++i) out += softplus(ba[i]);
    for (Eigen::Index j = 0; j < model.hidden(); ++j) out += hidden_log_mass(model.d[j], 0.0, model.trug.interval(j));
    return out;
}

namespace detail {

/// x-dependent part of ln p*_beta(x) for each row: the visible term plus the h_B block
/// relative to its value at x = 0. The h_A block does not depend on x.
inline Vector ais_relative_log_prob(const RbmModel& model, const Vector& ba, double beta, const Matrix& x,
                                    const Matrix& u) {
    Vector out = x * ba + beta * (x * (model.b - ba));
    if (beta == 0.0) return out;
    for (Eigen::Index j = 0; j < model.hidden(); ++j) {
        const TruncationInterval iv = model.trug.interval(j);
        const double p = beta * model.d[j];
        const double ref = hidden_log_mass(p, beta * model.c[j], iv);
        for (Eigen::Index r = 0; r < x.rows(); ++r) out[r] += hidden_log_mass(p, beta * u(r, j), iv) - ref;
    }
    return out;
}

}  // namespace detail

/// ln p*_beta(x) including both hidden blocks; an empty block (precision 0) is omitted, so
/// beta = 0 gives the base model and beta = 1 gives rbm's ln p*(x).
inline double intermediate_unnorm_log_prob(const AisConfig& config, const RbmModel& model, double beta,
                                           const Vector& x) {
    require(beta >= 0.0 && beta <= 1.0, "ais: beta outside [0, 1]");
    require(x.size() == model.visible(), "ais: visible width mismatch");
    const Vector ba = config.bias_for(model);
    double out = beta == 1.0 ? model.b.dot(x) : ba.dot(x) + beta * (model.b - ba).dot(x);
    const Vector u = model.W.transpose() * x + model.c;
    for (Eigen::Index j = 0; j < model.hidden(); ++j) {
        const TruncationInterval iv = model.trug.interval(j);
        if (beta < 1.0) out += hidden_log_mass((1.0 - beta) * model.d[j], 0.0, iv);
        if (beta > 0.0) out += hidden_log_mass(beta * model.d[j], beta * u[j], iv);
    }
    return out;
}

/// Effective sample size (sum w)^2 / sum w^2 of importance log-weights.
inline double effective_sample_size(const Vector& log_weights) {
    const Vector w = (log_weights.array() - log_weights.maxCoeff()).exp();
    return w.sum() * w.sum() / w.squaredNorm();
}

template <class Urbg>
AisEstimate run_ais(const AisConfig& config, const RbmModel& model, Urbg& rng) {
    model.validate();
    require(config.n_chains >= 1, "ais: n_chains must be positive");
    const std::vector<double> betas = config.betas();
    const Vector ba = config.bias_for(model);
    const Eigen::Index chains = config.n_chains;

    Matrix x = bernoulli(sigmoid(Matrix(ba.transpose().replicate(chains, 1))), rng);
    Vector log_w = Vector::Zero(chains);
    const Vector db = model.b - ba;
    for (std::size_t k = 1; k < betas.size(); ++k) {
        const Matrix u = (x * model.W).rowwise() + model.c.transpose();
        log_w += detail::ais_relative_log_prob(model, ba, betas[k], x, u) -
                 detail::ais_relative_log_prob(model, ba, betas[k - 1], x, u);
        if (k + 1 == betas.size()) break;

        // Transition leaving p_k invariant: h_B | x, then x | h_B. h_A never reaches x.
        const double beta = betas[k];
        Matrix mean = u;
        mean.array().rowwise() /= model.d.transpose().array();
        const TrugLayer layer(std::move(mean), (beta * model.d).cwiseInverse(), model.trug);
        const Matrix h = layer.sample(rng);
        Matrix logits = beta * (h * model.W.transpose());
        logits.rowwise() += (ba + beta * db).transpose();
        x = bernoulli(sigmoid(logits), rng);
    }

    // Fixed offset ln p*_B(0) - ln p*_A(0) from measuring both endpoints relative to x = 0.
    double offset = 0.0;
    for (Eigen::Index j = 0; j < model.hidden(); ++j) {
        const TruncationInterval iv = model.trug.interval(j);
        offset += hidden_log_mass(model.d[j], model.c[j], iv) - hidden_log_mass(model.d[j], 0.0, iv);
    }
    log_w.array() += offset;

    AisEstimate est;
    est.log_weights = log_w;
    est.log_z = base_log_partition(config, model) + log_mean_exp(log_w);
    const Vector w = (log_w.array() - log_w.maxCoeff()).exp();
    const double mean = w.mean();
    const double var = chains > 1 ? (w.array() - mean).square().sum() / static_cast<double>(chains - 1) : 0.0;
    est.std_err = std::sqrt(var / static_cast<double>(chains)) / mean;
    est.ess = effective_sample_size(log_w);
    return est;
}

struct TestLogProb {
    Vector per_example;
    double mean = 0.0;
    double log_z = 0.0;
    double log_z_spread = 0.0;  // standard deviation of log_z across runs (0 for one run)
    std::vector<AisEstimate> runs;
};

/// Held-out ln p(x) = ln p*(x) - ln Z with ln Z averaged over `runs` independent AIS runs.
template <class Urbg>
TestLogProb test_log_prob(const AisConfig& config, const RbmModel& model, const Matrix& x_test, Urbg& rng,
                          int runs = 1) {
    require(runs >= 1, "test_log_prob: runs must be positive");
    TestLogProb out;
    Vector log_zs(runs);
    for (int r = 0; r < runs; ++r) {
        out.runs.push_back(run_ais(config, model, rng));
        log_zs[r] = out.runs.back().log_z;
    }
    out.log_z = log_zs.mean();
    if (runs > 1) out.log_z_spread = std::sqrt((log_zs.array() - out.log_z).square().sum() / (runs - 1));
    out.per_example = log_unnorm_prob(model, x_test).array() - out.log_z;
    out.mean = x_test.rows() > 0 ? out.per_example.mean() : 0.0;
    return out;
}

}  // namespace trug

#endif  // TRUG_AIS_HPP
