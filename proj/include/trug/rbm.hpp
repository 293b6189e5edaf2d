#ifndef TRUG_RBM_HPP
#define TRUG_RBM_HPP

// TruG-RBM over binary visibles and truncated-Gaussian hiddens.
//
// Energy: E(x, h) = 1/2 h' diag(d) h - x' W h - b' x - c' h, h_j in [xi1_j, xi2_j].
// Batches are row-major in the statistical sense: one example per row.

#include "errors.hpp"
#include "linalg.hpp"
#include "nonlinearity.hpp"
#include "truncnorm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace trug {

struct RbmModel {
    Matrix W;  // n x m
    Vector b;  // n
    Vector c;  // m
    Vector d;  // m, strictly positive
    TrugParams trug;

    Eigen::Index visible() const { return W.rows(); }
    Eigen::Index hidden() const { return W.cols(); }

    void validate() const {
        require(b.size() == W.rows() && c.size() == W.cols() && d.size() == W.cols(), "rbm: inconsistent shapes");
        require((d.array() > 0).all(), "rbm: hidden precisions must be positive");
        require(W.allFinite() && b.allFinite() && c.allFinite() && d.allFinite(), "rbm: non-finite parameter");
        trug.validate();
        trug.check_units(hidden());
    }

    static RbmModel zeros(Eigen::Index n, Eigen::Index m, TrugParams trug) {
        RbmModel model{Matrix::Zero(n, m), Vector::Zero(n), Vector::Zero(m), Vector::Ones(m), std::move(trug)};
        model.validate();
        return model;
    }
};

/// W ~ N(0, 0.01), b = c = 0, d = 1.
template <class Urbg>
RbmModel initialize(Eigen::Index n, Eigen::Index m, TrugParams trug, Urbg& rng, double weight_sd = 0.1) {
    RbmModel model = RbmModel::zeros(n, m, std::move(trug));
    std::normal_distribution<double> noise(0.0, weight_sd);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) model.W(i, j) = noise(rng);
    return model;
}

/// Ascent direction of the log-likelihood w.r.t. the natural parameters (d, not ln d).
struct RbmGrad {
    Matrix dW;
    Vector db;
    Vector dc;
    Vector dd;

    static RbmGrad zeros_like(const RbmModel& m) {
        return {Matrix::Zero(m.visible(), m.hidden()), Vector::Zero(m.visible()), Vector::Zero(m.hidden()),
                Vector::Zero(m.hidden())};
    }

    RbmGrad& operator+=(const RbmGrad& o) {
        dW += o.dW;
        db += o.db;
        dc += o.dc;
        dd += o.dd;
        return *this;
    }

    RbmGrad& operator*=(double s) {
        dW *= s;
        db *= s;
        dc *= s;
        dd *= s;
        return *this;
    }
};

struct RbmGradients {
    RbmGrad weights;
    TrugGrad trunc;
};

/// p(h | x) for each row of x: base mean (W'x + c)/d, variance 1/d.
inline TrugLayer hidden_conditional(const RbmModel& model, const Matrix& x) {
    require(x.cols() == model.visible(), "hidden_conditional: visible width mismatch");
    Matrix mean = (x * model.W).rowwise() + model.c.transpose();
    mean.array().rowwise() /= model.d.transpose().array();
    return TrugLayer(std::move(mean), model.d.cwiseInverse(), model.trug);
}

/// p(x_i = 1 | h) = sigmoid([W h + b]_i) for each row of h.
inline Matrix visible_conditional(const RbmModel& model, const Matrix& h) {
    require(h.cols() == model.hidden(), "visible_conditional: hidden width mismatch");
    Matrix a = (h * model.W.transpose()).rowwise() + model.b.transpose();
    return sigmoid(a);
}

/// A batch of Gibbs chains, one per row.
struct GibbsChain {
    Matrix x;
    Matrix h;
    std::int64_t step_count = 0;
};

template <class Urbg>
GibbsChain gibbs_sweep(const RbmModel& model, GibbsChain chain, Urbg& rng) {
    chain.h = hidden_conditional(model, chain.x).sample(rng);
    chain.x = bernoulli(visible_conditional(model, chain.h), rng);
    ++chain.step_count;
    return chain;
}

template <class Urbg>
GibbsChain run_chain(const RbmModel& model, GibbsChain chain, int sweeps, Urbg& rng) {
    for (int s = 0; s < sweeps; ++s) chain = gibbs_sweep(model, std::move(chain), rng);
    return chain;
}

namespace detail {

/// Weighted sufficient statistics of one phase: E[x h'], E[x], E[h], E[h^2] and boundary densities,
/// with the hidden expectations taken in closed form given each visible row.
struct PhaseStats {
    Matrix xh;
    Vector x;
    Vector h;
    Vector h2;
    BoundaryDensities boundary;  // 1 x m rows
};

inline PhaseStats phase_stats(const RbmModel& model, const Matrix& x, const Vector& weights, bool want_boundary) {
    const TrugLayer layer = hidden_conditional(model, x);
    const auto mom = layer.moments();
    PhaseStats s;
    const Matrix wh = mom.mean.array().colwise() * weights.array();
    s.xh = x.transpose() * wh;
    s.x = x.transpose() * weights;
    s.h = wh.colwise().sum().transpose();
    s.h2 = mom.second_moment().transpose() * weights;
    if (want_boundary) {
        const auto bd = layer.boundary_densities();
        s.boundary.lower = weights.transpose() * bd.lower;
        s.boundary.upper = weights.transpose() * bd.upper;
    }
    return s;
}

inline RbmGrad grad_from_stats(const PhaseStats& pos, const PhaseStats& neg) {
    return {pos.xh - neg.xh, pos.x - neg.x, pos.h - neg.h, -0.5 * (pos.h2 - neg.h2)};
}

inline Vector uniform_weights(Eigen::Index rows) {
    return Vector::Constant(rows, 1.0 / static_cast<double>(rows));
}

}  // namespace detail

/// CD-k estimate of the log-likelihood gradient. Negative-phase chains start at the data, or,
/// when `persistent` is given, continue from its state (persistent CD) and write it back.
template <class Urbg>
RbmGradients cd_gradients(const RbmModel& model, const Matrix& x_batch, int k, Urbg& rng,
                          GibbsChain* persistent = nullptr) {
    require(x_batch.rows() > 0, "cd: empty batch");
    require(k >= 1, "cd: k must be at least 1");
    GibbsChain chain;
    if (persistent != nullptr && persistent->x.size() > 0) {
        chain = std::move(*persistent);
    } else {
        chain.x = x_batch;
    }
    chain = run_chain(model, std::move(chain), k, rng);

    const auto pos = detail::phase_stats(model, x_batch, detail::uniform_weights(x_batch.rows()), true);
    const auto neg = detail::phase_stats(model, chain.x, detail::uniform_weights(chain.x.rows()), true);
    if (persistent != nullptr) *persistent = std::move(chain);
    return {detail::grad_from_stats(pos, neg), accumulate_boundary_grad(model.trug, pos.boundary, neg.boundary)};
}

template <class Urbg>
RbmGrad cd_weight_grad(const RbmModel& model, const Matrix& x_batch, int k, Urbg& rng) {
    return cd_gradients(model, x_batch, k, rng).weights;
}

template <class Urbg>
TrugGrad cd_trunc_grad(const RbmModel& model, const Matrix& x_batch, int k, Urbg& rng) {
    return cd_gradients(model, x_batch, k, rng).trunc;
}

/// ln of the integral of exp(-precision h^2 / 2 + linear h) over the interval.
inline double hidden_log_mass(double precision, double linear, const TruncationInterval& iv) {
    const double sd = std::sqrt(precision);
    const double g = linear / sd;
    const double lo = iv.has_lower() ? sd * iv.lower - g : -kInf;
    const double hi = iv.has_upper() ? sd * iv.upper - g : kInf;
    return 0.5 * g * g + normal::kLogSqrt2Pi - std::log(sd) + log_diff_cdf(lo, hi);
}

/// ln p*(x) for each row: the hidden units integrated out in closed form.
inline Vector log_unnorm_prob(const RbmModel& model, const Matrix& x) {
    require(x.cols() == model.visible(), "log_unnorm_prob: visible width mismatch");
    const Matrix u = (x * model.W).rowwise() + model.c.transpose();
    Vector out = x * model.b;
    for (Eigen::Index j = 0; j < model.hidden(); ++j) {
        const TruncationInterval iv = model.trug.interval(j);
        for (Eigen::Index r = 0; r < x.rows(); ++r) out[r] += hidden_log_mass(model.d[j], u(r, j), iv);
    }
    return out;
}

inline constexpr Eigen::Index kMaxEnumerableVisible = 20;

namespace detail {

inline void check_enumerable(Eigen::Index n) {
    if (n > kMaxEnumerableVisible)
        throw CapacityError("exact enumeration needs n <= " + std::to_string(kMaxEnumerableVisible) + ", got " +
                            std::to_string(n));
}

/// Visible states first .. first+count-1 of {0,1}^n; bit i of the state index is x_i.
inline Matrix visible_states(std::uint64_t first, Eigen::Index count, Eigen::Index n) {
    Matrix x(count, n);
    for (Eigen::Index r = 0; r < count; ++r) {
        const std::uint64_t s = first + static_cast<std::uint64_t>(r);
        for (Eigen::Index i = 0; i < n; ++i) x(r, i) = static_cast<double>((s >> i) & 1U);
    }
    return x;
}

inline constexpr Eigen::Index kEnumerationBlock = 4096;

/// Calls f(states, log_unnorm) for consecutive blocks of the 2^n visible states.
template <class F>
void for_each_state_block(const RbmModel& model, F&& f) {
    check_enumerable(model.visible());
    const std::uint64_t total = std::uint64_t{1} << model.visible();
    for (std::uint64_t first = 0; first < total; first += kEnumerationBlock) {
        const auto count = static_cast<Eigen::Index>(std::min<std::uint64_t>(kEnumerationBlock, total - first));
        const Matrix x = visible_states(first, count, model.visible());
        f(x, log_unnorm_prob(model, x));
    }
}

}  // namespace detail

/// ln Z by enumeration over all 2^n visible states.
inline double exact_log_partition(const RbmModel& model) {
    double mx = -kInf;
    double acc = 0.0;
    detail::for_each_state_block(model, [&](const Matrix&, const Vector& lp) {
        const double bm = lp.maxCoeff();
        if (bm > mx) {
            acc *= std::exp(mx - bm);
            mx = bm;
        }
        acc += (lp.array() - mx).exp().sum();
    });
    return mx + std::log(acc);
}

inline Vector exact_log_prob(const RbmModel& model, const Matrix& x) {
    detail::check_enumerable(model.visible());
    return log_unnorm_prob(model, x).array() - exact_log_partition(model);
}

/// Exact model probabilities of every visible state, indexed as in detail::visible_states.
inline Vector exact_state_probs(const RbmModel& model) {
    const double log_z = exact_log_partition(model);
    Vector p(Eigen::Index{1} << model.visible());
    Eigen::Index at = 0;
    detail::for_each_state_block(model, [&](const Matrix& x, const Vector& lp) {
        p.segment(at, x.rows()) = (lp.array() - log_z).exp();
        at += x.rows();
    });
    return p;
}

/// Exact gradient of the mean log-likelihood of x_batch, model phase by enumeration.
inline RbmGradients exact_gradients(const RbmModel& model, const Matrix& x_batch) {
    require(x_batch.rows() > 0, "exact_gradients: empty batch");
    const auto pos = detail::phase_stats(model, x_batch, detail::uniform_weights(x_batch.rows()), true);
    const double log_z = exact_log_partition(model);
    detail::PhaseStats neg{Matrix::Zero(model.visible(), model.hidden()), Vector::Zero(model.visible()),
                           Vector::Zero(model.hidden()), Vector::Zero(model.hidden()),
                           {Matrix::Zero(1, model.hidden()), Matrix::Zero(1, model.hidden())}};
    detail::for_each_state_block(model, [&](const Matrix& x, const Vector& lp) {
        const Vector w = (lp.array() - log_z).exp();
        const auto s = detail::phase_stats(model, x, w, true);
        neg.xh += s.xh;
        neg.x += s.x;
        neg.h += s.h;
        neg.h2 += s.h2;
        neg.boundary.lower += s.boundary.lower;
        neg.boundary.upper += s.boundary.upper;
    });
    return {detail::grad_from_stats(pos, neg), accumulate_boundary_grad(model.trug, pos.boundary, neg.boundary)};
}

/// Final visible states of independent chains started from uniform random visibles.
template <class Urbg>
Matrix sample_fantasy(const RbmModel& model, int n_steps, Eigen::Index n_samples, Urbg& rng) {
    require(n_steps >= 0 && n_samples >= 0, "sample_fantasy: negative count");
    GibbsChain chain;
    chain.x = bernoulli(Matrix::Constant(n_samples, model.visible(), 0.5), rng);
    return run_chain(model, std::move(chain), n_steps, rng).x;
}

}  // namespace trug

#endif  // TRUG_RBM_HPP
