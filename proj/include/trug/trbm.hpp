#ifndef TRUG_TRBM_HPP
#define TRUG_TRBM_HPP

// Temporal TruG-RBM. Step t is a TruG-RBM over (x_t, h_t) whose biases depend on the history:
//   visible bias  b - a/2 + W3 x_{t-1}             (x_i^2 = x_i folds the diagonal term a into the bias)
//   hidden bias   c + W2 x_{t-1} + W4 h_{t-1}
// Step 1 uses the same W1, d and truncation points with the history terms removed, and either the
// shared biases or a separate initial pair (b_init, c_init).
//
// Per-step batches stack the sequences that are active at that step, one per row.

#include "errors.hpp"
#include "linalg.hpp"
#include "nonlinearity.hpp"
#include "rbm.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace trug {

struct TrbmModel {
    Matrix W1;  // n x m
    Matrix W2;  // m x n
    Matrix W3;  // n x n
    Matrix W4;  // m x m
    Vector a;   // n
    Vector b;   // n
    Vector c;   // m
    Vector d;   // m
    TrugParams trug;
    bool separate_initial = false;
    Vector b_init;  // n when separate_initial
    Vector c_init;  // m when separate_initial

    Eigen::Index visible() const { return W1.rows(); }
    Eigen::Index hidden() const { return W1.cols(); }

    void validate() const {
        const auto n = visible(), m = hidden();
        require(W2.rows() == m && W2.cols() == n && W3.rows() == n && W3.cols() == n && W4.rows() == m &&
                    W4.cols() == m && a.size() == n && b.size() == n && c.size() == m && d.size() == m,
                "trbm: inconsistent shapes");
        require(!separate_initial || (b_init.size() == n && c_init.size() == m), "trbm: initial biases missing");
        require((d.array() > 0).all(), "trbm: hidden precisions must be positive");
        require(W1.allFinite() && W2.allFinite() && W3.allFinite() && W4.allFinite() && a.allFinite() &&
                    b.allFinite() && c.allFinite() && d.allFinite() && b_init.allFinite() && c_init.allFinite(),
                "trbm: non-finite parameter");
        trug.validate();
        trug.check_units(m);
    }

    static TrbmModel zeros(Eigen::Index n, Eigen::Index m, TrugParams trug, bool separate_initial = false) {
        TrbmModel model{Matrix::Zero(n, m), Matrix::Zero(m, n), Matrix::Zero(n, n), Matrix::Zero(m, m),
                        Vector::Zero(n),    Vector::Zero(n),    Vector::Zero(m),    Vector::Ones(m),
                        std::move(trug),    separate_initial,   Vector(),           Vector()};
        if (separate_initial) {
            model.b_init = Vector::Zero(n);
            model.c_init = Vector::Zero(m);
        }
        model.validate();
        return model;
    }
};

/// All four weight matrices ~ N(0, weight_sd^2); biases 0, d = 1.
template <class Urbg>
TrbmModel initialize_trbm(Eigen::Index n, Eigen::Index m, TrugParams trug, Urbg& rng, double weight_sd = 0.1,
                          bool separate_initial = false) {
    TrbmModel model = TrbmModel::zeros(n, m, std::move(trug), separate_initial);
    std::normal_distribution<double> noise(0.0, weight_sd);
    for (Matrix* w : {&model.W1, &model.W2, &model.W3, &model.W4})
        for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = noise(rng);
    return model;
}

struct TrbmGrad {
    Matrix dW1, dW2, dW3, dW4;
    Vector da, db, dc, dd;
    Vector db_init, dc_init;

    static TrbmGrad zeros_like(const TrbmModel& m) {
        return {Matrix::Zero(m.W1.rows(), m.W1.cols()), Matrix::Zero(m.W2.rows(), m.W2.cols()),
                Matrix::Zero(m.W3.rows(), m.W3.cols()), Matrix::Zero(m.W4.rows(), m.W4.cols()),
                Vector::Zero(m.visible()),              Vector::Zero(m.visible()),
                Vector::Zero(m.hidden()),               Vector::Zero(m.hidden()),
                Vector::Zero(m.b_init.size()),          Vector::Zero(m.c_init.size())};
    }

    TrbmGrad& operator+=(const TrbmGrad& o) {
        dW1 += o.dW1;
        dW2 += o.dW2;
        dW3 += o.dW3;
        dW4 += o.dW4;
        da += o.da;
        db += o.db;
        dc += o.dc;
        dd += o.dd;
        db_init += o.db_init;
        dc_init += o.dc_init;
        return *this;
    }

    TrbmGrad& operator*=(double s) {
        for (Matrix* m : {&dW1, &dW2, &dW3, &dW4}) *m *= s;
        for (Vector* v : {&da, &db, &dc, &dd, &db_init, &dc_init}) *v *= s;
        return *this;
    }
};

struct TrbmGradients {
    TrbmGrad weights;
    TrugGrad trunc;
};

/// Binary sequences, each T_s x n.
struct SequenceBatch {
    std::vector<Matrix> sequences;

    std::size_t size() const { return sequences.size(); }
    Eigen::Index width() const { return sequences.empty() ? 0 : sequences.front().cols(); }

    Eigen::Index max_length() const {
        Eigen::Index t = 0;
        for (const auto& s : sequences) t = std::max(t, s.rows());
        return t;
    }

    std::vector<Eigen::Index> lengths() const {
        std::vector<Eigen::Index> out;
        for (const auto& s : sequences) out.push_back(s.rows());
        return out;
    }

    void validate(Eigen::Index min_length) const {
        require(!sequences.empty(), "sequence batch is empty");
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            const Matrix& s = sequences[i];
            require(s.cols() == width(), "sequence " + std::to_string(i) + " has a different frame width");
            require(s.rows() >= min_length, "sequence " + std::to_string(i) + " is shorter than " +
                                                std::to_string(min_length) + " frames");
            require((s.array() == 0.0 || s.array() == 1.0).all(),
                    "sequence " + std::to_string(i) + " is not binary");
        }
    }
};

/// History of one step for a stack of sequences. Empty matrices mean the initial step.
struct StepHistory {
    Matrix x_prev;
    Matrix h_prev;

    bool initial() const { return x_prev.size() == 0; }
};

namespace detail {

inline Matrix trbm_hidden_bias(const TrbmModel& model, const StepHistory& hist, Eigen::Index rows) {
    if (hist.initial()) {
        const Vector& c = model.separate_initial ? model.c_init : model.c;
        return c.transpose().replicate(rows, 1);
    }
    require(hist.x_prev.rows() == rows && hist.h_prev.rows() == rows, "trbm: history rows differ from batch");
    Matrix out = hist.x_prev * model.W2.transpose() + hist.h_prev * model.W4.transpose();
    out.rowwise() += model.c.transpose();
    return out;
}

inline Matrix trbm_visible_bias(const TrbmModel& model, const StepHistory& hist, Eigen::Index rows) {
    const Vector& b = hist.initial() && model.separate_initial ? model.b_init : model.b;
    const RowVector base = (b - 0.5 * model.a).transpose();
    if (hist.initial()) return base.replicate(rows, 1);
    Matrix out = hist.x_prev * model.W3.transpose();
    out.rowwise() += base;
    return out;
}

inline TrugLayer trbm_hidden_given(const TrbmModel& model, const Matrix& x, const Matrix& hidden_bias) {
    Matrix mean = x * model.W1 + hidden_bias;
    mean.array().rowwise() /= model.d.transpose().array();
    return TrugLayer(std::move(mean), model.d.cwiseInverse(), model.trug);
}

inline Matrix trbm_visible_given(const TrbmModel& model, const Matrix& h, const Matrix& visible_bias) {
    return sigmoid(Matrix(h * model.W1.transpose() + visible_bias));
}

/// Adds the chain-rule image of per-row effective-bias gradients to `g`. Every argument is a sum over rows.
inline void add_step_grad(const TrbmModel& model, const StepHistory& hist, const Matrix& dW1, const Matrix& d_vbias,
                          const Matrix& d_hbias, const Vector& dd, TrbmGrad& g) {
    g.dW1 += dW1;
    g.dd += dd;
    const Vector dvb = d_vbias.colwise().sum().transpose();
    const Vector dhb = d_hbias.colwise().sum().transpose();
    g.da -= 0.5 * dvb;
    if (hist.initial() && model.separate_initial) {
        g.db_init += dvb;
        g.dc_init += dhb;
        return;
    }
    g.db += dvb;
    g.dc += dhb;
    if (!hist.initial()) {
        g.dW3 += d_vbias.transpose() * hist.x_prev;
        g.dW2 += d_hbias.transpose() * hist.x_prev;
        g.dW4 += d_hbias.transpose() * hist.h_prev;
    }
}

inline std::vector<std::size_t> active_at(const SequenceBatch& batch, Eigen::Index t) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (batch.sequences[i].rows() > t) idx.push_back(i);
    return idx;
}

inline Matrix gather_rows(const std::vector<Matrix>& mats, const std::vector<std::size_t>& idx, Eigen::Index t) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), mats[idx.front()].cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = mats[idx[r]].row(t);
    return out;
}

inline StepHistory history_at(const SequenceBatch& batch, const std::vector<Matrix>& hidden,
                              const std::vector<std::size_t>& idx, Eigen::Index t) {
    if (t == 0) return {};
    return {gather_rows(batch.sequences, idx, t - 1), gather_rows(hidden, idx, t - 1)};
}

}  // namespace detail

/// Filtering conditional p(h_t | x_{t-1}, h_{t-1}, x_t) for each row.
inline TrugLayer hidden_filter_conditional(const TrbmModel& model, const StepHistory& hist, const Matrix& x) {
    require(x.cols() == model.visible(), "trbm: visible width mismatch");
    return detail::trbm_hidden_given(model, x, detail::trbm_hidden_bias(model, hist, x.rows()));
}

/// The step model p(x_t, h_t | x_{t-1}, h_{t-1}) of a single history as a standalone TruG-RBM.
inline RbmModel step_model(const TrbmModel& model, const StepHistory& hist) {
    require(hist.initial() || hist.x_prev.rows() == 1, "step_model takes a single history row");
    return {model.W1, detail::trbm_visible_bias(model, hist, 1).row(0).transpose(),
            detail::trbm_hidden_bias(model, hist, 1).row(0).transpose(), model.d, model.trug};
}

enum class FilterMode { sample, mean };

/// Forward pass of q(H | X) for every sequence: sampled hiddens, or the chain of conditional means.
template <class Urbg>
std::vector<Matrix> filter_posterior(const TrbmModel& model, const SequenceBatch& batch, FilterMode mode,
                                     Urbg& rng) {
    batch.validate(1);
    require(batch.width() == model.visible(), "trbm: frame width differs from visible count");
    std::vector<Matrix> hidden;
    for (const auto& s : batch.sequences) hidden.emplace_back(s.rows(), model.hidden());
    for (Eigen::Index t = 0; t < batch.max_length(); ++t) {
        const auto idx = detail::active_at(batch, t);
        const TrugLayer layer =
            hidden_filter_conditional(model, detail::history_at(batch, hidden, idx, t),
                                      detail::gather_rows(batch.sequences, idx, t));
        const Matrix h = mode == FilterMode::sample ? layer.sample(rng) : layer.moments().mean;
        for (std::size_t r = 0; r < idx.size(); ++r) hidden[idx[r]].row(t) = h.row(static_cast<Eigen::Index>(r));
    }
    return hidden;
}

template <class Urbg>
Matrix filter_posterior_sample(const TrbmModel& model, const Matrix& sequence, Urbg& rng,
                               FilterMode mode = FilterMode::sample) {
    return filter_posterior(model, SequenceBatch{{sequence}}, mode, rng).front();
}

/// CD-k contribution of one step, summed over rows. Returns the boundary densities of both phases.
template <class Urbg>
std::pair<BoundaryDensities, BoundaryDensities> step_cd(const TrbmModel& model, const StepHistory& hist,
                                                        const Matrix& x, int k, Urbg& rng, TrbmGrad& g) {
    const Matrix hb = detail::trbm_hidden_bias(model, hist, x.rows());
    const Matrix vb = detail::trbm_visible_bias(model, hist, x.rows());
    const TrugLayer pos = detail::trbm_hidden_given(model, x, hb);
    Matrix xk = x;
    for (int s = 0; s < k; ++s) {
        const Matrix h = detail::trbm_hidden_given(model, xk, hb).sample(rng);
        xk = bernoulli(detail::trbm_visible_given(model, h, vb), rng);
    }
    const TrugLayer neg = detail::trbm_hidden_given(model, xk, hb);
    const auto mp = pos.moments();
    const auto mn = neg.moments();
    const Vector dd = -0.5 * (mp.second_moment() - mn.second_moment()).colwise().sum().transpose();
    detail::add_step_grad(model, hist, x.transpose() * mp.mean - xk.transpose() * mn.mean, x - xk,
                          mp.mean - mn.mean, dd, g);
    return {pos.boundary_densities(), neg.boundary_densities()};
}

/// Lower-bound gradient: one sampled filtering trajectory per sequence, CD-k at every step,
/// summed over steps and averaged over sequences.
template <class Urbg>
TrbmGradients lower_bound_gradients(const TrbmModel& model, const SequenceBatch& batch, int k, Urbg& rng) {
    batch.validate(2);
    require(k >= 1, "trbm: k must be at least 1");
    const std::vector<Matrix> hidden = filter_posterior(model, batch, FilterMode::sample, rng);
    TrbmGradients out{TrbmGrad::zeros_like(model), TrugGrad::zeros_like(model.trug)};
    const double count = static_cast<double>(batch.size());
    for (Eigen::Index t = 0; t < batch.max_length(); ++t) {
        const auto idx = detail::active_at(batch, t);
        const auto [data, free] = step_cd(model, detail::history_at(batch, hidden, idx, t),
                                          detail::gather_rows(batch.sequences, idx, t), k, rng, out.weights);
        TrugGrad gt = accumulate_boundary_grad(model.trug, data, free);
        gt *= static_cast<double>(idx.size()) / count;
        out.trunc += gt;
    }
    out.weights *= 1.0 / count;
    return out;
}

template <class Urbg>
TrbmGrad lower_bound_weight_grad(const TrbmModel& model, const SequenceBatch& batch, int k, Urbg& rng) {
    return lower_bound_gradients(model, batch, k, rng).weights;
}

template <class Urbg>
TrugGrad lower_bound_trunc_grad(const TrbmModel& model, const SequenceBatch& batch, int k, Urbg& rng) {
    return lower_bound_gradients(model, batch, k, rng).trunc;
}

/// Exact gradient of ln p(x_t | x_{t-1}, h_{t-1}) for a single history, by enumeration over x_t.
inline TrbmGradients exact_step_gradients(const TrbmModel& model, const StepHistory& hist, const RowVector& x) {
    const RbmModel step = step_model(model, hist);
    const auto g = exact_gradients(step, Matrix(x));
    TrbmGradients out{TrbmGrad::zeros_like(model), g.trunc};
    detail::add_step_grad(model, hist, g.weights.dW, g.weights.db.transpose(), g.weights.dc.transpose(),
                          g.weights.dd, out.weights);
    return out;
}

/// Predicted probabilities of frames 2..T from mean-mode filtering of frames 1..T-1.
inline Matrix predict_frames(const TrbmModel& model, const Matrix& sequence) {
    require(sequence.rows() >= 1, "trbm: empty history");
    Rng unused(0);
    const Matrix h = filter_posterior(model, SequenceBatch{{sequence}}, FilterMode::mean, unused).front();
    const Eigen::Index steps = sequence.rows();
    const StepHistory hist{sequence, h};
    // E[h_{t+1}] with the unknown x_{t+1} term left out of the hidden bias.
    Matrix mean = detail::trbm_hidden_bias(model, hist, steps);
    mean.array().rowwise() /= model.d.transpose().array();
    const Matrix eh = TrugLayer(std::move(mean), model.d.cwiseInverse(), model.trug).moments().mean;
    const Matrix p = detail::trbm_visible_given(model, eh, detail::trbm_visible_bias(model, hist, steps));
    return p.topRows(steps - 1);
}

/// E[x_{t+1}] given frames 1..t.
inline Vector predict_next_frame(const TrbmModel& model, const Matrix& history) {
    require(history.rows() >= 1, "trbm: empty history");
    Matrix extended(history.rows() + 1, history.cols());
    extended << history, RowVector::Zero(history.cols());
    return predict_frames(model, extended).bottomRows(1).transpose();
}

/// Mean over all predicted frames of the per-frame sum of squared errors.
inline double prediction_error(const TrbmModel& model, const SequenceBatch& batch) {
    batch.validate(2);
    double total = 0.0;
    double frames = 0.0;
    for (const auto& s : batch.sequences) {
        const Matrix p = predict_frames(model, s);
        total += (p - s.bottomRows(s.rows() - 1)).squaredNorm();
        frames += static_cast<double>(p.rows());
    }
    return total / frames;
}

/// Sequences generated by running `gibbs_sweeps` sweeps of each step model, warm-started from the previous frame.
template <class Urbg>
SequenceBatch generate_sequences(const TrbmModel& model, Eigen::Index length, Eigen::Index count, int gibbs_sweeps,
                                 Urbg& rng) {
    require(length >= 1 && count >= 0 && gibbs_sweeps >= 1, "trbm: invalid generation request");
    SequenceBatch out;
    out.sequences.assign(static_cast<std::size_t>(count), Matrix(length, model.visible()));
    if (count == 0) return out;
    StepHistory hist;
    Matrix x = bernoulli(Matrix::Constant(count, model.visible(), 0.5), rng);
    for (Eigen::Index t = 0; t < length; ++t) {
        const Matrix hb = detail::trbm_hidden_bias(model, hist, count);
        const Matrix vb = detail::trbm_visible_bias(model, hist, count);
        Matrix h;
        for (int s = 0; s < gibbs_sweeps; ++s) {
            h = detail::trbm_hidden_given(model, x, hb).sample(rng);
            x = bernoulli(detail::trbm_visible_given(model, h, vb), rng);
        }
        for (Eigen::Index r = 0; r < count; ++r) out.sequences[static_cast<std::size_t>(r)].row(t) = x.row(r);
        hist = {x, h};
    }
    return out;
}

}  // namespace trug

#endif  // TRUG_TRBM_HPP
