#ifndef TRUG_TRAIN_HPP
#define TRUG_TRAIN_HPP

// Minibatch training loops for the three models, shared by the CLI and the acceptance runs.
// Precisions d and the TGGM noise variance are updated on the log scale.

#include "errors.hpp"
#include "linalg.hpp"
#include "optim.hpp"
#include "rbm.hpp"
#include "tggm.hpp"
#include "trbm.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace trug {

struct TrainOptions {
    OptimizerConfig optimizer;
    int cd_k = 1;
    bool persistent = false;
    bool learn_d = true;
    int mf_cycles = 10;
    double min_gap = 1e-3;
};

inline long steps_per_epoch(Eigen::Index examples, int batch_size) {
    require(batch_size >= 1, "batch_size must be positive");
    return static_cast<long>((examples + batch_size - 1) / batch_size);
}

/// Fresh permutation of 0..n-1 drawn from rng.
template <class Urbg>
std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, Urbg& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(idx[i - 1], idx[pick(rng)]);
    }
    return idx;
}

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end) {
    Matrix out(static_cast<Eigen::Index>(end - begin), m.cols());
    for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = m.row(idx[i]);
    return out;
}

namespace detail {

inline void add_trunc_slots(std::vector<ParamSlot>& slots, TrugParams& trug, const TrugGrad& g) {
    if (trug.trainable.lower) slots.push_back(slot("trunc_lower", trug.lower, g.d_lower, true));
    if (trug.trainable.upper) slots.push_back(slot("trunc_upper", trug.upper, g.d_upper, true));
}

inline void check_model_finite(bool finite, const char* model) {
    if (!finite) throw NumericalError(std::string(model) + ": parameters became non-finite");
}

}  // namespace detail

inline void apply_step(const TrainOptions& opt, OptimizerState& state, RbmModel& model, const RbmGradients& g) {
    std::vector<ParamSlot> slots{slot("W", model.W, g.weights.dW), slot("b", model.b, g.weights.db),
                                 slot("c", model.c, g.weights.dc)};
    Vector log_d = model.d.array().log();
    const Vector g_log_d = g.weights.dd.cwiseProduct(model.d);
    if (opt.learn_d) slots.push_back(slot("log_d", log_d, g_log_d));
    detail::add_trunc_slots(slots, model.trug, g.trunc);
    step(opt.optimizer, state, slots);
    if (opt.learn_d) model.d = log_d.array().exp();
    model.trug = clamp_after_step(std::move(model.trug), opt.min_gap);
    detail::check_model_finite(model.W.allFinite() && model.b.allFinite() && model.c.allFinite() &&
                                   model.d.allFinite() && (model.d.array() > 0).all(),
                               "rbm");
}

inline void apply_step(const TrainOptions& opt, OptimizerState& state, TrbmModel& model, const TrbmGradients& g) {
    const TrbmGrad& w = g.weights;
    std::vector<ParamSlot> slots{slot("W1", model.W1, w.dW1), slot("W2", model.W2, w.dW2),
                                 slot("W3", model.W3, w.dW3), slot("W4", model.W4, w.dW4),
                                 slot("a", model.a, w.da),    slot("b", model.b, w.db),
                                 slot("c", model.c, w.dc)};
    if (model.separate_initial) {
        slots.push_back(slot("b_init", model.b_init, w.db_init));
        slots.push_back(slot("c_init", model.c_init, w.dc_init));
    }
    Vector log_d = model.d.array().log();
    const Vector g_log_d = w.dd.cwiseProduct(model.d);
    if (opt.learn_d) slots.push_back(slot("log_d", log_d, g_log_d));
    detail::add_trunc_slots(slots, model.trug, g.trunc);
    step(opt.optimizer, state, slots);
    if (opt.learn_d) model.d = log_d.array().exp();
    model.trug = clamp_after_step(std::move(model.trug), opt.min_gap);
    detail::check_model_finite(model.W1.allFinite() && model.W2.allFinite() && model.W3.allFinite() &&
                                   model.W4.allFinite() && model.a.allFinite() && model.b.allFinite() &&
                                   model.c.allFinite() && model.d.allFinite() && (model.d.array() > 0).all(),
                               "trbm");
}

inline void apply_step(const TrainOptions& opt, OptimizerState& state, TggmModel& model, const TggmGradients& g) {
    const TggmGrad& w = g.weights;
    std::vector<ParamSlot> slots{slot("W0", model.W0, w.dW0), slot("b0", model.b0, w.db0),
                                 slot("W1", model.W1, w.dW1), slot("b1", model.b1, w.db1)};
    double log_s2 = std::log(model.sigma2);
    const double g_log_s2 = w.dsigma2 * model.sigma2;
    if (model.learn_sigma2) slots.push_back(slot("log_sigma2", log_s2, g_log_s2));
    detail::add_trunc_slots(slots, model.trug, g.trunc);
    step(opt.optimizer, state, slots);
    if (model.learn_sigma2) model.sigma2 = std::exp(log_s2);
    model.trug = clamp_after_step(std::move(model.trug), opt.min_gap);
    detail::check_model_finite(model.W0.allFinite() && model.b0.allFinite() && model.W1.allFinite() &&
                                   model.b1.allFinite() && std::isfinite(model.sigma2) && model.sigma2 > 0.0,
                               "tggm");
}

/// One pass of CD-k over shuffled minibatches. `chain` carries persistent negative chains when opt.persistent.
template <class Urbg>
void train_rbm_epoch(RbmModel& model, const Matrix& x, const TrainOptions& opt, OptimizerState& state, Urbg& rng,
                     GibbsChain* chain = nullptr) {
    require(x.rows() > 0 && x.cols() == model.visible(), "train: data does not match the model");
    const auto idx = shuffled_indices(x.rows(), rng);
    const auto bs = static_cast<std::size_t>(opt.optimizer.batch_size);
    for (std::size_t begin = 0; begin < idx.size(); begin += bs) {
        const Matrix batch = take_rows(x, idx, begin, std::min(begin + bs, idx.size()));
        const auto g = cd_gradients(model, batch, opt.cd_k, rng, opt.persistent ? chain : nullptr);
        apply_step(opt, state, model, g);
    }
}

template <class Urbg>
void train_trbm_epoch(TrbmModel& model, const SequenceBatch& data, const TrainOptions& opt, OptimizerState& state,
                      Urbg& rng) {
    require(data.size() > 0 && data.width() == model.visible(), "train: sequences do not match the model");
    const auto idx = shuffled_indices(static_cast<Eigen::Index>(data.size()), rng);
    const auto bs = static_cast<std::size_t>(opt.optimizer.batch_size);
    for (std::size_t begin = 0; begin < idx.size(); begin += bs) {
        SequenceBatch batch;
        for (std::size_t i = begin; i < std::min(begin + bs, idx.size()); ++i)
            batch.sequences.push_back(data.sequences[static_cast<std::size_t>(idx[i])]);
        apply_step(opt, state, model, lower_bound_gradients(model, batch, opt.cd_k, rng));
    }
}

template <class Urbg>
void train_tggm_epoch(TggmModel& model, const Matrix& x, const Matrix& y, const TrainOptions& opt,
                      OptimizerState& state, Urbg& rng) {
    require(x.rows() > 0 && x.rows() == y.rows(), "train: inputs and targets differ in length");
    const auto idx = shuffled_indices(x.rows(), rng);
    const auto bs = static_cast<std::size_t>(opt.optimizer.batch_size);
    for (std::size_t begin = 0; begin < idx.size(); begin += bs) {
        const std::size_t end = std::min(begin + bs, idx.size());
        apply_step(opt, state, model, ml_gradients(model, take_rows(x, idx, begin, end), take_rows(y, idx, begin, end),
                                                   opt.mf_cycles));
    }
}

/// Mean squared error of the one-step mean-field reconstruction x -> E[h|x] -> p(x|E[h]); a cheap training proxy.
inline double reconstruction_error(const RbmModel& model, const Matrix& x) {
    const Matrix h = hidden_conditional(model, x).moments().mean;
    return (visible_conditional(model, h) - x).squaredNorm() / static_cast<double>(x.rows());
}

}  // namespace trug

#endif  // TRUG_TRAIN_HPP
