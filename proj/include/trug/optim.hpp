#ifndef TRUG_OPTIM_HPP
#define TRUG_OPTIM_HPP

// Ascent optimisers over named parameter blocks. Truncation-point blocks follow their own
// annealed learning rate.

#include "errors.hpp"
#include "linalg.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace trug {

enum class OptimizerKind { sgd_momentum, rmsprop };

struct AnnealSchedule {
    double start = 1e-4;
    double end = 1e-6;
    long horizon = 1;

    void validate() const {
        require(std::isfinite(start) && start > 0.0 && std::isfinite(end) && end > 0.0,
                "anneal: rates must be positive");
        require(end <= start, "anneal: end rate exceeds start rate");
        require(horizon >= 1, "anneal: horizon must be at least 1");
    }
};

/// start * (end / start)^min(step / horizon, 1)
inline double anneal_rate(const AnnealSchedule& s, long step) {
    require(step >= 0, "anneal: negative step");
    const double frac = std::min(static_cast<double>(step) / static_cast<double>(s.horizon), 1.0);
    if (frac == 1.0) return s.end;
    return s.start * std::pow(s.end / s.start, frac);
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::rmsprop;
    double learning_rate = 1e-3;
    double decay = 0.95;  // momentum for sgd_momentum, squared-gradient decay for rmsprop
    int batch_size = 100;
    AnnealSchedule trunc;
    double epsilon = 1e-8;

    void validate() const {
        require(std::isfinite(learning_rate) && learning_rate > 0.0, "optimizer: learning_rate must be positive");
        require(decay >= 0.0 && decay < 1.0, "optimizer: decay must lie in [0, 1)");
        require(batch_size >= 1, "optimizer: batch_size must be positive");
        trunc.validate();
    }
};

/// One parameter block seen by the optimiser: `size` values at `value` with gradient at `grad`.
struct ParamSlot {
    std::string name;
    double* value;
    const double* grad;
    Eigen::Index size;
    bool truncation = false;
};

template <class Derived>
ParamSlot slot(std::string name, Eigen::DenseBase<Derived>& value, const Eigen::DenseBase<Derived>& grad,
               bool truncation = false) {
    require(value.size() == grad.size(), "optimizer: gradient shape differs for " + name);
    return {std::move(name), value.derived().data(), grad.derived().data(), value.size(), truncation};
}

inline ParamSlot slot(std::string name, double& value, const double& grad, bool truncation = false) {
    return {std::move(name), &value, &grad, 1, truncation};
}

struct OptimizerState {
    std::map<std::string, Vector> accumulators;
    long step = 0;
};

/// One ascent step over all slots; advances state.step. Every gradient is checked before any value moves.
inline void step(const OptimizerConfig& config, OptimizerState& state, const std::vector<ParamSlot>& slots) {
    for (const ParamSlot& s : slots) {
        for (Eigen::Index i = 0; i < s.size; ++i)
            if (!std::isfinite(s.grad[i]))
                throw NumericalError("non-finite gradient in parameter '" + s.name + "' at index " +
                                     std::to_string(i));
    }
    const double trunc_rate = anneal_rate(config.trunc, state.step);
    for (const ParamSlot& s : slots) {
        Vector& acc = state.accumulators[s.name];
        if (acc.size() == 0) acc = Vector::Zero(s.size);
        require(acc.size() == s.size, "optimizer: parameter '" + s.name + "' changed shape");
        const double rate = s.truncation ? trunc_rate : config.learning_rate;
        Eigen::Map<Vector> value(s.value, s.size);
        const Eigen::Map<const Vector> grad(s.grad, s.size);
        if (config.kind == OptimizerKind::sgd_momentum) {
            acc = config.decay * acc + grad;
            value += rate * acc;
        } else {
            acc = config.decay * acc + (1.0 - config.decay) * grad.cwiseProduct(grad);
            value.array() += rate * grad.array() / (acc.array() + config.epsilon).sqrt();
        }
    }
    ++state.step;
}

}  // namespace trug

#endif  // TRUG_OPTIM_HPP
