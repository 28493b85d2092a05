#include "painscope/optim.hpp"

#include <cmath>
#include <numbers>

#include "painscope/errors.hpp"

namespace painscope {

std::string to_string(OptimizerKind kind) {
    switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Adagrad: return "adagrad";
    case OptimizerKind::RmsProp: return "rmsprop";
    }
    return "?";
}

std::string to_string(SchedulerKind kind) {
    switch (kind) {
    case SchedulerKind::None: return "none";
    case SchedulerKind::Step: return "step";
    case SchedulerKind::Exponential: return "exponential";
    case SchedulerKind::CosineAnnealing: return "cosine_annealing";
    }
    return "?";
}

OptimizerKind parse_optimizer(const std::string& name) {
    for (auto k : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Adagrad,
                   OptimizerKind::RmsProp}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown optimizer '" + name + "' (adam, adagrad, rmsprop, sgd)");
}

SchedulerKind parse_scheduler(const std::string& name) {
    if (name == "cosine") {
        return SchedulerKind::CosineAnnealing;
    }
    for (auto k : {SchedulerKind::None, SchedulerKind::Step, SchedulerKind::Exponential,
                   SchedulerKind::CosineAnnealing}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown scheduler '" + name +
                      "' (none, step, exponential, cosine_annealing)");
}

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, OptimizerKind kind, double lr,
                    const OptimizerHyper& hyper) {
    if (params.size() != grads.size()) {
        throw DimensionError("optimizer_step: " + std::to_string(params.size()) + " parameters vs " +
                             std::to_string(grads.size()) + " gradients");
    }
    const std::size_t n = params.size();
    ++state.steps;
    switch (kind) {
    case OptimizerKind::Sgd:
        for (std::size_t i = 0; i < n; ++i) {
            params[i] -= lr * grads[i];
        }
        break;
    case OptimizerKind::RmsProp:
        state.second.resize(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double& a = state.second[i];
            a = hyper.rho * a + (1.0 - hyper.rho) * grads[i] * grads[i];
            params[i] -= lr * grads[i] / (std::sqrt(a) + hyper.eps);
        }
        break;
    case OptimizerKind::Adagrad:
        state.second.resize(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double& a = state.second[i];
            a += grads[i] * grads[i];
            params[i] -= lr * grads[i] / (std::sqrt(a) + hyper.eps);
        }
        break;
    case OptimizerKind::Adam: {
        state.first.resize(n, 0.0);
        state.second.resize(n, 0.0);
        const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.steps));
        const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.steps));
        for (std::size_t i = 0; i < n; ++i) {
            double& m = state.first[i];
            double& v = state.second[i];
            m = hyper.beta1 * m + (1.0 - hyper.beta1) * grads[i];
            v = hyper.beta2 * v + (1.0 - hyper.beta2) * grads[i] * grads[i];
            params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + hyper.eps);
        }
        break;
    }
    }
}

double scheduler_lr(SchedulerKind kind, double base_lr, int epoch, int total_epochs,
                    const SchedulerParams& params) {
    if (total_epochs < 1 || epoch < 0 || epoch > total_epochs) {
        throw ContractError("scheduler epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(total_epochs) + "]");
    }
    switch (kind) {
    case SchedulerKind::None:
        return base_lr;
    case SchedulerKind::Step: {
        const int step = params.step_size > 0 ? params.step_size : std::max(1, total_epochs / 3);
        return base_lr * std::pow(params.step_gamma, epoch / step);
    }
    case SchedulerKind::Exponential:
        return base_lr * std::pow(params.exp_gamma, epoch);
    case SchedulerKind::CosineAnnealing:
        if (epoch == 0) {
            return base_lr;
        }
        if (epoch == total_epochs) {
            return params.eta_min;
        }
        return params.eta_min + (base_lr - params.eta_min) *
                                    (1.0 + std::cos(std::numbers::pi * epoch / total_epochs)) / 2.0;
    }
    throw ContractError("invalid scheduler kind");
}

} // namespace painscope
