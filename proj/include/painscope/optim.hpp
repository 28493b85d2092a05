#pragma once

#include <span>
#include <string>
#include <vector>

namespace painscope {

enum class OptimizerKind { Sgd, Adam, Adagrad, RmsProp };
enum class SchedulerKind { None, Step, Exponential, CosineAnnealing };

std::string to_string(OptimizerKind kind);
std::string to_string(SchedulerKind kind);
/// Throw ConfigError on unknown names.
OptimizerKind parse_optimizer(const std::string& name);
SchedulerKind parse_scheduler(const std::string& name);

struct OptimizerHyper {
    double rho = 0.9;          ///< RMSProp decay
    double beta1 = 0.9;        ///< Adam
    double beta2 = 0.999;      ///< Adam
    double eps = 1e-8;         ///< RMSProp / Adam / Adagrad denominator
};

/// Per-parameter optimizer memory. Vectors are sized lazily on first step.
struct OptimizerState {
    std::vector<double> first;   ///< Adam m
    std::vector<double> second;  ///< Adam v, RMSProp and Adagrad accumulators
    long steps = 0;
};

/// One in-place update of `params` from `grads`:
///   sgd      p -= lr g
///   rmsprop  a = rho a + (1-rho) g^2;   p -= lr g / (sqrt(a) + eps)
///   adagrad  a += g^2;                  p -= lr g / (sqrt(a) + eps)
///   adam     bias-corrected moments;    p -= lr m^ / (sqrt(v^) + eps)
/// Throws DimensionError on length mismatch.
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, OptimizerKind kind, double lr,
                    const OptimizerHyper& hyper = {});

struct SchedulerParams {
    int step_size = 0;       ///< 0 selects total_epochs / 3
    double step_gamma = 0.1;
    double exp_gamma = 0.97;
    double eta_min = 0.0;
};

/// Learning rate for a 0-based epoch:
///   step         base * gamma^floor(epoch / step_size)
///   exponential  base * gamma^epoch
///   cosine       eta_min + (base - eta_min) (1 + cos(pi epoch / total)) / 2
/// Throws ContractError when epoch is outside [0, total_epochs].
double scheduler_lr(SchedulerKind kind, double base_lr, int epoch, int total_epochs,
                    const SchedulerParams& params = {});

} // namespace painscope
