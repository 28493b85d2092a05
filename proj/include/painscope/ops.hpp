#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "painscope/autodiff.hpp"
#include "painscope/types.hpp"

namespace painscope {

class Rng;

/// Log clamp used by the cross-entropy losses.
inline constexpr double kLogClamp = 1e-12;

/// input [C,H,W], kernels [F,C,kH,kW], bias [F] -> [F,H',W'] with
/// H' = (H + 2*padding - kH)/stride + 1.
Var conv2d(Tape& tape, Var input, Var kernels, Var bias, int stride, int padding);

/// [C,H,W] -> [C,H',W'] window maxima. Backward routes to the first
/// row-major maximum of each window.
Var maxpool2d(Tape& tape, Var input, int window, int stride);

Var relu(Tape& tape, Var input);

/// input [N], weights [M,N], bias [M] -> [M].
Var dense(Tape& tape, Var input, Var weights, Var bias);

/// Max-subtracted softmax over a rank-1 tensor of at least two logits.
Var softmax(Tape& tape, Var logits);

/// -sum_k target_k * ln(p_k + kLogClamp) for a two-entry probability tensor.
Var cross_entropy_soft(Tape& tape, Var probabilities, const LabelDistribution& target);

/// Concatenates [C_i,H,W] tensors along channels.
Var concat_channels(Tape& tape, std::span<const Var> inputs);

Var flatten(Tape& tape, Var input);

/// Inverted dropout: kept units are scaled by 1/(1-rate). Identity when
/// `training` is false or rate is 0.
Var dropout(Tape& tape, Var input, double rate, bool training, Rng* rng);

Var sum(Tape& tape, Var input);
Var add(Tape& tape, Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Tape& tape, Var a, Var b);
/// Scalar pick of element `index`.
Var select(Tape& tape, Var input, std::size_t index);

/// Plain-value helpers sharing the definitions above.
std::vector<double> softmax(std::span<const double> logits);
double cross_entropy_soft(const LabelDistribution& predicted, const LabelDistribution& target);

} // namespace painscope
