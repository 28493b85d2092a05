#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "painscope/tensor.hpp"

namespace painscope {

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

class Tape;

/// Propagates the gradient of an op's output into the gradients of its inputs.
using BackwardFn = std::function<void(Tape&, Var output)>;

/// Ordered record of executed ops. Ops are appended as they run, so the
/// record is already in topological order and backward is a reverse sweep.
///
/// Values are either owned by the tape or borrowed (parameters); borrowed
/// tensors must outlive the tape. Gradients always live in the tape, so a
/// borrowed tensor is never written to.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Value that never receives a gradient.
    Var constant(Tensor value);
    /// Owned leaf whose gradient is tracked (e.g. an input image under attribution).
    Var variable(Tensor value);
    /// Borrowed leaf. `track` controls whether backward computes its gradient.
    Var parameter(const Tensor& value, bool track = true);

    /// Appends an op result. The output requires a gradient when any input does.
    Var record(Tensor output, std::initializer_list<Var> inputs, BackwardFn backward) {
        return record(std::move(output), std::span<const Var>(inputs.begin(), inputs.size()),
                      std::move(backward));
    }
    Var record(Tensor output, std::span<const Var> inputs, BackwardFn backward);

    const Tensor& value(Var v) const { return *nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of v after backward(); empty when v received none.
    std::span<const double> grad(Var v) const { return nodes_.at(v.id).grad; }

    /// Mutable gradient buffer, zero-initialized on first access. Used by op
    /// backward functions to accumulate into their inputs.
    std::span<double> grad_buffer(Var v);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t op_count() const noexcept { return ops_.size(); }

    /// Op index -> how many times backward visited it in the last sweep.
    const std::vector<int>& visit_counts() const noexcept { return visits_; }

    /// Clears gradients so backward can run again for a different loss.
    void zero_grad();

    friend void backward(Tape& tape, Var loss, double seed);

private:
    struct Node {
        const Tensor* value = nullptr;
        bool requires_grad = false;
        std::vector<double> grad;
    };
    struct Op {
        std::vector<std::size_t> inputs;
        std::size_t output = 0;
        BackwardFn backward;
    };

    Var add_node(const Tensor* value, bool requires_grad);

    std::deque<Tensor> owned_;
    std::vector<Node> nodes_;
    std::vector<Op> ops_;
    std::vector<int> visits_;
};

/// Reverse sweep from a scalar loss. Every tracked node reachable from `loss`
/// ends with d(seed * loss)/d(node); fan-out contributions add up.
/// Throws ContractError when `loss` is not a single value.
void backward(Tape& tape, Var loss, double seed = 1.0);

} // namespace painscope
