#include "painscope/autodiff.hpp"

#include <algorithm>

#include "painscope/errors.hpp"

namespace painscope {

Var Tape::add_node(const Tensor* value, bool requires_grad) {
    nodes_.push_back(Node{value, requires_grad, {}});
    return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    owned_.push_back(std::move(value));
    return add_node(&owned_.back(), false);
}

Var Tape::variable(Tensor value) {
    owned_.push_back(std::move(value));
    return add_node(&owned_.back(), true);
}

Var Tape::parameter(const Tensor& value, bool track) {
    return add_node(&value, track);
}

Var Tape::record(Tensor output, std::span<const Var> inputs, BackwardFn backward) {
    bool tracked = false;
    Op op;
    op.inputs.reserve(inputs.size());
    for (Var in : inputs) {
        tracked = tracked || nodes_.at(in.id).requires_grad;
        op.inputs.push_back(in.id);
    }
    owned_.push_back(std::move(output));
    const Var out = add_node(&owned_.back(), tracked);
    if (tracked) {
        op.output = out.id;
        op.backward = std::move(backward);
        ops_.push_back(std::move(op));
    }
    return out;
}

std::span<double> Tape::grad_buffer(Var v) {
    Node& node = nodes_.at(v.id);
    if (node.grad.empty()) {
        node.grad.assign(node.value->size(), 0.0);
    }
    return node.grad;
}

void Tape::zero_grad() {
    for (auto& node : nodes_) {
        node.grad.clear();
    }
}

void backward(Tape& tape, Var loss, double seed) {
    if (tape.value(loss).size() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_string(tape.value(loss).shape()));
    }
    tape.visits_.assign(tape.ops_.size(), 0);
    if (!tape.requires_grad(loss)) {
        return;
    }
    tape.grad_buffer(loss)[0] += seed;
    for (std::size_t i = tape.ops_.size(); i-- > 0;) {
        auto& op = tape.ops_[i];
        if (op.output > loss.id || tape.nodes_[op.output].grad.empty()) {
            continue;
        }
        op.backward(tape, Var{op.output});
        ++tape.visits_[i];
    }
}

} // namespace painscope
