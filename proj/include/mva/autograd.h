#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mva/tensor.h"

namespace mva {

class Var;

/// Backward rule of one recorded op. Receives the gradient of the op's
/// output and a flag per parent telling whether that parent needs a
/// gradient; returns one entry per parent (nullopt where not needed).
using BackwardFn =
    std::function<std::vector<std::optional<Tensor>>(const Tensor& grad_out,
                                                     const std::vector<bool>& needs_grad)>;

/// Graph node: a value plus the record of the op that produced it.
struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    std::vector<Var> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::string op;
};

/// Shared handle to a graph node. Copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool is_leaf() const { return node_->parents.empty(); }
    const std::string& op() const { return node_->op; }

    bool has_grad() const { return node_->grad.has_value(); }
    /// Gradient accumulated by backward(); zeros of value's shape if none.
    Tensor grad() const;
    void zero_grad() { node_->grad.reset(); }

    /// Replaces a leaf's value in place (optimizer updates).
    void assign(Tensor value);

    Node* node() const { return node_.get(); }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node> node_;
};

/// Trainable leaf.
Var parameter(Tensor value);
/// Leaf that never receives a gradient.
Var constant(Tensor value);

/// Records a custom op. The result requires a gradient iff any parent does;
/// otherwise the parents and backward rule are dropped.
Var make_op(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward);

/// Reverse-mode sweep from a scalar loss (rank 0 or shape [1]). Gradients
/// accumulate additively into every reachable node that requires one.
/// Returns the leaves that received a gradient, in discovery order.
std::vector<Var> backward(const Var& loss);

namespace ag {

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var sum(const Var& x);
Var global_avg_pool(const Var& x);
Var global_max_pool(const Var& x);
Var pointwise_conv(const Var& x, const Var& weight, const Var& bias);
Var conv1d_channel(const Var& v, const Var& kernel);
Var reshape_channel_vector(const Var& x);
Var restore_channel_map(const Var& v);
Var broadcast_mul_channels(const Var& gate, const Var& x);

}  // namespace ag
}  // namespace mva
