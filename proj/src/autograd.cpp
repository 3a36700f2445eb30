#include "mva/autograd.h"

#include <unordered_set>
#include <utility>

#include "mva/ops.h"

namespace mva {

Tensor Var::grad() const {
    if (node_->grad) return *node_->grad;
    return Tensor::zeros(node_->value.shape(), node_->value.dtype());
}

void Var::assign(Tensor value) {
    if (!is_leaf()) throw std::logic_error("assign() on a non-leaf node");
    if (!value.same_shape(node_->value)) {
        throw ShapeError("assign: shape " + shape_string(value.shape()) + " does not match " +
                         shape_string(node_->value.shape()));
    }
    node_->value = std::move(value);
}

Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->op = "parameter";
    return Var(std::move(node));
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "constant";
    return Var(std::move(node));
}

Var make_op(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = std::move(op);
    for (const auto& p : parents) node->requires_grad = node->requires_grad || p.requires_grad();
    if (node->requires_grad) {
        node->parents = std::move(parents);
        node->backward = std::move(backward);
    }
    return Var(std::move(node));
}

namespace {

void accumulate(Node& node, Tensor g) {
    if (!g.same_shape(node.value)) {
        throw ShapeError("backward of parent of '" + node.op + "' produced gradient shape " +
                         shape_string(g.shape()) + " for value " +
                         shape_string(node.value.shape()));
    }
    if (!node.grad) {
        node.grad = std::move(g);
    } else {
        node.grad = ops::add(*node.grad, g);
    }
}

}  // namespace

std::vector<Var> backward(const Var& loss) {
    if (loss.value().numel() != 1 || loss.value().rank() > 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " +
                         shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) return {};

    // Iterative post-order DFS; reversed, it is a topological order from the loss.
    std::vector<Var> order;
    std::unordered_set<const Node*> visited;
    std::vector<std::pair<Var, std::size_t>> stack{{loss, 0}};
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [var, next] = stack.back();
        const auto& parents = var.node()->parents;
        if (next < parents.size()) {
            const Var parent = parents[next++];
            if (parent.requires_grad() && visited.insert(parent.node()).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(var);
            stack.pop_back();
        }
    }

    accumulate(*loss.node(), Tensor::ones(loss.shape(), loss.value().dtype()));
    std::vector<Var> leaves;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node& node = *it->node();
        if (node.parents.empty()) {
            leaves.push_back(*it);
            continue;
        }
        if (!node.grad) continue;
        std::vector<bool> needs(node.parents.size());
        for (std::size_t i = 0; i < needs.size(); ++i) needs[i] = node.parents[i].requires_grad();
        auto grads = node.backward(*node.grad, needs);
        for (std::size_t i = 0; i < grads.size() && i < node.parents.size(); ++i) {
            if (needs[i] && grads[i]) accumulate(*node.parents[i].node(), std::move(*grads[i]));
        }
    }
    return leaves;
}

namespace ag {

using Grads = std::vector<std::optional<Tensor>>;

Var add(const Var& a, const Var& b) {
    return make_op("add", ops::add(a.value(), b.value()), {a, b},
                   [](const Tensor& g, const std::vector<bool>&) -> Grads { return {g, g}; });
}

Var mul(const Var& a, const Var& b) {
    return make_op("mul", ops::mul(a.value(), b.value()), {a, b},
                   [av = a.value(), bv = b.value()](const Tensor& g,
                                                    const std::vector<bool>& needs) -> Grads {
                       Grads out(2);
                       if (needs[0]) out[0] = ops::mul(g, bv);
                       if (needs[1]) out[1] = ops::mul(g, av);
                       return out;
                   });
}

Var relu(const Var& x) {
    return make_op("relu", ops::relu(x.value()), {x},
                   [xv = x.value()](const Tensor& g, const std::vector<bool>&) -> Grads {
                       std::vector<double> dx(g.numel());
                       for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = xv[i] > 0.0 ? g[i] : 0.0;
                       return {Tensor(xv.shape(), std::move(dx), xv.dtype())};
                   });
}

Var sigmoid(const Var& x) {
    Tensor y = ops::sigmoid(x.value());
    return make_op("sigmoid", y, {x}, [y](const Tensor& g, const std::vector<bool>&) -> Grads {
        std::vector<double> dx(g.numel());
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i] * y[i] * (1.0 - y[i]);
        return {Tensor(y.shape(), std::move(dx), y.dtype())};
    });
}

Var sum(const Var& x) {
    return make_op("sum", ops::sum(x.value()), {x},
                   [shape = x.shape(), dtype = x.value().dtype()](
                       const Tensor& g, const std::vector<bool>&) -> Grads {
                       return {Tensor::full(shape, g[0], dtype)};
                   });
}

Var global_avg_pool(const Var& x) {
    return make_op("global_avg_pool", ops::global_avg_pool(x.value()), {x},
                   [shape = x.shape(), dtype = x.value().dtype()](
                       const Tensor& g, const std::vector<bool>&) -> Grads {
                       const std::size_t plane = shape[2] * shape[3];
                       const double inv = 1.0 / static_cast<double>(plane);
                       std::vector<double> dx(shape_numel(shape));
                       for (std::size_t bc = 0; bc < g.numel(); ++bc) {
                           for (std::size_t i = 0; i < plane; ++i) dx[bc * plane + i] = g[bc] * inv;
                       }
                       return {Tensor(shape, std::move(dx), dtype)};
                   });
}

Var global_max_pool(const Var& x) {
    std::vector<std::size_t> argmax;
    Tensor y = ops::global_max_pool(x.value(), &argmax);
    return make_op("global_max_pool", std::move(y), {x},
                   [shape = x.shape(), dtype = x.value().dtype(), argmax = std::move(argmax)](
                       const Tensor& g, const std::vector<bool>&) -> Grads {
                       Tensor dx(shape, dtype);
                       auto d = dx.mutable_data();
                       for (std::size_t bc = 0; bc < argmax.size(); ++bc) d[argmax[bc]] = g[bc];
                       dx.round_to_dtype();
                       return {std::move(dx)};
                   });
}

Var pointwise_conv(const Var& x, const Var& weight, const Var& bias) {
    return make_op(
        "pointwise_conv", ops::pointwise_conv(x.value(), weight.value(), bias.value()),
        {x, weight, bias},
        [xv = x.value(), wv = weight.value(), bv = bias.value()](
            const Tensor& g, const std::vector<bool>& needs) -> Grads {
            const std::size_t batch = xv.dim(0), cin = xv.dim(1), cout = wv.dim(0);
            Grads out(3);
            if (needs[0]) {
                std::vector<double> dx(batch * cin, 0.0);
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t o = 0; o < cout; ++o)
                        for (std::size_t c = 0; c < cin; ++c)
                            dx[b * cin + c] += wv[o * cin + c] * g[b * cout + o];
                out[0] = Tensor(xv.shape(), std::move(dx), xv.dtype());
            }
            if (needs[1]) {
                std::vector<double> dw(cout * cin, 0.0);
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t o = 0; o < cout; ++o)
                        for (std::size_t c = 0; c < cin; ++c)
                            dw[o * cin + c] += g[b * cout + o] * xv[b * cin + c];
                out[1] = Tensor(wv.shape(), std::move(dw), wv.dtype());
            }
            if (needs[2]) {
                std::vector<double> db(cout, 0.0);
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t o = 0; o < cout; ++o) db[o] += g[b * cout + o];
                out[2] = Tensor(bv.shape(), std::move(db), bv.dtype());
            }
            return out;
        });
}

Var conv1d_channel(const Var& v, const Var& kernel) {
    return make_op(
        "conv1d_channel", ops::conv1d_channel(v.value(), kernel.value()), {v, kernel},
        [vv = v.value(), kv = kernel.value()](const Tensor& g,
                                              const std::vector<bool>& needs) -> Grads {
            const std::size_t batch = vv.dim(0), len = vv.dim(2), k = kv.dim(0);
            const auto pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
            std::vector<double> dv(needs[0] ? vv.numel() : 0, 0.0);
            std::vector<double> dk(needs[1] ? k : 0, 0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t c = 0; c < len; ++c) {
                    const double go = g[b * len + c];
                    for (std::size_t j = 0; j < k; ++j) {
                        const auto src = static_cast<std::ptrdiff_t>(c + j) - pad;
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                        const std::size_t s = b * len + static_cast<std::size_t>(src);
                        if (needs[0]) dv[s] += kv[j] * go;
                        if (needs[1]) dk[j] += vv[s] * go;
                    }
                }
            }
            Grads out(2);
            if (needs[0]) out[0] = Tensor(vv.shape(), std::move(dv), vv.dtype());
            if (needs[1]) out[1] = Tensor(kv.shape(), std::move(dk), kv.dtype());
            return out;
        });
}

Var reshape_channel_vector(const Var& x) {
    return make_op("reshape_channel_vector", ops::reshape_channel_vector(x.value()), {x},
                   [](const Tensor& g, const std::vector<bool>&) -> Grads {
                       return {ops::restore_channel_map(g)};
                   });
}

Var restore_channel_map(const Var& v) {
    return make_op("restore_channel_map", ops::restore_channel_map(v.value()), {v},
                   [](const Tensor& g, const std::vector<bool>&) -> Grads {
                       return {ops::reshape_channel_vector(g)};
                   });
}

Var broadcast_mul_channels(const Var& gate, const Var& x) {
    return make_op(
        "broadcast_mul_channels", ops::broadcast_mul_channels(gate.value(), x.value()), {gate, x},
        [gv = gate.value(), xv = x.value()](const Tensor& g,
                                            const std::vector<bool>& needs) -> Grads {
            const std::size_t plane = xv.dim(2) * xv.dim(3);
            Grads out(2);
            if (needs[0]) {
                std::vector<double> dg(gv.numel(), 0.0);
                for (std::size_t bc = 0; bc < gv.numel(); ++bc) {
                    double acc = 0.0;
                    for (std::size_t i = bc * plane; i < (bc + 1) * plane; ++i) acc += g[i] * xv[i];
                    dg[bc] = acc;
                }
                out[0] = Tensor(gv.shape(), std::move(dg), gv.dtype());
            }
            if (needs[1]) out[1] = ops::broadcast_mul_channels(gv, g).to(xv.dtype());
            return out;
        });
}

}  // namespace ag
}  // namespace mva
