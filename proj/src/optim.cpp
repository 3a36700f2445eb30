#include "mva/optim.h"

#include <string>

namespace mva {

void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, SgdState& state) {
    if (grads.size() != params.size()) {
        throw ShapeError("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
    }
    if (state.velocity.empty()) {
        for (const auto& p : params) state.velocity.push_back(Tensor::zeros(p.shape(), p.dtype()));
    }
    if (state.velocity.size() != params.size()) {
        throw ShapeError("sgd_step: optimizer state tracks a different parameter count");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].same_shape(params[i]) || !state.velocity[i].same_shape(params[i])) {
            throw ShapeError("sgd_step: shape mismatch for parameter " + std::to_string(i) + " " +
                             shape_string(params[i].shape()));
        }
        auto v = state.velocity[i].mutable_data();
        auto p = params[i].mutable_data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = state.momentum * v[j] + grads[i][j];
            p[j] -= state.lr * v[j];
        }
        state.velocity[i].round_to_dtype();
        params[i].round_to_dtype();
    }
}

void sgd_step(std::span<const Var> params, SgdState& state) {
    std::vector<Tensor> values, grads;
    values.reserve(params.size());
    grads.reserve(params.size());
    for (const auto& p : params) {
        values.push_back(p.value());
        grads.push_back(p.grad());
    }
    sgd_step(values, grads, state);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Var p = params[i];
        p.assign(std::move(values[i]));
        p.zero_grad();
    }
}

}  // namespace mva
