#pragma once

#include <span>
#include <vector>

#include "mva/autograd.h"
#include "mva/tensor.h"

namespace mva {

/// SGD with heavy-ball momentum:  v <- momentum * v + g;  p <- p - lr * v.
struct SgdState {
    double lr = 0.05;
    double momentum = 0.9;
    std::vector<Tensor> velocity;  // lazily sized to mirror the parameters
};

/// Updates `params` in place. Throws ShapeError when grads or velocity do not
/// mirror the parameter shapes.
void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, SgdState& state);

/// Applies sgd_step to leaf parameters using their accumulated gradients,
/// then clears those gradients.
void sgd_step(std::span<const Var> params, SgdState& state);

}  // namespace mva
