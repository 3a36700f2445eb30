#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mva/autograd.h"

namespace mva {

struct GradcheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_param = 0;  // index into params
    std::size_t worst_index = 0;  // flat index within that param
    std::size_t checked = 0;      // coordinates compared
    bool pass = true;
};

/// Scalar function of a parameter list, built from autograd ops.
using ScalarFn = std::function<Var(std::span<const Var>)>;

/// Compares reverse-mode gradients of `f` against central differences with
/// step `h`. Per-coordinate error is |g_analytic - g_fd| / max(1, |g_fd|);
/// the check passes iff the maximum is <= tol.
GradcheckReport gradcheck(const ScalarFn& f, const std::vector<Tensor>& params, double h = 1e-6,
                          double tol = 1e-4);

}  // namespace mva
