#pragma once

#include <cstdint>
#include <string_view>

#include "mva/attention.h"
#include "mva/gradcheck.h"

namespace mva {

/// Gradient check of one attention block on a random [2,8,4,4] input with
/// random parameters (r=4, k=3). Inputs whose ReLU pre-activations come
/// within 1e-3 of the kink are redrawn.
GradcheckReport block_gradcheck(BlockKind kind, std::uint64_t seed, double tol = 1e-4,
                                bool separate_mlp = false);

/// Gradient check of ToySegNet (B=1, C=4, H=W=6, 3 classes) with the given
/// slot, through the softmax cross-entropy loss on random labels.
GradcheckReport segnet_gradcheck(BlockKind slot, std::uint64_t seed, double tol = 1e-4);

/// "mv_adapter", "color_attention", "se", "eca" or "segnet" (which checks
/// every slot and reports the worst). Throws std::invalid_argument otherwise.
GradcheckReport named_gradcheck(std::string_view name, std::uint64_t seed, double tol = 1e-4);

}  // namespace mva
