#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mva/tensor.h"

// Pure forward kernels. None of these mutate their inputs, and none
// broadcast implicitly except broadcast_mul_channels.
namespace mva::ops {

/// Correctly rounded sum (Shewchuk partials). The result does not depend
/// on the order of `values`, which keeps average pooling exactly invariant
/// under spatial permutations.
double exact_sum(std::span<const double> values);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
double sigmoid(double x) noexcept;

/// Rank-0 sum of all elements in flat order.
Tensor sum(const Tensor& x);

/// [B,C,H,W] -> [B,C,1,1] spatial mean.
Tensor global_avg_pool(const Tensor& x);

/// [B,C,H,W] -> [B,C,1,1] spatial max. When `argmax` is non-null it receives,
/// per (b,c), the flat offset into x of the first maximal element.
Tensor global_max_pool(const Tensor& x, std::vector<std::size_t>* argmax = nullptr);

/// 1x1 convolution on a 1x1 map: [B,Cin,1,1] x [Cout,Cin] + [Cout] -> [B,Cout,1,1].
Tensor pointwise_conv(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Single-channel 1-D correlation along the last axis of [B,1,C] with an odd
/// kernel, zero padding (k-1)/2 per side, no bias.
Tensor conv1d_channel(const Tensor& v, const Tensor& kernel);

/// [B,C,1,1] -> [B,1,C].
Tensor reshape_channel_vector(const Tensor& x);
/// [B,1,C] -> [B,C,1,1].
Tensor restore_channel_map(const Tensor& v);

/// gate[B,C,1,1] * x[B,C,H,W], broadcast over H and W.
Tensor broadcast_mul_channels(const Tensor& gate, const Tensor& x);

// Shape checks shared with the autograd layer.
void require_rank(const Tensor& x, std::size_t rank, const char* op);
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace mva::ops
