#pragma once

#include <span>
#include <vector>

#include "mva/autograd.h"
#include "mva/tensor.h"

namespace mva {

namespace ops {

/// 3x3 cross-correlation, stride 1, zero padding 1:
/// [B,Cin,H,W] x [Cout,Cin,3,3] + [Cout] -> [B,Cout,H,W].
Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Per-pixel channel map: [B,Cin,H,W] x [Cout,Cin] + [Cout] -> [B,Cout,H,W].
Tensor channel_map(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Softmax over the class axis of [B,K,H,W].
Tensor softmax_classes(const Tensor& logits);

/// Mean over B*H*W pixels of -log softmax(logits)[label]. labels holds one
/// class id per pixel in [b][h][w] order. Throws std::out_of_range on a
/// label outside [0, K).
double softmax_ce_loss(const Tensor& logits, std::span<const int> labels);

}  // namespace ops

namespace ag {

Var conv3x3(const Var& x, const Var& weight, const Var& bias);
Var channel_map(const Var& x, const Var& weight, const Var& bias);
Var softmax_ce_loss(const Var& logits, std::vector<int> labels);

}  // namespace ag
}  // namespace mva
