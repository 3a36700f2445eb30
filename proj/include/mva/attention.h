#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mva/autograd.h"
#include "mva/tensor.h"
#include "mva/tensor_io.h"

namespace mva {

/// Channel-attention variants that can occupy an attention slot.
///
///   mv_adapter       sigma(conv1d(mlp(avg(x)) + mlp(max(x)))) * x
///   color_attention  sigma(mlp(avg(x)) + mlp(max(x))) * x
///   se               sigma(mlp(avg(x))) * x
///   eca              sigma(conv1d(avg(x))) * x
///   none             x (gate of ones)
///
/// mlp is pointwise_conv -> relu -> pointwise_conv with a C -> C/r -> C
/// bottleneck; conv1d runs along the channel axis.
enum class BlockKind { none, mv_adapter, color_attention, se, eca };

const char* block_name(BlockKind kind);
/// Throws std::invalid_argument on an unknown name.
BlockKind parse_block(std::string_view name);

struct AttentionConfig {
    std::size_t channels = 0;
    std::size_t reduction = 4;
    std::size_t kernel = 3;
    bool share_mlp = true;
    std::uint64_t init_seed = 0;

    /// Throws std::invalid_argument when r does not divide C, C < 1 or k is even.
    void validate() const;
    std::size_t hidden() const { return channels / reduction; }
};

struct ChannelMlp {
    Tensor w1;  // [C/r, C]
    Tensor b1;  // [C/r]
    Tensor w2;  // [C, C/r]
    Tensor b2;  // [C]
};

/// Learnable state of one block. `mlp` serves both pooling branches unless
/// `max_mlp` holds a separate set for the max branch.
struct MVAdapterParams {
    ChannelMlp mlp;
    std::optional<ChannelMlp> max_mlp;
    Tensor k1d;  // [k]
    std::size_t reduction = 4;
    std::size_t kernel = 3;

    std::size_t channels() const { return mlp.w1.dim(1); }
};

/// Glorot-uniform MLP weights, zero biases, identity 1-D kernel.
/// Deterministic in cfg.init_seed.
MVAdapterParams init_params(const AttentionConfig& cfg);
/// Every parameter zero, including the 1-D kernel.
MVAdapterParams zero_params(const AttentionConfig& cfg);
/// [0,..,0,1,0,..,0] of odd width k.
Tensor identity_kernel(std::size_t k);

struct AttentionOutput {
    Tensor x_out;  // [B,C,H,W]
    Tensor gate;   // [B,C,1,1]
};

AttentionOutput mv_adapter_forward(const MVAdapterParams& params, const Tensor& x);
/// Same chain without the 1-D convolution; params.k1d is ignored.
AttentionOutput color_attention_forward(const MVAdapterParams& params, const Tensor& x);
AttentionOutput se_forward(const ChannelMlp& mlp, const Tensor& x);
AttentionOutput eca_forward(const Tensor& k1d, const Tensor& x);
AttentionOutput attention_forward(BlockKind kind, const MVAdapterParams& params, const Tensor& x);

/// Learnable scalar count of a block under cfg.
std::size_t param_count(BlockKind kind, const AttentionConfig& cfg);

// -- differentiable form ------------------------------------------------------

/// Names of the tensors a block learns, in the order block_tensors() and
/// gated_forward() use.
std::vector<std::string> param_names(BlockKind kind, bool separate_mlp);
std::vector<Tensor> block_tensors(BlockKind kind, const MVAdapterParams& params);
/// Rebuilds params from checkpoint entries "<prefix>w1", ... for `kind`.
/// Tensors the kind does not learn are zero-filled (k1d: identity).
MVAdapterParams params_from_named(BlockKind kind, const std::vector<NamedTensor>& named,
                                  const std::string& prefix, const AttentionConfig& cfg);

struct GatedVar {
    Var x_out;
    Var gate;
    /// Smallest |pre-activation| feeding a ReLU in this forward (+inf when
    /// the block has none). Finite-difference checks reject inputs where
    /// this is small.
    double relu_margin = std::numeric_limits<double>::infinity();
};

/// Forward pass on graph values. `params` follows param_names(kind, separate_mlp).
GatedVar gated_forward(BlockKind kind, std::span<const Var> params, const Var& x,
                       bool separate_mlp = false);

}  // namespace mva
