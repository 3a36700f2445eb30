#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mva/attention.h"
#include "mva/autograd.h"
#include "mva/tensor_io.h"

namespace mva {

struct SegNetConfig {
    std::size_t in_channels = 3;
    std::size_t channels = 8;
    std::size_t classes = 4;  // categories + background
    BlockKind slot = BlockKind::none;
    std::size_t reduction = 4;
    std::size_t kernel = 3;
    bool share_mlp = true;
    std::uint64_t seed = 0;

    AttentionConfig attention() const;
    void validate() const;
};

struct NamedParam {
    std::string name;
    Var var;
};

struct SegNetOutput {
    Var logits;  // [B,classes,H,W]
    double relu_margin = 0.0;
};

/// stem (1x1, in->C) -> relu -> conv3x3 (C->C) -> relu -> attention slot
/// -> head (1x1, C->classes).
///
/// Backbone weights depend only on the seed, never on the slot, so two nets
/// that differ only in slot start from the same backbone.
class ToySegNet {
public:
    explicit ToySegNet(const SegNetConfig& cfg);

    const SegNetConfig& config() const noexcept { return cfg_; }
    const std::vector<NamedParam>& parameters() const noexcept { return params_; }
    std::size_t param_count() const;

    SegNetOutput forward(const Var& images) const;
    /// Same network evaluated with substitute parameter values, one per
    /// entry of parameters(), in order.
    SegNetOutput forward_with(std::span<const Var> params, const Var& images) const;

    std::vector<NamedTensor> state() const;
    /// Throws std::invalid_argument on missing names, ShapeError on shape mismatch.
    void load_state(const std::vector<NamedTensor>& state);

private:
    SegNetConfig cfg_;
    std::vector<NamedParam> params_;
};

}  // namespace mva
