#include "mva/attention.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mva/ops.h"
#include "mva/rng.h"

namespace mva {

const char* block_name(BlockKind kind) {
    switch (kind) {
        case BlockKind::none: return "none";
        case BlockKind::mv_adapter: return "mv_adapter";
        case BlockKind::color_attention: return "color_attention";
        case BlockKind::se: return "se";
        case BlockKind::eca: return "eca";
    }
    return "unknown";
}

BlockKind parse_block(std::string_view name) {
    for (auto kind : {BlockKind::none, BlockKind::mv_adapter, BlockKind::color_attention,
                      BlockKind::se, BlockKind::eca}) {
        if (name == block_name(kind)) return kind;
    }
    throw std::invalid_argument("unknown attention block '" + std::string(name) + "'");
}

void AttentionConfig::validate() const {
    if (channels < 1) throw std::invalid_argument("attention: channels must be >= 1");
    if (reduction < 1 || channels % reduction != 0) {
        throw std::invalid_argument("attention: reduction " + std::to_string(reduction) +
                                    " does not divide channels " + std::to_string(channels));
    }
    if (kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("attention: kernel width must be odd, got " +
                                    std::to_string(kernel));
    }
}

Tensor identity_kernel(std::size_t k) {
    if (k % 2 == 0) throw std::invalid_argument("identity_kernel: width must be odd");
    Tensor t({k});
    t.mutable_data()[k / 2] = 1.0;
    return t;
}

namespace {

Tensor glorot(Rng& rng, std::size_t rows, std::size_t cols) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.uniform(-s, s);
    return Tensor({rows, cols}, std::move(v));
}

ChannelMlp init_mlp(Rng& rng, std::size_t channels, std::size_t hidden) {
    ChannelMlp mlp;
    mlp.w1 = glorot(rng, hidden, channels);
    mlp.b1 = Tensor::zeros({hidden});
    mlp.w2 = glorot(rng, channels, hidden);
    mlp.b2 = Tensor::zeros({channels});
    return mlp;
}

ChannelMlp zero_mlp(std::size_t channels, std::size_t hidden) {
    return {Tensor::zeros({hidden, channels}), Tensor::zeros({hidden}),
            Tensor::zeros({channels, hidden}), Tensor::zeros({channels})};
}

struct MlpVars {
    Var w1, b1, w2, b2;
};

// pointwise_conv -> relu -> pointwise_conv; tracks the smallest |pre-relu|.
Var channel_mlp(const MlpVars& m, const Var& pooled, double& margin) {
    const Var pre = ag::pointwise_conv(pooled, m.w1, m.b1);
    for (double v : pre.value().data()) margin = std::min(margin, std::fabs(v));
    return ag::pointwise_conv(ag::relu(pre), m.w2, m.b2);
}

void check_input(const Var& x, std::size_t channels) {
    ops::require_rank(x.value(), 4, "attention input");
    if (x.shape()[1] != channels) {
        throw ShapeError("attention: input has " + std::to_string(x.shape()[1]) +
                         " channels, block expects " + std::to_string(channels));
    }
}

std::vector<Var> constants(const std::vector<Tensor>& tensors) {
    std::vector<Var> out;
    out.reserve(tensors.size());
    for (const auto& t : tensors) out.push_back(constant(t));
    return out;
}

AttentionOutput to_output(const GatedVar& g) { return {g.x_out.value(), g.gate.value()}; }

}  // namespace

MVAdapterParams init_params(const AttentionConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.init_seed);
    MVAdapterParams p;
    p.reduction = cfg.reduction;
    p.kernel = cfg.kernel;
    p.mlp = init_mlp(rng, cfg.channels, cfg.hidden());
    if (!cfg.share_mlp) p.max_mlp = init_mlp(rng, cfg.channels, cfg.hidden());
    p.k1d = identity_kernel(cfg.kernel);
    return p;
}

MVAdapterParams zero_params(const AttentionConfig& cfg) {
    cfg.validate();
    MVAdapterParams p;
    p.reduction = cfg.reduction;
    p.kernel = cfg.kernel;
    p.mlp = zero_mlp(cfg.channels, cfg.hidden());
    if (!cfg.share_mlp) p.max_mlp = zero_mlp(cfg.channels, cfg.hidden());
    p.k1d = Tensor::zeros({cfg.kernel});
    return p;
}

std::size_t param_count(BlockKind kind, const AttentionConfig& cfg) {
    cfg.validate();
    const std::size_t c = cfg.channels, h = cfg.hidden(), k = cfg.kernel;
    const std::size_t mlp = 2 * c * h + h + c;
    const std::size_t branches = cfg.share_mlp ? 1 : 2;
    switch (kind) {
        case BlockKind::none: return 0;
        case BlockKind::mv_adapter: return branches * mlp + k;
        case BlockKind::color_attention: return branches * mlp;
        case BlockKind::se: return mlp;
        case BlockKind::eca: return k;
    }
    return 0;
}

std::vector<std::string> param_names(BlockKind kind, bool separate_mlp) {
    const std::vector<std::string> mlp{"w1", "b1", "w2", "b2"};
    const std::vector<std::string> max_mlp{"max.w1", "max.b1", "max.w2", "max.b2"};
    std::vector<std::string> names;
    switch (kind) {
        case BlockKind::none: break;
        case BlockKind::mv_adapter:
        case BlockKind::color_attention:
            names = mlp;
            if (separate_mlp) names.insert(names.end(), max_mlp.begin(), max_mlp.end());
            if (kind == BlockKind::mv_adapter) names.push_back("k1d");
            break;
        case BlockKind::se: names = mlp; break;
        case BlockKind::eca: names = {"k1d"}; break;
    }
    return names;
}

std::vector<Tensor> block_tensors(BlockKind kind, const MVAdapterParams& p) {
    const auto push_mlp = [](std::vector<Tensor>& out, const ChannelMlp& m) {
        out.insert(out.end(), {m.w1, m.b1, m.w2, m.b2});
    };
    std::vector<Tensor> out;
    switch (kind) {
        case BlockKind::none: break;
        case BlockKind::mv_adapter:
        case BlockKind::color_attention:
            push_mlp(out, p.mlp);
            if (p.max_mlp) push_mlp(out, *p.max_mlp);
            if (kind == BlockKind::mv_adapter) out.push_back(p.k1d);
            break;
        case BlockKind::se: push_mlp(out, p.mlp); break;
        case BlockKind::eca: out.push_back(p.k1d); break;
    }
    return out;
}

MVAdapterParams params_from_named(BlockKind kind, const std::vector<NamedTensor>& named,
                                  const std::string& prefix, const AttentionConfig& cfg) {
    MVAdapterParams p = zero_params(cfg);
    p.k1d = identity_kernel(cfg.kernel);
    const auto find = [&](const std::string& name) -> const Tensor& {
        for (const auto& [n, t] : named) {
            if (n == prefix + name) return t;
        }
        throw std::invalid_argument("missing tensor '" + prefix + name + "'");
    };
    const auto assign = [&](Tensor& dst, const std::string& name) {
        const Tensor& src = find(name);
        if (!src.same_shape(dst)) {
            throw ShapeError("tensor '" + prefix + name + "' has shape " +
                             shape_string(src.shape()) + ", expected " + shape_string(dst.shape()));
        }
        dst = src;
    };
    for (const auto& name : param_names(kind, !cfg.share_mlp)) {
        if (name == "w1") assign(p.mlp.w1, name);
        else if (name == "b1") assign(p.mlp.b1, name);
        else if (name == "w2") assign(p.mlp.w2, name);
        else if (name == "b2") assign(p.mlp.b2, name);
        else if (name == "max.w1") assign(p.max_mlp->w1, name);
        else if (name == "max.b1") assign(p.max_mlp->b1, name);
        else if (name == "max.w2") assign(p.max_mlp->w2, name);
        else if (name == "max.b2") assign(p.max_mlp->b2, name);
        else if (name == "k1d") assign(p.k1d, name);
    }
    return p;
}

GatedVar gated_forward(BlockKind kind, std::span<const Var> params, const Var& x,
                       bool separate_mlp) {
    const auto expected = param_names(kind, separate_mlp).size();
    if (params.size() != expected) {
        throw std::invalid_argument(std::string("gated_forward: ") + block_name(kind) +
                                    " expects " + std::to_string(expected) + " tensors, got " +
                                    std::to_string(params.size()));
    }
    ops::require_rank(x.value(), 4, "attention input");
    const std::size_t batch = x.shape()[0], channels = x.shape()[1];

    GatedVar out;
    if (kind == BlockKind::none) {
        out.gate = constant(Tensor::ones({batch, channels, 1, 1}, x.value().dtype()));
        out.x_out = x;
        return out;
    }

    Var logits;
    if (kind == BlockKind::eca) {
        const Var v = ag::reshape_channel_vector(ag::global_avg_pool(x));
        logits = ag::restore_channel_map(ag::conv1d_channel(v, params[0]));
    } else {
        const MlpVars avg_mlp{params[0], params[1], params[2], params[3]};
        check_input(x, avg_mlp.w1.shape()[1]);
        const Var avg_out = channel_mlp(avg_mlp, ag::global_avg_pool(x), out.relu_margin);
        if (kind == BlockKind::se) {
            logits = avg_out;
        } else {
            const MlpVars max_mlp =
                separate_mlp ? MlpVars{params[4], params[5], params[6], params[7]} : avg_mlp;
            const Var max_out = channel_mlp(max_mlp, ag::global_max_pool(x), out.relu_margin);
            logits = ag::add(avg_out, max_out);
            if (kind == BlockKind::mv_adapter) {
                const Var& k1d = params[separate_mlp ? 8 : 4];
                logits = ag::restore_channel_map(
                    ag::conv1d_channel(ag::reshape_channel_vector(logits), k1d));
            }
        }
    }
    out.gate = ag::sigmoid(logits);
    out.x_out = ag::broadcast_mul_channels(out.gate, x);
    return out;
}

AttentionOutput attention_forward(BlockKind kind, const MVAdapterParams& params, const Tensor& x) {
    const auto vars = constants(block_tensors(kind, params));
    return to_output(gated_forward(kind, vars, constant(x), params.max_mlp.has_value()));
}

AttentionOutput mv_adapter_forward(const MVAdapterParams& params, const Tensor& x) {
    return attention_forward(BlockKind::mv_adapter, params, x);
}

AttentionOutput color_attention_forward(const MVAdapterParams& params, const Tensor& x) {
    return attention_forward(BlockKind::color_attention, params, x);
}

AttentionOutput se_forward(const ChannelMlp& mlp, const Tensor& x) {
    const auto vars = constants({mlp.w1, mlp.b1, mlp.w2, mlp.b2});
    return to_output(gated_forward(BlockKind::se, vars, constant(x)));
}

AttentionOutput eca_forward(const Tensor& k1d, const Tensor& x) {
    const auto vars = constants({k1d});
    return to_output(gated_forward(BlockKind::eca, vars, constant(x)));
}

}  // namespace mva
