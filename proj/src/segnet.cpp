#include "mva/segnet.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mva/layers.h"
#include "mva/rng.h"

namespace mva {

AttentionConfig SegNetConfig::attention() const {
    AttentionConfig a;
    a.channels = channels;
    a.reduction = reduction;
    a.kernel = kernel;
    a.share_mlp = share_mlp;
    a.init_seed = derive_seed(seed, 11);
    return a;
}

void SegNetConfig::validate() const {
    if (in_channels < 1 || channels < 1) throw std::invalid_argument("segnet: channels must be >= 1");
    if (classes < 2) throw std::invalid_argument("segnet: need at least 2 classes");
    if (slot == BlockKind::none) return;
    AttentionConfig a = attention();
    if (slot == BlockKind::eca) a.reduction = 1;  // ECA has no bottleneck
    a.validate();
}

namespace {

Tensor he_uniform(Rng& rng, Shape shape, std::size_t fan_in) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (double& v : t.mutable_data()) v = rng.uniform(-s, s);
    return t;
}

double min_abs(const Tensor& t) {
    double m = INFINITY;
    for (double v : t.data()) m = std::min(m, std::fabs(v));
    return m;
}

}  // namespace

ToySegNet::ToySegNet(const SegNetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t c = cfg_.channels;
    Rng rng(derive_seed(cfg_.seed, 10));
    params_.push_back({"stem.weight", parameter(he_uniform(rng, {c, cfg_.in_channels}, cfg_.in_channels))});
    params_.push_back({"stem.bias", parameter(Tensor::zeros({c}))});
    params_.push_back({"conv.weight", parameter(he_uniform(rng, {c, c, 3, 3}, 9 * c))});
    params_.push_back({"conv.bias", parameter(Tensor::zeros({c}))});
    params_.push_back({"head.weight", parameter(he_uniform(rng, {cfg_.classes, c}, c))});
    params_.push_back({"head.bias", parameter(Tensor::zeros({cfg_.classes}))});

    if (cfg_.slot != BlockKind::none) {
        AttentionConfig acfg = cfg_.attention();
        if (cfg_.slot == BlockKind::eca) acfg.reduction = 1;
        const MVAdapterParams p = init_params(acfg);
        const auto names = param_names(cfg_.slot, !cfg_.share_mlp);
        const auto tensors = block_tensors(cfg_.slot, p);
        for (std::size_t i = 0; i < names.size(); ++i) {
            params_.push_back({"attention." + names[i], parameter(tensors[i])});
        }
    }
}

std::size_t ToySegNet::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var.value().numel();
    return n;
}

SegNetOutput ToySegNet::forward(const Var& images) const {
    std::vector<Var> vars;
    vars.reserve(params_.size());
    for (const auto& p : params_) vars.push_back(p.var);
    return forward_with(vars, images);
}

SegNetOutput ToySegNet::forward_with(std::span<const Var> p, const Var& images) const {
    if (p.size() != params_.size()) {
        throw std::invalid_argument("forward_with: expected " + std::to_string(params_.size()) +
                                    " parameters, got " + std::to_string(p.size()));
    }
    SegNetOutput out;
    const Var stem = ag::channel_map(images, p[0], p[1]);
    const Var conv = ag::conv3x3(ag::relu(stem), p[2], p[3]);
    const Var features = ag::relu(conv);
    const GatedVar att = gated_forward(cfg_.slot, p.subspan(6), features, !cfg_.share_mlp);
    out.logits = ag::channel_map(att.x_out, p[4], p[5]);
    out.relu_margin = std::min({min_abs(stem.value()), min_abs(conv.value()), att.relu_margin});
    return out;
}

std::vector<NamedTensor> ToySegNet::state() const {
    std::vector<NamedTensor> out;
    for (const auto& p : params_) out.emplace_back(p.name, p.var.value());
    return out;
}

void ToySegNet::load_state(const std::vector<NamedTensor>& state) {
    for (auto& p : params_) {
        const auto it = std::find_if(state.begin(), state.end(),
                                     [&](const NamedTensor& t) { return t.first == p.name; });
        if (it == state.end()) throw std::invalid_argument("checkpoint lacks '" + p.name + "'");
        p.var.assign(it->second);
    }
}

}  // namespace mva
