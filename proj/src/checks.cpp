#include "mva/checks.h"

#include <stdexcept>
#include <string>

#include "mva/layers.h"
#include "mva/rng.h"
#include "mva/segnet.h"

namespace mva {
namespace {

constexpr double kMinMargin = 1e-3;
constexpr int kMaxDraws = 100;

Tensor random_tensor(Rng& rng, const Shape& shape, double scale) {
    Tensor t(shape);
    for (double& v : t.mutable_data()) v = rng.uniform(-scale, scale);
    return t;
}

[[noreturn]] void no_clean_draw(const std::string& what) {
    throw std::runtime_error(what + ": no input clear of ReLU kinks after " +
                             std::to_string(kMaxDraws) + " draws");
}

}  // namespace

GradcheckReport block_gradcheck(BlockKind kind, std::uint64_t seed, double tol,
                                bool separate_mlp) {
    if (kind == BlockKind::none) throw std::invalid_argument("gradcheck: slot 'none' has no block");
    AttentionConfig cfg;
    cfg.channels = 8;
    cfg.reduction = kind == BlockKind::eca ? 1 : 4;
    cfg.share_mlp = !separate_mlp;
    const auto templates = block_tensors(kind, init_params(cfg));
    Rng rng(derive_seed(seed, 30));
    for (int draw = 0; draw < kMaxDraws; ++draw) {
        std::vector<Tensor> params{random_tensor(rng, {2, 8, 4, 4}, 1.0)};
        for (const auto& t : templates) params.push_back(random_tensor(rng, t.shape(), 0.8));
        const Tensor weights = random_tensor(rng, {2, 8, 4, 4}, 1.0);

        std::vector<Var> probe;
        for (const auto& p : params) probe.push_back(constant(p));
        const auto rest = std::span<const Var>(probe).subspan(1);
        if (gated_forward(kind, rest, probe[0], separate_mlp).relu_margin < kMinMargin) continue;

        const ScalarFn f = [&](std::span<const Var> p) {
            const GatedVar g = gated_forward(kind, p.subspan(1), p[0], separate_mlp);
            return ag::sum(ag::mul(g.x_out, constant(weights)));
        };
        return gradcheck(f, params, 1e-6, tol);
    }
    no_clean_draw(block_name(kind));
}

GradcheckReport segnet_gradcheck(BlockKind slot, std::uint64_t seed, double tol) {
    SegNetConfig cfg;
    cfg.channels = 4;
    cfg.classes = 3;
    cfg.slot = slot;
    cfg.seed = seed;
    const ToySegNet net(cfg);
    Rng rng(derive_seed(seed, 31));
    for (int draw = 0; draw < kMaxDraws; ++draw) {
        std::vector<Tensor> params{random_tensor(rng, {1, 3, 6, 6}, 1.0)};
        for (const auto& p : net.parameters()) {
            params.push_back(random_tensor(rng, p.var.value().shape(), 0.8));
        }
        std::vector<int> labels(36);
        for (int& l : labels) l = static_cast<int>(rng.below(3));

        std::vector<Var> probe;
        for (const auto& p : params) probe.push_back(constant(p));
        const auto rest = std::span<const Var>(probe).subspan(1);
        if (net.forward_with(rest, probe[0]).relu_margin < kMinMargin) continue;

        const ScalarFn f = [&](std::span<const Var> p) {
            return ag::softmax_ce_loss(net.forward_with(p.subspan(1), p[0]).logits, labels);
        };
        return gradcheck(f, params, 1e-6, tol);
    }
    no_clean_draw(std::string("segnet/") + block_name(slot));
}

GradcheckReport named_gradcheck(std::string_view name, std::uint64_t seed, double tol) {
    if (name == "segnet") {
        GradcheckReport worst;
        std::size_t checked = 0;
        for (BlockKind slot : {BlockKind::none, BlockKind::mv_adapter, BlockKind::color_attention,
                               BlockKind::se, BlockKind::eca}) {
            const GradcheckReport r = segnet_gradcheck(slot, seed, tol);
            checked += r.checked;
            if (r.max_rel_err >= worst.max_rel_err) worst = r;
        }
        worst.checked = checked;
        worst.pass = worst.max_rel_err <= tol;
        return worst;
    }
    const BlockKind kind = parse_block(name);
    if (kind == BlockKind::none) {
        throw std::invalid_argument("unknown block '" + std::string(name) + "'");
    }
    return block_gradcheck(kind, seed, tol);
}

}  // namespace mva
