#include "mva/layers.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mva/ops.h"

namespace mva {
namespace ops {

namespace {

void check_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t wrank,
                const char* op) {
    require_rank(x, 4, op);
    require_rank(weight, wrank, op);
    require_rank(bias, 1, op);
    bool ok = weight.dim(1) == x.dim(1) && bias.dim(0) == weight.dim(0);
    if (wrank == 4) ok = ok && weight.dim(2) == 3 && weight.dim(3) == 3;
    if (!ok) {
        throw ShapeError(std::string(op) + ": weight " + shape_string(weight.shape()) +
                         ", bias " + shape_string(bias.shape()) + " incompatible with input " +
                         shape_string(x.shape()));
    }
}

}  // namespace

Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    check_conv(x, weight, bias, 4, "conv3x3");
    const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cout = weight.dim(0), plane = h * w;
    std::vector<double> out(batch * cout * plane);
    const auto xd = x.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            double* dst = out.data() + (b * cout + o) * plane;
            std::fill(dst, dst + plane, bias[o]);
            for (std::size_t c = 0; c < cin; ++c) {
                const double* src = xd.data() + (b * cin + c) * plane;
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const double k = weight[((o * cin + c) * 3 + ky) * 3 + kx];
                        // Output rows/cols whose tap (y+ky-1, x+kx-1) is in bounds.
                        const std::size_t y0 = ky == 0 ? 1 : 0, y1 = ky == 2 ? h - 1 : h;
                        const std::size_t x0 = kx == 0 ? 1 : 0, x1 = kx == 2 ? w - 1 : w;
                        for (std::size_t y = y0; y < y1; ++y) {
                            const double* row = src + (y + ky - 1) * w;
                            double* orow = dst + y * w;
                            for (std::size_t xi = x0; xi < x1; ++xi) orow[xi] += k * row[xi + kx - 1];
                        }
                    }
                }
            }
        }
    }
    return Tensor({batch, cout, h, w}, std::move(out),
                  promote(x.dtype(), promote(weight.dtype(), bias.dtype())));
}

Tensor channel_map(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    check_conv(x, weight, bias, 2, "channel_map");
    const std::size_t batch = x.dim(0), cin = x.dim(1), plane = x.dim(2) * x.dim(3);
    const std::size_t cout = weight.dim(0);
    std::vector<double> out(batch * cout * plane);
    const auto xd = x.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            double* dst = out.data() + (b * cout + o) * plane;
            std::fill(dst, dst + plane, bias[o]);
            for (std::size_t c = 0; c < cin; ++c) {
                const double k = weight[o * cin + c];
                const double* src = xd.data() + (b * cin + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] += k * src[i];
            }
        }
    }
    return Tensor({batch, cout, x.dim(2), x.dim(3)}, std::move(out),
                  promote(x.dtype(), promote(weight.dtype(), bias.dtype())));
}

Tensor softmax_classes(const Tensor& logits) {
    require_rank(logits, 4, "softmax_classes");
    const std::size_t batch = logits.dim(0), k = logits.dim(1);
    const std::size_t plane = logits.dim(2) * logits.dim(3);
    std::vector<double> out(logits.numel());
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < plane; ++i) {
            const std::size_t base = b * k * plane + i;
            double mx = logits[base];
            for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits[base + c * plane]);
            double z = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                out[base + c * plane] = std::exp(logits[base + c * plane] - mx);
                z += out[base + c * plane];
            }
            for (std::size_t c = 0; c < k; ++c) out[base + c * plane] /= z;
        }
    }
    return Tensor(logits.shape(), std::move(out), logits.dtype());
}

double softmax_ce_loss(const Tensor& logits, std::span<const int> labels) {
    require_rank(logits, 4, "softmax_ce_loss");
    const std::size_t batch = logits.dim(0), k = logits.dim(1);
    const std::size_t plane = logits.dim(2) * logits.dim(3);
    if (labels.size() != batch * plane) {
        throw ShapeError("softmax_ce_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(batch * plane) + " pixels");
    }
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < plane; ++i) {
            const int label = labels[b * plane + i];
            if (label < 0 || static_cast<std::size_t>(label) >= k) {
                throw std::out_of_range("softmax_ce_loss: label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(k) + ")");
            }
            const std::size_t base = b * k * plane + i;
            double mx = logits[base];
            for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits[base + c * plane]);
            double z = 0.0;
            for (std::size_t c = 0; c < k; ++c) z += std::exp(logits[base + c * plane] - mx);
            total += std::log(z) - (logits[base + static_cast<std::size_t>(label) * plane] - mx);
        }
    }
    return total / static_cast<double>(batch * plane);
}

}  // namespace ops

namespace ag {

using Grads = std::vector<std::optional<Tensor>>;

Var conv3x3(const Var& x, const Var& weight, const Var& bias) {
    return make_op(
        "conv3x3", ops::conv3x3(x.value(), weight.value(), bias.value()), {x, weight, bias},
        [xv = x.value(), wv = weight.value(), bv = bias.value()](
            const Tensor& g, const std::vector<bool>& needs) -> Grads {
            const std::size_t batch = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
            const std::size_t cout = wv.dim(0), plane = h * w;
            std::vector<double> dx(needs[0] ? xv.numel() : 0, 0.0);
            std::vector<double> dw(needs[1] ? wv.numel() : 0, 0.0);
            const auto xd = xv.data();
            const auto gd = g.data();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t o = 0; o < cout; ++o) {
                    const double* go = gd.data() + (b * cout + o) * plane;
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double* src = xd.data() + (b * cin + c) * plane;
                        double* dsrc = needs[0] ? dx.data() + (b * cin + c) * plane : nullptr;
                        for (std::size_t ky = 0; ky < 3; ++ky) {
                            for (std::size_t kx = 0; kx < 3; ++kx) {
                                const std::size_t widx = ((o * cin + c) * 3 + ky) * 3 + kx;
                                const double k = wv[widx];
                                const std::size_t y0 = ky == 0 ? 1 : 0, y1 = ky == 2 ? h - 1 : h;
                                const std::size_t x0 = kx == 0 ? 1 : 0, x1 = kx == 2 ? w - 1 : w;
                                double acc = 0.0;
                                for (std::size_t y = y0; y < y1; ++y) {
                                    const std::size_t off = (y + ky - 1) * w + kx - 1;
                                    const double* grow = go + y * w;
                                    if (dsrc) {
                                        for (std::size_t xi = x0; xi < x1; ++xi) dsrc[off + xi] += k * grow[xi];
                                    }
                                    for (std::size_t xi = x0; xi < x1; ++xi) acc += grow[xi] * src[off + xi];
                                }
                                if (needs[1]) dw[widx] += acc;
                            }
                        }
                    }
                }
            }
            Grads out(3);
            if (needs[0]) out[0] = Tensor(xv.shape(), std::move(dx), xv.dtype());
            if (needs[1]) out[1] = Tensor(wv.shape(), std::move(dw), wv.dtype());
            if (needs[2]) {
                std::vector<double> db(cout, 0.0);
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t o = 0; o < cout; ++o)
                        for (std::size_t i = 0; i < plane; ++i) db[o] += gd[(b * cout + o) * plane + i];
                out[2] = Tensor(bv.shape(), std::move(db), bv.dtype());
            }
            return out;
        });
}

Var channel_map(const Var& x, const Var& weight, const Var& bias) {
    return make_op(
        "channel_map", ops::channel_map(x.value(), weight.value(), bias.value()), {x, weight, bias},
        [xv = x.value(), wv = weight.value(), bv = bias.value()](
            const Tensor& g, const std::vector<bool>& needs) -> Grads {
            const std::size_t batch = xv.dim(0), cin = xv.dim(1), plane = xv.dim(2) * xv.dim(3);
            const std::size_t cout = wv.dim(0);
            std::vector<double> dx(needs[0] ? xv.numel() : 0, 0.0);
            std::vector<double> dw(needs[1] ? wv.numel() : 0, 0.0);
            std::vector<double> db(needs[2] ? cout : 0, 0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t o = 0; o < cout; ++o) {
                    const double* go = g.data().data() + (b * cout + o) * plane;
                    if (needs[2]) {
                        for (std::size_t i = 0; i < plane; ++i) db[o] += go[i];
                    }
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double* src = xv.data().data() + (b * cin + c) * plane;
                        if (needs[0]) {
                            const double k = wv[o * cin + c];
                            double* d = dx.data() + (b * cin + c) * plane;
                            for (std::size_t i = 0; i < plane; ++i) d[i] += k * go[i];
                        }
                        if (needs[1]) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < plane; ++i) acc += go[i] * src[i];
                            dw[o * cin + c] += acc;
                        }
                    }
                }
            }
            Grads out(3);
            if (needs[0]) out[0] = Tensor(xv.shape(), std::move(dx), xv.dtype());
            if (needs[1]) out[1] = Tensor(wv.shape(), std::move(dw), wv.dtype());
            if (needs[2]) out[2] = Tensor(bv.shape(), std::move(db), bv.dtype());
            return out;
        });
}

Var softmax_ce_loss(const Var& logits, std::vector<int> labels) {
    const double loss = ops::softmax_ce_loss(logits.value(), labels);
    return make_op(
        "softmax_ce_loss", Tensor::scalar(loss, logits.value().dtype()), {logits},
        [lv = logits.value(), labels = std::move(labels)](const Tensor& g,
                                                          const std::vector<bool>&) -> Grads {
            // d/dz of mean CE = (softmax - onehot) / N
            Tensor probs = ops::softmax_classes(lv);
            const std::size_t batch = lv.dim(0), k = lv.dim(1), plane = lv.dim(2) * lv.dim(3);
            const double scale = g[0] / static_cast<double>(batch * plane);
            auto d = probs.mutable_data();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < plane; ++i) {
                    const auto label = static_cast<std::size_t>(labels[b * plane + i]);
                    d[b * k * plane + label * plane + i] -= 1.0;
                }
            }
            for (double& v : d) v *= scale;
            probs.round_to_dtype();
            return {std::move(probs)};
        });
}

}  // namespace ag
}  // namespace mva
