#include "mva/ops.h"

#include <cmath>
#include <string>

namespace mva::ops {

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(x.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
}

double exact_sum(std::span<const double> values) {
    // Non-overlapping partials; see Shewchuk, "Adaptive Precision
    // Floating-Point Arithmetic", and Python's math.fsum.
    std::vector<double> partials;
    for (double x : values) {
        std::size_t kept = 0;
        for (double y : partials) {
            if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials[kept++] = lo;
            x = hi;
        }
        partials.resize(kept);
        partials.push_back(x);
    }
    if (partials.empty()) return 0.0;

    // Round the partials to a single double, correcting for
    // half-way cases the same way fsum does.
    std::size_t n = partials.size();
    double hi = partials[--n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials[--n];
        hi = x + y;
        const double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        const double yr = x - hi;
        if (y == yr) hi = x;
    }
    return hi;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return Tensor(a.shape(), std::move(out), promote(a.dtype(), b.dtype()));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return Tensor(a.shape(), std::move(out), promote(a.dtype(), b.dtype()));
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return Tensor(x.shape(), std::move(out), x.dtype());
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return Tensor(x.shape(), std::move(out), x.dtype());
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(x[i]);
    return Tensor(x.shape(), std::move(out), x.dtype());
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return Tensor::scalar(acc, x.dtype());
}

Tensor global_avg_pool(const Tensor& x) {
    require_rank(x, 4, "global_avg_pool");
    const std::size_t batch = x.dim(0), channels = x.dim(1);
    const std::size_t plane = x.dim(2) * x.dim(3);
    std::vector<double> out(batch * channels);
    const auto data = x.data();
    for (std::size_t bc = 0; bc < out.size(); ++bc) {
        out[bc] = exact_sum(data.subspan(bc * plane, plane)) / static_cast<double>(plane);
    }
    return Tensor({batch, channels, 1, 1}, std::move(out), x.dtype());
}

Tensor global_max_pool(const Tensor& x, std::vector<std::size_t>* argmax) {
    require_rank(x, 4, "global_max_pool");
    const std::size_t batch = x.dim(0), channels = x.dim(1);
    const std::size_t plane = x.dim(2) * x.dim(3);
    std::vector<double> out(batch * channels);
    if (argmax) argmax->assign(out.size(), 0);
    for (std::size_t bc = 0; bc < out.size(); ++bc) {
        const std::size_t base = bc * plane;
        std::size_t best = base;
        for (std::size_t i = base + 1; i < base + plane; ++i) {
            if (x[i] > x[best]) best = i;
        }
        out[bc] = x[best];
        if (argmax) (*argmax)[bc] = best;
    }
    return Tensor({batch, channels, 1, 1}, std::move(out), x.dtype());
}

Tensor pointwise_conv(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 4, "pointwise_conv");
    require_rank(weight, 2, "pointwise_conv weight");
    require_rank(bias, 1, "pointwise_conv bias");
    if (x.dim(2) != 1 || x.dim(3) != 1) {
        throw ShapeError("pointwise_conv: input spatial extents must be 1x1, got " +
                         shape_string(x.shape()));
    }
    const std::size_t batch = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
    if (weight.dim(1) != cin || bias.dim(0) != cout) {
        throw ShapeError("pointwise_conv: weight " + shape_string(weight.shape()) + ", bias " +
                         shape_string(bias.shape()) + " incompatible with input " +
                         shape_string(x.shape()));
    }
    std::vector<double> out(batch * cout);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            double acc = bias[o];
            for (std::size_t c = 0; c < cin; ++c) acc += weight[o * cin + c] * x[b * cin + c];
            out[b * cout + o] = acc;
        }
    }
    return Tensor({batch, cout, 1, 1}, std::move(out),
                  promote(x.dtype(), promote(weight.dtype(), bias.dtype())));
}

Tensor conv1d_channel(const Tensor& v, const Tensor& kernel) {
    require_rank(v, 3, "conv1d_channel");
    require_rank(kernel, 1, "conv1d_channel kernel");
    if (v.dim(1) != 1) {
        throw ShapeError("conv1d_channel: expected a single input channel, got " +
                         shape_string(v.shape()));
    }
    const std::size_t k = kernel.dim(0);
    if (k % 2 == 0) {
        throw ShapeError("conv1d_channel: kernel width must be odd, got " + std::to_string(k));
    }
    const std::size_t batch = v.dim(0), len = v.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    std::vector<double> out(batch * len);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < len; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const auto src = static_cast<std::ptrdiff_t>(c + j) - pad;
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                acc += kernel[j] * v[b * len + static_cast<std::size_t>(src)];
            }
            out[b * len + c] = acc;
        }
    }
    return Tensor({batch, 1, len}, std::move(out), promote(v.dtype(), kernel.dtype()));
}

Tensor reshape_channel_vector(const Tensor& x) {
    require_rank(x, 4, "reshape_channel_vector");
    if (x.dim(2) != 1 || x.dim(3) != 1) {
        throw ShapeError("reshape_channel_vector: expected [B,C,1,1], got " +
                         shape_string(x.shape()));
    }
    return x.reshaped({x.dim(0), 1, x.dim(1)});
}

Tensor restore_channel_map(const Tensor& v) {
    require_rank(v, 3, "restore_channel_map");
    if (v.dim(1) != 1) {
        throw ShapeError("restore_channel_map: expected [B,1,C], got " + shape_string(v.shape()));
    }
    return v.reshaped({v.dim(0), v.dim(2), 1, 1});
}

Tensor broadcast_mul_channels(const Tensor& gate, const Tensor& x) {
    require_rank(gate, 4, "broadcast_mul_channels gate");
    require_rank(x, 4, "broadcast_mul_channels input");
    if (gate.dim(0) != x.dim(0) || gate.dim(1) != x.dim(1) || gate.dim(2) != 1 ||
        gate.dim(3) != 1) {
        throw ShapeError("broadcast_mul_channels: gate " + shape_string(gate.shape()) +
                         " does not match input " + shape_string(x.shape()));
    }
    const std::size_t plane = x.dim(2) * x.dim(3);
    std::vector<double> out(x.numel());
    for (std::size_t bc = 0; bc < gate.numel(); ++bc) {
        const double g = gate[bc];
        for (std::size_t i = bc * plane; i < (bc + 1) * plane; ++i) out[i] = g * x[i];
    }
    return Tensor(x.shape(), std::move(out), promote(gate.dtype(), x.dtype()));
}

}  // namespace mva::ops
