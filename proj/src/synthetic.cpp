#include "mva/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mva/rng.h"

namespace mva {

void DegradationParams::validate() const {
    for (double c : attenuation) {
        if (!(c >= 0.0) || !std::isfinite(c)) {
            throw std::invalid_argument("attenuation coefficients must be finite and >= 0");
        }
    }
    if (!(depth >= 0.0) || !std::isfinite(depth)) throw std::invalid_argument("depth must be >= 0");
    if (!(scatter_sigma >= 0.0) || !std::isfinite(scatter_sigma)) {
        throw std::invalid_argument("scatter sigma must be >= 0");
    }
    if (!(haze >= 0.0 && haze < 1.0)) throw std::invalid_argument("haze must be in [0, 1)");
}

DegradationParams DegradationParams::clear_water() {
    DegradationParams p;
    p.depth = 0.0;
    p.scatter_sigma = 0.0;
    p.haze = 0.0;
    return p;
}

namespace {

// Surface colors before any water column, (R, G, B).
constexpr std::array<std::array<double, 3>, kMaxCategories> kPalette{{
    {0.90, 0.30, 0.25},
    {0.85, 0.75, 0.20},
    {0.95, 0.55, 0.70},
    {0.30, 0.75, 0.35},
    {0.25, 0.40, 0.90},
    {0.95, 0.95, 0.95},
    {0.55, 0.30, 0.75},
    {0.15, 0.15, 0.15},
}};

constexpr std::array<double, 3> kSeabed{0.60, 0.55, 0.45};
constexpr int kPlacementAttempts = 64;
// Per-scene illuminant gain per channel is drawn from 1 +- this.
constexpr double kIlluminantJitter = 0.4;

struct Shape2D {
    bool ellipse = true;
    double cx = 0, cy = 0;  // center, pixel units
    double rx = 0, ry = 0;  // semi-extents

    bool covers(std::size_t row, std::size_t col) const {
        const double dx = (static_cast<double>(col) + 0.5 - cx) / rx;
        const double dy = (static_cast<double>(row) + 0.5 - cy) / ry;
        return ellipse ? dx * dx + dy * dy <= 1.0 : std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0;
    }
};

Shape2D random_shape(Rng& rng, std::size_t height, std::size_t width) {
    const double side = static_cast<double>(std::min(height, width));
    const double lo = std::max(2.0, side / 10.0);
    const double hi = std::max(lo + 1.0, side / 4.0);
    Shape2D s;
    s.ellipse = rng.uniform() < 0.5;
    s.rx = rng.uniform(lo, hi);
    s.ry = rng.uniform(lo, hi);
    // Pixel-center anchored so the center pixel is always covered.
    const auto place = [&](double radius, std::size_t extent) {
        const auto r = static_cast<std::size_t>(std::ceil(radius));
        const std::size_t span = extent - 2 * r;  // extent >= 16 > 2 * ceil(side / 4)
        return static_cast<double>(r + rng.below(span)) + 0.5;
    };
    s.cx = place(s.rx, width);
    s.cy = place(s.ry, height);
    return s;
}

}  // namespace

SceneSample generate_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                           std::size_t n_objects, std::size_t categories) {
    if (height < 16 || width < 16) {
        throw std::invalid_argument("scene extents must be >= 16, got " + std::to_string(height) +
                                    "x" + std::to_string(width));
    }
    if (n_objects < 1) throw std::invalid_argument("n_objects must be >= 1");
    if (categories < 1 || categories > kMaxCategories) {
        throw std::invalid_argument("categories must be in [1, " +
                                    std::to_string(kMaxCategories) + "]");
    }
    Rng rng(derive_seed(seed, 0));
    const std::size_t plane = height * width;
    std::vector<double> pixels(3 * plane);

    // Seabed: two low-frequency ripples plus fine grain.
    std::array<double, 4> ripple{};
    for (double& r : ripple) r = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double fx = rng.uniform(0.15, 0.45), fy = rng.uniform(0.15, 0.45);
    std::array<double, 3> illuminant{};
    for (double& g : illuminant) g = 1.0 + rng.uniform(-kIlluminantJitter, kIlluminantJitter);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double xd = static_cast<double>(x), yd = static_cast<double>(y);
            const double texture = 0.06 * std::sin(fx * xd + ripple[0]) * std::cos(fy * yd + ripple[1]) +
                                   0.04 * std::sin(0.5 * (fx * yd + fy * xd) + ripple[2]);
            for (std::size_t c = 0; c < 3; ++c) {
                const double grain = rng.uniform(-0.03, 0.03);
                pixels[c * plane + y * width + x] = kSeabed[c] + texture + grain;
            }
        }
    }

    std::vector<Instance> instances;
    std::vector<int> owner(plane, -1);
    for (std::size_t obj = 0; obj < n_objects; ++obj) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            const Shape2D shape = random_shape(rng, height, width);
            std::vector<std::size_t> cover;
            std::vector<std::size_t> stolen(instances.size(), 0);
            std::size_t overlap = 0;
            for (std::size_t y = 0; y < height; ++y) {
                for (std::size_t x = 0; x < width; ++x) {
                    if (!shape.covers(y, x)) continue;
                    const std::size_t i = y * width + x;
                    cover.push_back(i);
                    if (owner[i] >= 0) {
                        ++overlap;
                        ++stolen[static_cast<std::size_t>(owner[i])];
                    }
                }
            }
            // At most a quarter of the new object may overlap, and no earlier
            // object may lose more than a quarter of its visible pixels.
            bool ok = !cover.empty() && 4 * overlap <= cover.size();
            for (std::size_t k = 0; ok && k < instances.size(); ++k) {
                ok = 4 * stolen[k] <= instances[k].mask.popcount();
            }
            if (!ok) continue;

            Instance inst;
            inst.category = static_cast<int>(1 + rng.below(categories));
            inst.mask = BinaryMask(height, width);
            const auto& base = kPalette[static_cast<std::size_t>(inst.category - 1)];
            std::array<double, 3> color{};
            for (std::size_t c = 0; c < 3; ++c) color[c] = base[c] + rng.uniform(-0.05, 0.05);
            const double shade_x = rng.uniform(-0.04, 0.04), shade_y = rng.uniform(-0.04, 0.04);
            for (std::size_t i : cover) {
                if (owner[i] >= 0) {
                    instances[static_cast<std::size_t>(owner[i])].mask.set(i / width, i % width,
                                                                           false);
                }
                owner[i] = static_cast<int>(instances.size());
                inst.mask.set(i / width, i % width);
                const double dx = (static_cast<double>(i % width) + 0.5 - shape.cx) / shape.rx;
                const double dy = (static_cast<double>(i / width) + 0.5 - shape.cy) / shape.ry;
                for (std::size_t c = 0; c < 3; ++c) {
                    pixels[c * plane + i] = color[c] + shade_x * dx + shade_y * dy;
                }
            }
            instances.push_back(std::move(inst));
            placed = true;
        }
        if (!placed) {
            throw std::runtime_error("could not place object " + std::to_string(obj + 1) + " of " +
                                     std::to_string(n_objects) + " after " +
                                     std::to_string(kPlacementAttempts) + " attempts");
        }
    }

    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = std::clamp(illuminant[i / plane] * pixels[i], 0.0, 1.0);
    }
    SceneSample sample;
    sample.image = Tensor({3, height, width}, std::move(pixels));
    sample.instances = std::move(instances);
    sample.params = DegradationParams::clear_water();
    sample.seed = seed;
    return sample;
}

Tensor apply_attenuation(const Tensor& image, const DegradationParams& params) {
    params.validate();
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("apply_attenuation: expected [3,H,W], got " + shape_string(image.shape()));
    }
    const std::size_t plane = image.dim(1) * image.dim(2);
    std::vector<double> out(image.numel());
    for (std::size_t c = 0; c < 3; ++c) {
        const double transmit = std::exp(-params.attenuation[c] * params.depth) * (1.0 - params.haze);
        const double ambient = params.haze * kAmbientLight[c];
        for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
            out[i] = std::clamp(image[i] * transmit + ambient, 0.0, 1.0);
        }
    }
    return Tensor(image.shape(), std::move(out), image.dtype());
}

Tensor scatter_noise_field(const Shape& shape, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("scatter sigma must be >= 0");
    Tensor field(shape);
    if (sigma == 0.0) return field;
    Rng rng(seed);
    for (double& v : field.mutable_data()) v = sigma * rng.normal();
    return field;
}

Tensor add_scatter_noise(const Tensor& image, double sigma, std::uint64_t seed) {
    if (sigma == 0.0) return image;
    const Tensor noise = scatter_noise_field(image.shape(), sigma, seed);
    std::vector<double> out(image.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(image[i] + noise[i], 0.0, 1.0);
    return Tensor(image.shape(), std::move(out), image.dtype());
}

SceneSample render_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                         std::size_t n_objects, std::size_t categories,
                         const DegradationParams& params) {
    params.validate();
    SceneSample sample = generate_scene(seed, height, width, n_objects, categories);
    sample.image = add_scatter_noise(apply_attenuation(sample.image, params), params.scatter_sigma,
                                     derive_seed(seed, 1));
    sample.params = params;
    return sample;
}

}  // namespace mva
