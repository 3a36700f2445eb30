#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mva/metrics.h"
#include "mva/tensor.h"

namespace mva {

/// Per-channel Beer-Lambert decay with ambient haze and additive scatter
/// noise. Channel order is (R, G, B).
struct DegradationParams {
    std::array<double, 3> attenuation{1.0, 0.35, 0.15};  // per unit depth
    double depth = 2.0;
    double scatter_sigma = 0.02;
    double haze = 0.15;  // in [0, 1)

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
    /// No attenuation, haze or noise.
    static DegradationParams clear_water();
};

/// Blue-shifted ambient light mixed in by haze.
inline constexpr std::array<double, 3> kAmbientLight{0.05, 0.20, 0.30};

/// Largest supported category count (size of the object palette).
inline constexpr std::size_t kMaxCategories = 8;

struct SceneSample {
    Tensor image;                  // [3,H,W], values in [0,1]
    std::vector<Instance> instances;  // ground truth, visible pixels only
    DegradationParams params;
    std::uint64_t seed = 0;
};

/// Undegraded scene: textured seabed with n_objects ellipses/rectangles in
/// category colors, lit by a per-scene illuminant whose channel gains vary
/// by up to 40% around 1. Later objects occlude earlier ones; masks keep
/// visible pixels only. Categories are 1..categories. Throws std::invalid_argument
/// for H or W < 16, n_objects < 1 or an unsupported category count, and
/// std::runtime_error when an object cannot be placed within 64 attempts.
SceneSample generate_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                           std::size_t n_objects, std::size_t categories);

/// image[c] * exp(-attenuation[c] * depth) * (1 - haze) + haze * ambient[c],
/// clamped to [0,1]. Expects [3,H,W].
Tensor apply_attenuation(const Tensor& image, const DegradationParams& params);

/// Unclamped N(0, sigma^2) field, deterministic in seed.
Tensor scatter_noise_field(const Shape& shape, double sigma, std::uint64_t seed);

/// clamp(image + scatter_noise_field(image.shape(), sigma, seed), 0, 1).
Tensor add_scatter_noise(const Tensor& image, double sigma, std::uint64_t seed);

/// generate_scene, then attenuation, then scatter noise.
SceneSample render_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                         std::size_t n_objects, std::size_t categories,
                         const DegradationParams& params);

}  // namespace mva
