#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mva/dataset.h"
#include "mva/rng.h"
#include "mva/synthetic.h"
#include "oracle.h"

using namespace mva;

TEST(Scene, DeterministicInSeed) {
    const SceneSample a = generate_scene(7, 32, 24, 3, 4);
    const SceneSample b = generate_scene(7, 32, 24, 3, 4);
    EXPECT_TRUE(a.image.identical(b.image));
    EXPECT_EQ(a.instances, b.instances);
    const SceneSample c = generate_scene(8, 32, 24, 3, 4);
    EXPECT_FALSE(a.image.identical(c.image));
}

TEST(Scene, PropertySweep) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::size_t h = 16 + seed % 17, w = 16 + (seed * 7) % 23;
        const std::size_t objects = 1 + seed % 4, categories = 1 + seed % kMaxCategories;
        const SceneSample s = render_scene(seed, h, w, objects, categories, DegradationParams{});
        ASSERT_EQ(s.image.shape(), (Shape{3, h, w}));
        for (double v : s.image.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
        ASSERT_EQ(s.instances.size(), objects);
        std::vector<int> owners(h * w, 0);
        for (const Instance& inst : s.instances) {
            EXPECT_GE(inst.category, 1);
            EXPECT_LE(inst.category, static_cast<int>(categories));
            EXPECT_FALSE(inst.score.has_value());
            EXPECT_EQ(inst.mask.height(), h);
            EXPECT_EQ(inst.mask.width(), w);
            EXPECT_GT(inst.mask.popcount(), 0u);
            for (std::size_t i = 0; i < h * w; ++i) owners[i] += inst.mask[i] ? 1 : 0;
        }
        for (int o : owners) ASSERT_LE(o, 1) << "masks overlap at seed " << seed;
    }
}

TEST(Scene, SingleObject) {
    const SceneSample s = generate_scene(3, 16, 16, 1, 1);
    ASSERT_EQ(s.instances.size(), 1u);
    EXPECT_EQ(s.instances[0].category, 1);
}

TEST(Scene, RejectsBadArguments) {
    EXPECT_THROW(generate_scene(0, 15, 32, 1, 1), std::invalid_argument);
    EXPECT_THROW(generate_scene(0, 32, 32, 0, 1), std::invalid_argument);
    EXPECT_THROW(generate_scene(0, 32, 32, 1, 0), std::invalid_argument);
    EXPECT_THROW(generate_scene(0, 32, 32, 1, kMaxCategories + 1), std::invalid_argument);
    DegradationParams p;
    p.haze = 1.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = {};
    p.depth = -1;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Attenuation, MatchesScalarFormula) {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor img = oracle::random_tensor(gen, {3, 5, 6}, 0.0, 1.0);
        DegradationParams p;
        p.attenuation = {std::uniform_real_distribution<double>(0, 2)(gen), 0.35, 0.15};
        p.depth = std::uniform_real_distribution<double>(0, 5)(gen);
        p.haze = std::uniform_real_distribution<double>(0, 0.9)(gen);
        const Tensor out = apply_attenuation(img, p);
        oracle::Vec ref(img.numel());
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 30; ++i) {
                const double v = img[c * 30 + i] * std::exp(-p.attenuation[c] * p.depth) * (1 - p.haze) +
                                 p.haze * kAmbientLight[c];
                ref[c * 30 + i] = std::min(1.0, std::max(0.0, v));
            }
        EXPECT_LE(oracle::rel_err(oracle::values(out), ref), 1e-12);
    }
}

TEST(Attenuation, LnTwoHalvesRed) {
    std::mt19937_64 gen(2);
    const Tensor img = oracle::random_tensor(gen, {3, 4, 4}, 0.0, 1.0);
    DegradationParams p = DegradationParams::clear_water();
    p.attenuation = {std::numbers::ln2, 0.0, 0.0};
    p.depth = 1.0;
    const Tensor out = apply_attenuation(img, p);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_NEAR(out[i], 0.5 * img[i], 1e-15);
        EXPECT_EQ(out[16 + i], img[16 + i]);
        EXPECT_EQ(out[32 + i], img[32 + i]);
    }
}

TEST(Attenuation, ClearWaterIsIdentity) {
    const SceneSample s = generate_scene(4, 20, 20, 2, 3);
    EXPECT_TRUE(apply_attenuation(s.image, DegradationParams::clear_water()).identical(s.image));
    EXPECT_TRUE(render_scene(4, 20, 20, 2, 3, DegradationParams::clear_water()).image.identical(s.image));
}

TEST(Attenuation, DeeperIsDarker) {
    const SceneSample s = generate_scene(5, 24, 24, 3, 4);
    DegradationParams p = DegradationParams::clear_water();
    Tensor prev = s.image;
    for (double depth : {0.5, 1.0, 2.0, 4.0}) {
        p.depth = depth;
        const Tensor out = apply_attenuation(s.image, p);
        for (std::size_t i = 0; i < out.numel(); ++i) ASSERT_LE(out[i], prev[i]);
        prev = out;
    }
    // Red decays fastest under the default coefficients.
    p.depth = 2.0;
    const Tensor out = apply_attenuation(Tensor::ones({3, 1, 1}), p);
    EXPECT_LT(out[0], out[1]);
    EXPECT_LT(out[1], out[2]);
}

TEST(Noise, StandardDeviationWithinTwoPercent) {
    const double sigma = 0.05;
    const Tensor n = scatter_noise_field({1000, 1000}, sigma, 11);
    double sum = 0, sq = 0;
    for (double v : n.data()) {
        sum += v;
        sq += v * v;
    }
    const double count = static_cast<double>(n.numel());
    const double mean = sum / count;
    const double sd = std::sqrt(sq / count - mean * mean);
    EXPECT_NEAR(sd, sigma, 0.02 * sigma);
    EXPECT_NEAR(mean, 0.0, 5.0 * sigma / std::sqrt(count));
}

TEST(Noise, ZeroSigmaIsIdentityAndNoiseIsSeeded) {
    const SceneSample s = generate_scene(6, 16, 16, 1, 2);
    EXPECT_TRUE(add_scatter_noise(s.image, 0.0, 1).identical(s.image));
    EXPECT_TRUE(add_scatter_noise(s.image, 0.1, 1).identical(add_scatter_noise(s.image, 0.1, 1)));
    EXPECT_FALSE(add_scatter_noise(s.image, 0.1, 1).identical(add_scatter_noise(s.image, 0.1, 2)));
    const Tensor noisy = add_scatter_noise(s.image, 0.5, 3);
    for (double v : noisy.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Dataset, LabelMapAndDeterminism) {
    DatasetSpec spec;
    spec.count = 4;
    spec.size = 16;
    const Dataset a = generate_dataset(spec), b = generate_dataset(spec);
    ASSERT_EQ(a.images.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(a.image_seeds[i], derive_seed(spec.seed, i));
        EXPECT_TRUE(a.images[i].identical(b.images[i]));
        const auto labels = label_map(a.instances[i], 16, 16);
        for (const Instance& inst : a.instances[i])
            for (std::size_t p = 0; p < 256; ++p)
                if (inst.mask[p]) EXPECT_EQ(labels[p], inst.category);
    }
    EXPECT_EQ(manifest_json(a), manifest_json(b));
}
