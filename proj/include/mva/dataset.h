#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mva/metrics.h"
#include "mva/synthetic.h"
#include "mva/tensor.h"

namespace mva {

struct DatasetSpec {
    std::uint64_t seed = 1;
    std::size_t count = 128;
    std::size_t size = 32;  // square images
    std::size_t objects = 3;
    std::size_t categories = 6;
    DegradationParams degradation;

    void validate() const;
};

struct Dataset {
    DatasetSpec spec;
    std::vector<std::uint64_t> image_seeds;
    std::vector<Tensor> images;                    // [3,H,W]
    std::vector<std::vector<Instance>> instances;  // ground truth per image
};

/// Seed of image i: derive_seed(spec.seed, i).
Dataset generate_dataset(const DatasetSpec& spec);

/// Writes images/{id}.mvtn (f32), annotations.jsonl and manifest.json under
/// `dir`, creating it if needed. Throws IoError on filesystem failure.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
/// Throws IoError when files are missing, FormatError when they are malformed.
Dataset load_dataset(const std::filesystem::path& dir);

/// Manifest document as written to manifest.json.
std::string manifest_json(const Dataset& dataset);

/// Per-pixel class ids: 0 for background, else the visible instance's category.
std::vector<int> label_map(const std::vector<Instance>& instances, std::size_t height,
                           std::size_t width);

}  // namespace mva
