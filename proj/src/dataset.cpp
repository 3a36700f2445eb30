#include "mva/dataset.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "mva/annotations.h"
#include "mva/rng.h"
#include "mva/tensor_io.h"

namespace mva {

using nlohmann::json;
namespace fs = std::filesystem;

void DatasetSpec::validate() const {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    if (size < 16) throw std::invalid_argument("size must be >= 16");
    if (objects < 1) throw std::invalid_argument("objects must be >= 1");
    if (categories < 1 || categories > kMaxCategories) {
        throw std::invalid_argument("categories must be in [1, " +
                                    std::to_string(kMaxCategories) + "]");
    }
    degradation.validate();
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    for (std::size_t i = 0; i < spec.count; ++i) {
        const std::uint64_t seed = derive_seed(spec.seed, i);
        SceneSample s = render_scene(seed, spec.size, spec.size, spec.objects, spec.categories,
                                     spec.degradation);
        ds.image_seeds.push_back(seed);
        ds.images.push_back(s.image.to(DType::f32));
        ds.instances.push_back(std::move(s.instances));
    }
    return ds;
}

std::string manifest_json(const Dataset& dataset) {
    const auto& spec = dataset.spec;
    const auto& d = spec.degradation;
    json j;
    j["format_version"] = 1;
    j["seed"] = spec.seed;
    j["count"] = spec.count;
    j["height"] = spec.size;
    j["width"] = spec.size;
    j["objects"] = spec.objects;
    j["categories"] = spec.categories;
    j["degradation"] = {{"attenuation", d.attenuation},
                        {"depth", d.depth},
                        {"scatter_sigma", d.scatter_sigma},
                        {"haze", d.haze},
                        {"ambient", kAmbientLight}};
    j["image_seeds"] = dataset.image_seeds;
    std::size_t total = 0;
    for (const auto& inst : dataset.instances) total += inst.size();
    j["instances"] = total;
    return j.dump(2) + "\n";
}

void write_dataset(const fs::path& dir, const Dataset& dataset) {
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());

    std::vector<AnnotationRecord> records;
    for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        save_tensor(dir / "images" / (std::to_string(i) + ".mvtn"), dataset.images[i]);
        for (const auto& inst : dataset.instances[i]) records.push_back({i, inst});
    }
    save_annotations(dir / "annotations.jsonl", records);

    std::ofstream os(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
    os << manifest_json(dataset);
    if (!os) throw IoError("write failed: " + (dir / "manifest.json").string());
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream is(manifest_path);
    if (!is) throw IoError("missing dataset manifest " + manifest_path.string());
    Dataset ds;
    try {
        const json j = json::parse(is);
        auto& spec = ds.spec;
        spec.seed = j.at("seed").get<std::uint64_t>();
        spec.count = j.at("count").get<std::size_t>();
        spec.size = j.at("height").get<std::size_t>();
        if (j.at("width").get<std::size_t>() != spec.size) {
            throw FormatError("non-square datasets are not supported");
        }
        spec.objects = j.at("objects").get<std::size_t>();
        spec.categories = j.at("categories").get<std::size_t>();
        const json& d = j.at("degradation");
        spec.degradation.attenuation = d.at("attenuation").get<std::array<double, 3>>();
        spec.degradation.depth = d.at("depth").get<double>();
        spec.degradation.scatter_sigma = d.at("scatter_sigma").get<double>();
        spec.degradation.haze = d.at("haze").get<double>();
        ds.image_seeds = j.at("image_seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    if (ds.image_seeds.size() != ds.spec.count) {
        throw FormatError("manifest lists " + std::to_string(ds.image_seeds.size()) +
                          " seeds for " + std::to_string(ds.spec.count) + " images");
    }

    const Shape expected{3, ds.spec.size, ds.spec.size};
    for (std::size_t i = 0; i < ds.spec.count; ++i) {
        Tensor img = load_tensor(dir / "images" / (std::to_string(i) + ".mvtn"));
        if (img.shape() != expected) {
            throw FormatError("image " + std::to_string(i) + " has shape " +
                              shape_string(img.shape()) + ", expected " + shape_string(expected));
        }
        ds.images.push_back(std::move(img));
    }
    ds.instances.assign(ds.spec.count, {});
    for (auto& rec : load_annotations(dir / "annotations.jsonl")) {
        if (rec.image_id >= ds.spec.count) {
            throw FormatError("annotation for unknown image " + std::to_string(rec.image_id));
        }
        if (rec.instance.mask.height() != ds.spec.size || rec.instance.mask.width() != ds.spec.size) {
            throw FormatError("annotation mask extents do not match image size");
        }
        ds.instances[rec.image_id].push_back(std::move(rec.instance));
    }
    return ds;
}

std::vector<int> label_map(const std::vector<Instance>& instances, std::size_t height,
                           std::size_t width) {
    std::vector<int> labels(height * width, 0);
    for (const auto& inst : instances) {
        if (inst.mask.height() != height || inst.mask.width() != width) {
            throw ShapeError("label_map: mask extents differ from the image");
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (inst.mask[i]) labels[i] = inst.category;
        }
    }
    return labels;
}

}  // namespace mva
