#include "mva/annotations.h"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "json.hpp"

#include "mva/tensor_io.h"

namespace mva {

using nlohmann::json;

std::vector<std::uint64_t> rle_encode(const BinaryMask& mask) {
    std::vector<std::uint64_t> counts;
    std::uint8_t current = 0;
    std::uint64_t run = 0;
    for (std::uint8_t bit : mask.bits()) {
        if (bit != current) {
            counts.push_back(run);
            current = bit;
            run = 0;
        }
        ++run;
    }
    counts.push_back(run);
    return counts;
}

BinaryMask rle_decode(std::size_t height, std::size_t width,
                      std::span<const std::uint64_t> counts) {
    if (height == 0 || width == 0) throw FormatError("mask extents must be >= 1");
    if (counts.empty()) throw FormatError("empty run list");
    const std::uint64_t total = static_cast<std::uint64_t>(height) * width;
    std::vector<std::uint8_t> bits;
    bits.reserve(static_cast<std::size_t>(total));
    std::uint8_t value = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0 && i != 0) {
            throw FormatError("zero-length run at position " + std::to_string(i));
        }
        if (counts[i] > total - bits.size()) {
            throw FormatError("runs exceed " + std::to_string(height) + "x" +
                              std::to_string(width) + " pixels");
        }
        bits.insert(bits.end(), static_cast<std::size_t>(counts[i]), value);
        value ^= 1;
    }
    if (bits.size() != total) {
        throw FormatError("runs cover " + std::to_string(bits.size()) + " of " +
                          std::to_string(total) + " pixels");
    }
    return BinaryMask(height, width, std::move(bits));
}

std::string to_json_line(const AnnotationRecord& record) {
    const auto& inst = record.instance;
    json j;
    j["image_id"] = record.image_id;
    j["category"] = inst.category;
    j["mask"] = {{"h", inst.mask.height()}, {"w", inst.mask.width()},
                 {"rle", rle_encode(inst.mask)}};
    if (inst.score) j["score"] = *inst.score;
    return j.dump();
}

AnnotationRecord parse_json_line(std::string_view line, std::size_t line_number) {
    const std::string where = "line " + std::to_string(line_number) + ": ";
    try {
        const json j = json::parse(line);
        if (!j.is_object()) throw FormatError(where + "expected a JSON object");
        AnnotationRecord rec;
        rec.image_id = j.at("image_id").get<std::uint64_t>();
        rec.instance.category = j.at("category").get<int>();
        if (const auto it = j.find("score"); it != j.end() && !it->is_null()) {
            const double s = it->get<double>();
            if (!(s >= 0.0 && s <= 1.0)) throw FormatError(where + "score outside [0, 1]");
            rec.instance.score = s;
        }
        const json& mask = j.at("mask");
        const auto h = mask.at("h").get<std::size_t>();
        const auto w = mask.at("w").get<std::size_t>();
        const auto counts = mask.at("rle").get<std::vector<std::uint64_t>>();
        try {
            rec.instance.mask = rle_decode(h, w, counts);
        } catch (const FormatError& e) {
            throw FormatError(where + "malformed RLE: " + e.what());
        }
        return rec;
    } catch (const json::exception& e) {
        throw FormatError(where + e.what());
    }
}

void write_annotations(std::ostream& os, std::span<const AnnotationRecord> records) {
    for (const auto& rec : records) os << to_json_line(rec) << '\n';
}

std::vector<AnnotationRecord> read_annotations(std::istream& is) {
    std::vector<AnnotationRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(is, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_json_line(line, number));
    }
    return out;
}

void save_annotations(const std::filesystem::path& path,
                      std::span<const AnnotationRecord> records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_annotations(os, records);
    if (!os) throw IoError("write failed: " + path.string());
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_annotations(is);
}

void group_by_image(std::span<const AnnotationRecord> preds,
                    std::span<const AnnotationRecord> gts, ImageSet& pred_images,
                    ImageSet& gt_images, std::vector<std::uint64_t>* image_ids) {
    std::map<std::uint64_t, std::size_t> index;
    for (const auto* list : {&preds, &gts}) {
        for (const auto& rec : *list) index.emplace(rec.image_id, 0);
    }
    std::size_t next = 0;
    for (auto& [id, slot] : index) slot = next++;
    pred_images.assign(index.size(), {});
    gt_images.assign(index.size(), {});
    for (const auto& rec : preds) pred_images[index[rec.image_id]].push_back(rec.instance);
    for (const auto& rec : gts) gt_images[index[rec.image_id]].push_back(rec.instance);
    if (image_ids) {
        image_ids->clear();
        for (const auto& [id, slot] : index) image_ids->push_back(id);
    }
}

}  // namespace mva
