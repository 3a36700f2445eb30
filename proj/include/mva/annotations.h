#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mva/metrics.h"

namespace mva {

/// Row-major run lengths, alternating 0-runs and 1-runs and starting with
/// a 0-run (which is 0 when the first pixel is set). Canonical: no other
/// zero-length runs, and the runs sum to height * width.
std::vector<std::uint64_t> rle_encode(const BinaryMask& mask);
/// Throws FormatError on a non-canonical or wrongly sized run list.
BinaryMask rle_decode(std::size_t height, std::size_t width,
                      std::span<const std::uint64_t> counts);

/// One line of an annotation / prediction file.
struct AnnotationRecord {
    std::uint64_t image_id = 0;
    Instance instance;

    bool operator==(const AnnotationRecord&) const = default;
};

// Line format (keys sorted, compact):
//   {"category":1,"image_id":0,"mask":{"h":32,"rle":[..],"w":32},"score":0.9}
// "score" is present only on predictions.
std::string to_json_line(const AnnotationRecord& record);
/// Throws FormatError; `line_number` (1-based) is quoted in messages.
AnnotationRecord parse_json_line(std::string_view line, std::size_t line_number = 0);

void write_annotations(std::ostream& os, std::span<const AnnotationRecord> records);
/// Blank lines are skipped. Errors name the offending line.
std::vector<AnnotationRecord> read_annotations(std::istream& is);

void save_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

/// Groups records into index-aligned image sets over the union of image ids
/// (ascending). `image_ids` receives that id order when non-null.
void group_by_image(std::span<const AnnotationRecord> preds,
                    std::span<const AnnotationRecord> gts, ImageSet& pred_images,
                    ImageSet& gt_images, std::vector<std::uint64_t>* image_ids = nullptr);

}  // namespace mva
