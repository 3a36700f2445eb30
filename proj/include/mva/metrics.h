#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mva {

/// Row-major boolean grid.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(std::size_t height, std::size_t width);
    BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool get(std::size_t row, std::size_t col) const { return bits_[row * width_ + col] != 0; }
    void set(std::size_t row, std::size_t col, bool value = true) {
        bits_[row * width_ + col] = value ? 1 : 0;
    }
    bool operator[](std::size_t flat) const { return bits_[flat] != 0; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    std::size_t popcount() const noexcept;
    bool same_extents(const BinaryMask& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }
    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// One segmentation instance. Predictions carry a score in [0,1]; ground
/// truth does not.
struct Instance {
    BinaryMask mask;
    int category = 0;
    std::optional<double> score;

    bool operator==(const Instance&) const = default;
};

/// |a ∩ b| / |a ∪ b|; 0 when both are empty. Throws ShapeError on extent mismatch.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

struct Match {
    std::size_t pred = 0;
    std::optional<std::size_t> gt;
    double iou = 0.0;  // IoU with the matched gt, 0 when unmatched
};

/// Greedy matching within one image. Predictions are visited by descending
/// score (stable in input order); each takes the unmatched gt of equal
/// category with the highest IoU (lowest index on ties) if that IoU >= t.
/// Returns one Match per prediction, in visiting order.
std::vector<Match> match_instances(std::span<const Instance> preds,
                                   std::span<const Instance> gts, double iou_threshold);

/// Predictions or ground truth for each image, index-aligned across the two
/// lists.
using ImageSet = std::vector<std::vector<Instance>>;

/// 101-point interpolated AP over an image set at one IoU threshold.
/// Returns nullopt when there are neither predictions nor ground truths;
/// 0 when only one side is empty.
std::optional<double> average_precision(const ImageSet& preds, const ImageSet& gts,
                                        double iou_threshold);

struct APReport {
    std::vector<double> thresholds;
    std::vector<double> ap_per_threshold;
    double map = 0.0;
    std::optional<double> ap50;
    std::optional<double> ap75;
};

/// 0.50:0.05:0.95.
std::vector<double> default_thresholds();

/// Per threshold, AP of each category present in either set, averaged over
/// the categories whose AP is defined; map is the mean over thresholds.
/// Throws std::invalid_argument for an empty or non-increasing threshold
/// list, thresholds outside (0,1], mismatched image counts, or input with no
/// instances at all.
APReport evaluate(const ImageSet& preds, const ImageSet& gts,
                  const std::vector<double>& thresholds = default_thresholds());

}  // namespace mva
