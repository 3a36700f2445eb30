#include "mva/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "mva/tensor.h"

namespace mva {

BinaryMask::BinaryMask(std::size_t height, std::size_t width)
    : height_(height), width_(width), bits_(height * width, 0) {
    if (height == 0 || width == 0) throw ShapeError("mask extents must be >= 1");
}

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
    if (height == 0 || width == 0) throw ShapeError("mask extents must be >= 1");
    if (bits_.size() != height * width) {
        throw ShapeError("mask bit count " + std::to_string(bits_.size()) + " != " +
                         std::to_string(height) + "x" + std::to_string(width));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::popcount() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_extents(b)) {
        throw ShapeError("mask_iou: extents " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()));
    }
    std::size_t inter = 0, uni = 0;
    const auto ab = a.bits(), bb = b.bits();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        inter += ab[i] & bb[i];
        uni += ab[i] | bb[i];
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

double score_of(const Instance& pred) {
    if (!pred.score) throw std::invalid_argument("prediction without a score");
    return *pred.score;
}

std::vector<std::size_t> score_order(std::span<const Instance> preds) {
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return score_of(preds[a]) > score_of(preds[b]);
    });
    return order;
}

}  // namespace

std::vector<Match> match_instances(std::span<const Instance> preds,
                                   std::span<const Instance> gts, double iou_threshold) {
    std::vector<bool> taken(gts.size(), false);
    std::vector<Match> out;
    out.reserve(preds.size());
    for (std::size_t p : score_order(preds)) {
        Match m{p, std::nullopt, 0.0};
        double best = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g] || gts[g].category != preds[p].category) continue;
            const double iou = mask_iou(preds[p].mask, gts[g].mask);
            if (iou >= iou_threshold && iou > best) {
                best = iou;
                m.gt = g;
                m.iou = iou;
            }
        }
        if (m.gt) taken[*m.gt] = true;
        out.push_back(m);
    }
    return out;
}

std::optional<double> average_precision(const ImageSet& preds, const ImageSet& gts,
                                        double iou_threshold) {
    if (preds.size() != gts.size()) {
        throw std::invalid_argument("average_precision: " + std::to_string(preds.size()) +
                                    " prediction images vs " + std::to_string(gts.size()) +
                                    " ground-truth images");
    }
    struct Scored {
        double score;
        bool tp;
    };
    std::vector<Scored> ranked;
    std::size_t n_gt = 0;
    for (std::size_t img = 0; img < preds.size(); ++img) {
        n_gt += gts[img].size();
        for (const auto& m : match_instances(preds[img], gts[img], iou_threshold)) {
            ranked.push_back({score_of(preds[img][m.pred]), m.gt.has_value()});
        }
    }
    if (n_gt == 0) return ranked.empty() ? std::nullopt : std::optional<double>(0.0);
    if (ranked.empty()) return 0.0;

    // Stable: equal scores keep image order, then per-image visiting order.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });

    std::vector<double> precision(ranked.size());
    std::vector<std::size_t> tp_count(ranked.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        tp += ranked[i].tp ? 1 : 0;
        tp_count[i] = tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    // Precision envelope: max precision at this rank or any later one.
    for (std::size_t i = ranked.size() - 1; i-- > 0;) {
        precision[i] = std::max(precision[i], precision[i + 1]);
    }
    // recall_k >= r/100  <=>  100 * tp_k >= r * n_gt, compared exactly in integers.
    double total = 0.0;
    std::size_t k = 0;
    for (std::size_t r = 0; r <= 100; ++r) {
        while (k < ranked.size() && 100 * tp_count[k] < r * n_gt) ++k;
        if (k == ranked.size()) break;
        total += precision[k];
    }
    return total / 101.0;
}

std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int i = 50; i <= 95; i += 5) t.push_back(i / 100.0);
    return t;
}

APReport evaluate(const ImageSet& preds, const ImageSet& gts,
                  const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw std::invalid_argument("evaluate: empty threshold list");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0)) {
            throw std::invalid_argument("evaluate: threshold " + std::to_string(thresholds[i]) +
                                        " outside (0, 1]");
        }
        if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
            throw std::invalid_argument("evaluate: thresholds must be strictly increasing");
        }
    }
    if (preds.size() != gts.size()) {
        throw std::invalid_argument("evaluate: prediction and ground-truth image counts differ");
    }

    std::set<int> categories;
    for (const auto* set : {&preds, &gts}) {
        for (const auto& image : *set) {
            for (const auto& inst : image) categories.insert(inst.category);
        }
    }
    if (categories.empty()) throw std::invalid_argument("evaluate: no instances to evaluate");

    // Split once per category; matching never crosses categories anyway.
    std::vector<std::pair<ImageSet, ImageSet>> per_category;
    for (int cat : categories) {
        ImageSet p(preds.size()), g(gts.size());
        for (std::size_t img = 0; img < preds.size(); ++img) {
            for (const auto& inst : preds[img]) {
                if (inst.category == cat) p[img].push_back(inst);
            }
            for (const auto& inst : gts[img]) {
                if (inst.category == cat) g[img].push_back(inst);
            }
        }
        per_category.emplace_back(std::move(p), std::move(g));
    }

    APReport report;
    report.thresholds = thresholds;
    for (double t : thresholds) {
        double acc = 0.0;
        std::size_t defined = 0;
        for (const auto& [p, g] : per_category) {
            if (const auto ap = average_precision(p, g, t)) {
                acc += *ap;
                ++defined;
            }
        }
        report.ap_per_threshold.push_back(defined ? acc / static_cast<double>(defined) : 0.0);
    }
    double sum = 0.0;
    for (double ap : report.ap_per_threshold) sum += ap;
    report.map = sum / static_cast<double>(thresholds.size());
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (std::fabs(thresholds[i] - 0.50) < 1e-12) report.ap50 = report.ap_per_threshold[i];
        if (std::fabs(thresholds[i] - 0.75) < 1e-12) report.ap75 = report.ap_per_threshold[i];
    }
    return report;
}

}  // namespace mva
