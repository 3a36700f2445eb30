#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "metrics_oracle.h"
#include "mva/metrics.h"
#include "mva/tensor.h"

using namespace mva;
using namespace oracle;

TEST(MaskIou, Examples) {
    const BinaryMask left = rect(4, 4, 0, 0, 4, 2), top = rect(4, 4, 0, 0, 2, 4);
    EXPECT_EQ(mask_iou(left, top), 1.0 / 3.0);
    EXPECT_EQ(mask_iou(left, left), 1.0);
    EXPECT_EQ(mask_iou(left, rect(4, 4, 0, 2, 4, 4)), 0.0);
    EXPECT_EQ(mask_iou(BinaryMask(4, 4), BinaryMask(4, 4)), 0.0);
    EXPECT_THROW(mask_iou(left, BinaryMask(4, 5)), ShapeError);
}

TEST(MaskIou, Symmetric) {
    std::mt19937_64 gen(1);
    std::bernoulli_distribution bit(0.4);
    for (int i = 0; i < 200; ++i) {
        BinaryMask a(6, 6), b(6, 6);
        for (std::size_t j = 0; j < 36; ++j) a.set(j / 6, j % 6, bit(gen)), b.set(j / 6, j % 6, bit(gen));
        EXPECT_EQ(mask_iou(a, b), mask_iou(b, a));
        EXPECT_EQ(mask_iou(a, b), iou_ref(a, b));
        if (a.popcount() > 0) EXPECT_EQ(mask_iou(a, a), 1.0);
    }
}

TEST(Match, IdenticalPredMatches) {
    const std::vector<Instance> gts{gt(rect(6, 6, 0, 0, 3, 3))};
    const std::vector<Instance> preds{pred(rect(6, 6, 0, 0, 3, 3), 0.9)};
    const auto m = match_instances(preds, gts, 0.5);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].gt, 0u);
    EXPECT_EQ(m[0].iou, 1.0);
}

TEST(Match, DuplicateBecomesFalsePositive) {
    const std::vector<Instance> gts{gt(rect(6, 6, 0, 0, 3, 3))};
    const std::vector<Instance> preds{pred(rect(6, 6, 0, 0, 3, 3), 0.4), pred(rect(6, 6, 0, 0, 3, 3), 0.8)};
    const auto m = match_instances(preds, gts, 0.5);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m[0].pred, 1u);
    EXPECT_EQ(m[0].gt, 0u);
    EXPECT_EQ(m[1].pred, 0u);
    EXPECT_FALSE(m[1].gt.has_value());
}

TEST(Match, CategoryMustAgree) {
    const std::vector<Instance> gts{gt(rect(6, 6, 0, 0, 3, 3), 2)};
    const std::vector<Instance> preds{pred(rect(6, 6, 0, 0, 3, 3), 0.9, 1)};
    EXPECT_FALSE(match_instances(preds, gts, 0.5)[0].gt.has_value());
}

TEST(Match, AgreesWithBruteForceOnRandomGrids) {
    std::mt19937_64 gen(2);
    std::uniform_int_distribution<std::size_t> coord(0, 5), npred(0, 4), ngt(0, 3), cat(1, 2), flips(0, 4);
    const double thresholds[] = {0.1, 0.3, 0.5, 0.7};
    const double scores[] = {0.2, 0.5, 0.5, 0.7, 0.9};
    const auto random_rect = [&] {
        std::size_t r0 = coord(gen), r1 = coord(gen), c0 = coord(gen), c1 = coord(gen);
        if (r0 > r1) std::swap(r0, r1);
        if (c0 > c1) std::swap(c0, c1);
        return rect(6, 6, r0, c0, r1 + 1, c1 + 1);
    };
    std::size_t matched_total = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Instance> gts, preds;
        for (std::size_t i = 0, n = ngt(gen); i < n; ++i) gts.push_back(gt(random_rect(), static_cast<int>(cat(gen))));
        for (std::size_t i = 0, n = npred(gen); i < n; ++i) {
            BinaryMask m = !gts.empty() && i % 2 == 0 ? gts[coord(gen) % gts.size()].mask : random_rect();
            for (std::size_t f = flips(gen); f > 0; --f) {
                const std::size_t r = coord(gen), c = coord(gen);
                m.set(r, c, !m.get(r, c));
            }
            preds.push_back(pred(std::move(m), scores[coord(gen) % 5], static_cast<int>(cat(gen))));
        }
        const double t = thresholds[trial % 4];
        const auto got = match_instances(preds, gts, t);
        const Assignment want = brute_force_match(preds, gts, t);
        ASSERT_EQ(got.size(), preds.size());
        const auto order = visit_order(preds);
        std::vector<bool> gt_used(gts.size(), false);
        for (std::size_t k = 0; k < got.size(); ++k) {
            EXPECT_EQ(got[k].pred, order[k]) << "trial " << trial;
            const int want_gt = want.gt_of[got[k].pred];
            if (want_gt < 0) {
                EXPECT_FALSE(got[k].gt.has_value()) << "trial " << trial;
            } else {
                ASSERT_TRUE(got[k].gt.has_value()) << "trial " << trial;
                EXPECT_EQ(*got[k].gt, static_cast<std::size_t>(want_gt)) << "trial " << trial;
                EXPECT_GE(got[k].iou, t);
                EXPECT_FALSE(gt_used[*got[k].gt]);
                gt_used[*got[k].gt] = true;
                ++matched_total;
            }
        }
    }
    EXPECT_GT(matched_total, 100u);
}

TEST(AveragePrecision, DerivedThreePredTwoGtExample) {
    // Two gts; predictions TP .9, FP .8, TP .7.
    const BinaryMask a = rect(6, 6, 0, 0, 2, 2), b = rect(6, 6, 3, 3, 6, 6), fp = rect(6, 6, 0, 4, 2, 6);
    const ImageSet gts{{gt(a), gt(b)}};
    const ImageSet preds{{pred(a, 0.9), pred(fp, 0.8), pred(b, 0.7)}};
    const double oracle_ap = ap_reference({true, false, true}, 2);
    EXPECT_NEAR(oracle_ap, (51.0 + 50.0 * (2.0 / 3.0)) / 101.0, 1e-15);
    const auto got = average_precision(preds, gts, 0.5);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, oracle_ap);
}

TEST(AveragePrecision, EdgeCases) {
    const BinaryMask a = rect(6, 6, 0, 0, 2, 2);
    EXPECT_EQ(*average_precision({{pred(a, 0.9)}}, {{gt(a)}}, 0.5), 1.0);
    EXPECT_EQ(*average_precision({{}}, {{gt(a)}}, 0.5), 0.0);
    EXPECT_EQ(*average_precision({{pred(a, 0.9)}}, {{}}, 0.5), 0.0);
    EXPECT_FALSE(average_precision({{}}, {{}}, 0.5).has_value());
}

TEST(AveragePrecision, MatchesReferenceOnRandomSets) {
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<std::size_t> coord(0, 5), count(1, 4);
    std::uniform_real_distribution<double> score(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        ImageSet preds(3), gts(3);
        for (std::size_t img = 0; img < 3; ++img) {
            for (std::size_t i = 0, n = count(gen); i < n; ++i) {
                const std::size_t r = coord(gen), c = coord(gen);
                gts[img].push_back(gt(rect(6, 6, r, c, r + 1, c + 1)));
            }
            for (std::size_t i = 0, n = count(gen); i < n; ++i) {
                const std::size_t r = coord(gen), c = coord(gen);
                preds[img].push_back(pred(rect(6, 6, r, c, r + 1, c + 1), score(gen)));
            }
        }
        // Reference: match per image, then pool all predictions by score.
        std::vector<std::pair<double, bool>> pooled;
        std::size_t n_gt = 0;
        for (std::size_t img = 0; img < 3; ++img) {
            n_gt += gts[img].size();
            const Assignment m = brute_force_match(preds[img], gts[img], 0.5);
            for (std::size_t p = 0; p < preds[img].size(); ++p) pooled.emplace_back(*preds[img][p].score, m.gt_of[p] >= 0);
        }
        std::stable_sort(pooled.begin(), pooled.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
        std::vector<bool> flags;
        for (const auto& e : pooled) flags.push_back(e.second);
        EXPECT_EQ(*average_precision(preds, gts, 0.5), ap_reference(flags, n_gt)) << "trial " << trial;
    }
}

TEST(AveragePrecision, LowScoreFalsePositiveNeverHelps) {
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<std::size_t> coord(0, 4);
    std::uniform_real_distribution<double> score(0.1, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        ImageSet preds(2), gts(2);
        for (std::size_t img = 0; img < 2; ++img) {
            for (int i = 0; i < 3; ++i) {
                const std::size_t r = coord(gen), c = coord(gen);
                gts[img].push_back(gt(rect(6, 6, r, c, r + 2, c + 2)));
                const std::size_t r2 = coord(gen), c2 = coord(gen);
                preds[img].push_back(pred(rect(6, 6, r2, c2, r2 + 2, c2 + 2), score(gen)));
            }
        }
        const double before = *average_precision(preds, gts, 0.5);
        preds[trial % 2].push_back(pred(BinaryMask(6, 6), 0.05));
        const double after = *average_precision(preds, gts, 0.5);
        EXPECT_LE(after, before);
        EXPECT_GE(after, 0.0);
        EXPECT_LE(before, 1.0);
    }
}

TEST(AveragePrecision, EqualScorePermutationConsistentWithTieBreak) {
    // Equal-score predictions are visited in input order, so swapping two
    // tied true positives (and reordering the gts) must not change AP.
    const BinaryMask a = rect(6, 6, 0, 0, 2, 2), b = rect(6, 6, 3, 3, 6, 6), c = rect(6, 6, 0, 4, 1, 6);
    const ImageSet gts1{{gt(a), gt(b), gt(c)}}, gts2{{gt(c), gt(b), gt(a)}};
    const ImageSet p1{{pred(a, 0.5), pred(b, 0.5), pred(rect(6, 6, 5, 0, 6, 1), 0.5)}};
    const ImageSet p2{{pred(b, 0.5), pred(a, 0.5), pred(rect(6, 6, 5, 0, 6, 1), 0.5)}};
    EXPECT_EQ(*average_precision(p1, gts1, 0.5), *average_precision(p2, gts2, 0.5));
}

TEST(Evaluate, PerfectPredictions) {
    const BinaryMask a = rect(6, 6, 0, 0, 2, 2), b = rect(6, 6, 3, 3, 6, 6);
    const APReport r = evaluate({{pred(a, 0.9, 1), pred(b, 0.8, 2)}}, {{gt(a, 1), gt(b, 2)}});
    EXPECT_EQ(r.map, 1.0);
    EXPECT_EQ(r.ap50, 1.0);
    EXPECT_EQ(r.ap75, 1.0);
    EXPECT_EQ(r.thresholds.size(), 10u);
}

TEST(Evaluate, MapIsMeanOfThresholdAps) {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<std::size_t> coord(0, 4), cat(1, 3);
    std::uniform_real_distribution<double> score(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        ImageSet preds(2), gts(2);
        for (std::size_t img = 0; img < 2; ++img)
            for (int i = 0; i < 3; ++i) {
                const std::size_t r = coord(gen), c = coord(gen);
                gts[img].push_back(gt(rect(6, 6, r, c, r + 2, c + 2), static_cast<int>(cat(gen))));
                const std::size_t r2 = std::min<std::size_t>(r + coord(gen) % 2, 4), c2 = c;
                preds[img].push_back(pred(rect(6, 6, r2, c2, r2 + 2, c2 + 2), score(gen), static_cast<int>(cat(gen))));
            }
        const APReport rep = evaluate(preds, gts);
        double mean = 0.0;
        for (double v : rep.ap_per_threshold) mean += v;
        mean /= static_cast<double>(rep.ap_per_threshold.size());
        EXPECT_NEAR(rep.map, mean, 1e-15);
        EXPECT_EQ(*rep.ap50, rep.ap_per_threshold[0]);
        EXPECT_EQ(*rep.ap75, rep.ap_per_threshold[5]);
    }
}

TEST(Evaluate, TwoThresholdArithmetic) {
    // One image: gt a; predictions reach IoU 0.6 only, so AP is 1 at 0.5 and
    // 0 at 0.75; map is their mean.
    const BinaryMask g = rect(6, 6, 0, 0, 5, 2), p = rect(6, 6, 0, 0, 3, 2);
    const APReport r = evaluate({{pred(p, 0.9)}}, {{gt(g)}}, {0.5, 0.75});
    EXPECT_EQ(r.ap_per_threshold, (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(r.map, 0.5);
}

TEST(Evaluate, CategoryAverage) {
    // Category 1 perfect, category 2 missed: AP = 0.5 per threshold.
    const BinaryMask a = rect(6, 6, 0, 0, 2, 2), b = rect(6, 6, 3, 3, 6, 6);
    const APReport r = evaluate({{pred(a, 0.9, 1)}}, {{gt(a, 1), gt(b, 2)}});
    EXPECT_EQ(r.map, 0.5);
}

TEST(Evaluate, RejectsBadInput) {
    const BinaryMask a = rect(6, 6, 0, 0, 2, 2);
    const ImageSet p{{pred(a, 0.9)}}, g{{gt(a)}};
    EXPECT_THROW(evaluate(p, g, {}), std::invalid_argument);
    EXPECT_THROW(evaluate(p, g, {0.75, 0.5}), std::invalid_argument);
    EXPECT_THROW(evaluate(p, g, {0.0}), std::invalid_argument);
    EXPECT_THROW(evaluate(p, {}), std::invalid_argument);
    EXPECT_THROW(evaluate({{}}, {{}}), std::invalid_argument);
}

TEST(Evaluate, DefaultThresholds) {
    const auto t = default_thresholds();
    ASSERT_EQ(t.size(), 10u);
    EXPECT_EQ(t.front(), 0.5);
    EXPECT_EQ(t.back(), 0.95);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_GT(t[i], t[i - 1]);
}
