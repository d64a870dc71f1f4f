#include <gtest/gtest.h>

#include <algorithm>

#include "dthcp/evalmetrics.hpp"
#include "dthcp/oracles.hpp"
#include "generators.hpp"

using namespace dthcp;

namespace {

using Case = gen::ApCase;

// 11-point interpolation from first principles: for t in {0, .1, ..., 1}, the
// best precision among score prefixes whose recall reaches t.
double eleven_point_reference(const Case& c) {
    const auto sorted = sorted_class_detections(c.dets, 0);
    std::size_t npos = 0;
    for (const auto& gt : c.gts) npos += gt.class_id == 0;
    if (npos == 0) return 0.0;
    std::vector<double> prec, rec;
    for (std::size_t n = 1; n <= sorted.size(); ++n) {
        const std::vector<Detection> prefix(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
        const auto tp = match_detections(prefix, c.gts, 0, 0.5);
        const auto hits = static_cast<double>(std::count(tp.begin(), tp.end(), true));
        prec.push_back(hits / static_cast<double>(n));
        rec.push_back(hits / static_cast<double>(npos));
    }
    double ap = 0.0;
    for (int k = 0; k <= 10; ++k) {
        const double t = k / 10.0;
        double best = 0.0;
        for (std::size_t i = 0; i < prec.size(); ++i) {
            if (rec[i] >= t - 1e-12) best = std::max(best, prec[i]);
        }
        ap += best / 11.0;
    }
    return ap;
}

}  // namespace

TEST(AveragePrecision, Fixtures) {
    const std::vector<GroundTruth> one{{"a", 0, Box(0, 0, 10, 10)}};
    EXPECT_DOUBLE_EQ(average_precision(std::vector<Detection>{{"a", 0, Box(0, 0, 10, 10), 0.9}}, one, 0), 1.0);
    EXPECT_DOUBLE_EQ(average_precision(std::vector<Detection>{{"a", 0, Box(20, 20, 30, 30), 0.9}}, one, 0), 0.0);

    // 2 GTs; scores 0.9 TP, 0.8 FP, 0.7 TP: precision (1, 1/2, 2/3) at recall (1/2, 1/2, 1)
    const std::vector<GroundTruth> two{{"a", 0, Box(0, 0, 10, 10)}, {"a", 0, Box(20, 0, 30, 10)}};
    const std::vector<Detection> three{{"a", 0, Box(0, 0, 10, 10), 0.9},
                                       {"a", 0, Box(50, 50, 60, 60), 0.8},
                                       {"a", 0, Box(20, 0, 30, 10), 0.7}};
    EXPECT_NEAR(average_precision(three, two, 0), 5.0 / 6.0, 1e-12);
    EXPECT_NEAR(oracle::average_precision(three, two, 0), 5.0 / 6.0, 1e-12);

    EXPECT_EQ(average_precision(std::vector<Detection>{}, two, 0), 0.0);
    EXPECT_EQ(average_precision(three, std::vector<GroundTruth>{}, 0), 0.0);
}

TEST(AveragePrecision, DuplicateDetectionIsFalsePositive) {
    const std::vector<GroundTruth> one{{"a", 0, Box(0, 0, 10, 10)}};
    const std::vector<Detection> dup{{"a", 0, Box(0, 0, 10, 10), 0.9}, {"a", 0, Box(0, 0, 10, 10), 0.8}};
    const auto tp = match_detections(sorted_class_detections(dup, 0), one, 0, 0.5);
    EXPECT_EQ(tp, (std::vector<bool>{true, false}));
    // different image, same box: no match
    const std::vector<Detection> other{{"b", 0, Box(0, 0, 10, 10), 0.9}};
    EXPECT_EQ(average_precision(other, one, 0), 0.0);
}

TEST(AveragePrecision, MatchesOracleOnRandomCases) {
    SplitMix64 g(51);
    for (int i = 0; i < 2000; ++i) {
        const Case c = gen::ap_case(g, 6, 3);
        const double ap = average_precision(c.dets, c.gts, 0);
        EXPECT_NEAR(ap, oracle::average_precision(c.dets, c.gts, 0), 1e-12);
        EXPECT_GE(ap, 0.0);
        EXPECT_LE(ap, 1.0);
        EXPECT_NEAR(average_precision(c.dets, c.gts, 0, 0.5, ApInterpolation::ElevenPoint), eleven_point_reference(c),
                    1e-12);
    }
}

TEST(AveragePrecision, ZeroScoreFalsePositiveNeverHelps) {
    SplitMix64 g(52);
    for (int i = 0; i < 1000; ++i) {
        Case c = gen::ap_case(g, 6, 3);
        for (auto& d : c.dets) d.score = 0.1 + d.score;
        const double before = average_precision(c.dets, c.gts, 0);
        // an image without ground truth, so the detection is surely false
        c.dets.push_back({"empty", 0, gen::lattice_box(g, 6), 0.0});
        EXPECT_LE(average_precision(c.dets, c.gts, 0), before + 1e-15);
    }
}

TEST(MeanAp, OverClassesWithGroundTruth) {
    const std::vector<GroundTruth> gts{{"a", 0, Box(0, 0, 10, 10)},
                                       {"a", 1, Box(0, 0, 10, 10)},
                                       {"a", 1, Box(20, 0, 30, 10)}};
    const std::vector<Detection> dets{{"a", 0, Box(0, 0, 10, 10), 0.9},
                                      {"a", 1, Box(50, 50, 60, 60), 0.95},
                                      {"a", 1, Box(0, 0, 10, 10), 0.9}};
    const ApReport r = mean_ap(dets, gts, 3);
    ASSERT_EQ(r.per_class.size(), 3u);
    EXPECT_DOUBLE_EQ(*r.per_class[0], 1.0);
    // class 1: FP then TP, recall 1/2 at precision 1/2
    EXPECT_DOUBLE_EQ(*r.per_class[1], 0.25);
    EXPECT_FALSE(r.per_class[2].has_value());
    EXPECT_DOUBLE_EQ(r.mean, 0.625);

    const std::vector<Detection> perfect{{"a", 0, Box(0, 0, 10, 10), 0.9},
                                         {"a", 1, Box(0, 0, 10, 10), 0.8},
                                         {"a", 1, Box(20, 0, 30, 10), 0.7}};
    EXPECT_DOUBLE_EQ(mean_ap(perfect, gts, 2).mean, 1.0);

    // {1.0, 0.5}
    const std::vector<GroundTruth> g2{{"a", 0, Box(0, 0, 10, 10)}, {"a", 1, Box(0, 0, 10, 10)},
                                      {"a", 1, Box(20, 0, 30, 10)}};
    const std::vector<Detection> d2{{"a", 0, Box(0, 0, 10, 10), 0.9}, {"a", 1, Box(0, 0, 10, 10), 0.9}};
    EXPECT_DOUBLE_EQ(mean_ap(d2, g2, 2).mean, 0.75);
    EXPECT_EQ(mean_ap(std::vector<Detection>{}, g2, 2).mean, 0.0);
}

TEST(CorLoc, Fixtures) {
    const std::vector<GroundTruth> gts{{"a", 0, Box(0, 0, 10, 10)}, {"b", 0, Box(0, 0, 10, 10)}};
    const std::vector<Detection> hit_one{{"a", 0, Box(0, 0, 10, 10), 0.2}, {"b", 0, Box(30, 30, 40, 40), 0.9}};
    EXPECT_DOUBLE_EQ(corloc(hit_one, gts, 1).mean, 0.5);
    const std::vector<Detection> all{{"a", 0, Box(0, 0, 10, 10), 0.2}, {"b", 0, Box(0, 0, 10, 10), 0.9}};
    EXPECT_DOUBLE_EQ(corloc(all, gts, 1).mean, 1.0);
    const std::vector<Detection> none{{"a", 0, Box(30, 30, 40, 40), 0.2}, {"b", 0, Box(30, 30, 40, 40), 0.9}};
    EXPECT_DOUBLE_EQ(corloc(none, gts, 1).mean, 0.0);
}

TEST(CorLoc, ScoreInvariantAndTop1) {
    SplitMix64 g(53);
    for (int i = 0; i < 300; ++i) {
        Case c = gen::ap_case(g, 6, 3);
        auto top = top1_per_image_class(c.dets);
        const double base = corloc(top, c.gts, 2).mean;
        for (auto& d : top) d.score = g.uniform();
        EXPECT_EQ(corloc(top, c.gts, 2).mean, base);
    }
    const std::vector<Detection> d{{"a", 0, Box(0, 0, 1, 1), 0.5}, {"a", 0, Box(0, 0, 2, 2), 0.5},
                                   {"a", 0, Box(0, 0, 3, 3), 0.4}, {"a", 1, Box(0, 0, 4, 4), 0.1}};
    const auto top = top1_per_image_class(d);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].box, Box(0, 0, 1, 1));
}

TEST(PseudoGtQuality, Fixtures) {
    const std::vector<GroundTruth> truth{{"a", 0, Box(0, 0, 10, 10)}, {"a", 0, Box(12, 0, 22, 10)}};
    const std::vector<PseudoGt> perfect{{Box(0, 0, 10, 10), 1, 0, 0}, {Box(12, 0, 22, 10), 1, 0, 0}};
    auto q = pseudo_gt_quality(perfect, truth, 1).total();
    EXPECT_DOUBLE_EQ(q.recall(), 1.0);
    EXPECT_EQ(q.merges, 0u);
    EXPECT_EQ(q.part_only, 0u);

    // spans both: IoU 100/220 with each
    const std::vector<PseudoGt> merged{{Box(0, 0, 22, 10), 1, 0, 0}};
    q = pseudo_gt_quality(merged, truth, 1).total();
    EXPECT_EQ(q.merges, 1u);
    EXPECT_DOUBLE_EQ(q.recall(), 0.0);

    const std::vector<PseudoGt> part{{Box(3, 3, 6, 6), 1, 0, 0}};
    q = pseudo_gt_quality(part, truth, 1).total();
    EXPECT_EQ(q.part_only, 1u);
    EXPECT_EQ(q.merges, 0u);

    q = pseudo_gt_quality(std::vector<PseudoGt>{}, truth, 1).total();
    EXPECT_EQ(q.recall(), 0.0);
    EXPECT_EQ(q.instances, 2u);

    // wrong class never matches
    const std::vector<PseudoGt> wrong{{Box(0, 0, 10, 10), 1, 1, 0}};
    EXPECT_EQ(pseudo_gt_quality(wrong, truth, 2).total().matched, 0u);
}
