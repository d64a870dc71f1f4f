#include <gtest/gtest.h>

#include "dthcp/error.hpp"
#include "dthcp/heatmap.hpp"
#include "dthcp/oracles.hpp"
#include "dthcp/synth.hpp"

using namespace dthcp;

namespace {

std::size_t oracle_regions(const Heatmap& h, double tau) {
    BinaryMask m(h.rows(), h.cols());
    for (int r = 0; r < h.rows(); ++r) {
        for (int c = 0; c < h.cols(); ++c) m.set(r, c, h.at(r, c) >= tau);
    }
    return oracle::connected_components(m, Connectivity::Eight).size();
}

}  // namespace

TEST(SynthConfig, Validation) {
    SynthConfig c;
    EXPECT_NO_THROW(c.validate());
    c.max_instance_size = 200;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = {};
    c.falloff_ratio = 0.9;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = {};
    c.class_presence = 1.5;
    EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(RenderHeatmap, SingleInstanceGivesOneRegionPerThreshold) {
    SynthConfig c;
    c.noise_amplitude = 0.0;
    const std::vector<Instance> inst{{0, Box(30, 20, 50, 44)}};
    const Heatmap h = render_heatmap(c, inst, 0, {96, 96}, 1);
    EXPECT_EQ(oracle_regions(h, 0.8), 1u);
    EXPECT_EQ(oracle_regions(h, 0.3), 1u);
    const auto high = threshold_regions(h, 0.8, ThresholdLevel::High);
    EXPECT_TRUE(contains(inst[0].box, high[0].box));
    const auto low = threshold_regions(h, 0.3, ThresholdLevel::Low);
    EXPECT_TRUE(contains(low[0].box, inst[0].box));
}

TEST(RenderHeatmap, CloseSameClassPairSharesLowRegion) {
    SynthConfig c;
    c.noise_amplitude = 0.0;
    // 4 px apart; each low region spreads 0.2 of the half width (3 px) past its box
    const std::vector<Instance> inst{{1, Box(10, 10, 40, 40)}, {1, Box(44, 10, 74, 40)}};
    const Heatmap h = render_heatmap(c, inst, 1, {96, 96}, 1);
    EXPECT_EQ(oracle_regions(h, 0.3), 1u);
    EXPECT_EQ(oracle_regions(h, 0.8), 2u);
    // other classes see nothing
    const Heatmap none = render_heatmap(c, inst, 0, {96, 96}, 1);
    EXPECT_EQ(none.grid().max(), 0.0);
}

TEST(GenerateScene, DeterministicAndConsistent) {
    SynthConfig c;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto a = generate_scene(c, seed, "x");
        const auto b = generate_scene(c, seed, "x");
        ASSERT_EQ(a.proposals, b.proposals);
        ASSERT_EQ(a.features, b.features);
        ASSERT_EQ(a.heatmaps.size(), b.heatmaps.size());
        for (std::size_t i = 0; i < a.heatmaps.size(); ++i) ASSERT_EQ(a.heatmaps[i].grid(), b.heatmaps[i].grid());

        EXPECT_LE(a.proposals.size(), static_cast<std::size_t>(c.max_proposals));
        EXPECT_EQ(a.features.rows(), static_cast<Eigen::Index>(a.proposals.size()));
        EXPECT_EQ(a.features.cols(), c.feature_dim);
        ASSERT_EQ(a.image_labels.size(), static_cast<std::size_t>(c.num_classes));
        for (int k = 0; k < c.num_classes; ++k) {
            const bool has = std::any_of(a.scene.instances.begin(), a.scene.instances.end(),
                                         [&](const Instance& i) { return i.class_id == k; });
            EXPECT_EQ(a.image_labels[static_cast<std::size_t>(k)], has ? 1 : 0);
        }
        std::size_t present = 0;
        for (int y : a.image_labels) present += y;
        EXPECT_EQ(a.heatmaps.size(), present);
        EXPECT_EQ(a.ground_truth.size(), a.scene.instances.size());
        for (const auto& p : a.proposals) EXPECT_TRUE(contains(Box(0, 0, 96, 96), p));
        for (const auto& [i, j] : a.scene.adjacent_pairs) {
            EXPECT_EQ(a.scene.instances[i].class_id, a.scene.instances[j].class_id);
        }
    }
    EXPECT_NE(generate_scene(c, 1, "x").proposals, generate_scene(c, 2, "x").proposals);
}

TEST(GenerateScene, NoInstancesGivesEmptyLabels) {
    SynthConfig c;
    c.class_presence = 0.0;
    const auto b = generate_scene(c, 3, "x");
    EXPECT_TRUE(b.scene.instances.empty());
    EXPECT_TRUE(b.ground_truth.empty());
    EXPECT_TRUE(b.heatmaps.empty());
    for (int y : b.image_labels) EXPECT_EQ(y, 0);
}

TEST(GenerateScene, TightBoxAmongProposals) {
    SynthConfig c;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto b = generate_scene(c, seed, "x");
        for (const auto& inst : b.scene.instances) {
            EXPECT_NE(std::find(b.proposals.begin(), b.proposals.end(), inst.box), b.proposals.end());
        }
    }
}

TEST(BoxFeatures, SameBoxSameRow) {
    SynthConfig c;
    const auto b = generate_scene(c, 9, "x");
    ASSERT_FALSE(b.proposals.empty());
    for (std::size_t i = 0; i < b.proposals.size(); ++i) {
        EXPECT_EQ(box_features(c, b.scene, b.proposals[i]), b.features.row(static_cast<Eigen::Index>(i)));
    }
}

TEST(PartBiasedScores, PartsOutrankWholeObjects) {
    SynthConfig c;
    Scene s;
    s.extent = {96, 96};
    s.instances = {{0, Box(20, 20, 40, 40)}};
    // core is (25, 25, 35, 35)
    const std::vector<Box> boxes{Box(20, 20, 40, 40), Box(26, 26, 30, 30), Box(60, 60, 70, 70)};
    const Matrix m = part_biased_scores(s, boxes, 2, c.core_ratio);
    EXPECT_NEAR(m(0, 0), 0.9, 1e-12);
    EXPECT_GT(m(1, 0), m(0, 0));
    EXPECT_EQ(m(2, 0), 0.0);
    EXPECT_EQ(m(0, 1), 0.0);
    EXPECT_NEAR(m(0, 2), 0.1, 1e-12);
}
