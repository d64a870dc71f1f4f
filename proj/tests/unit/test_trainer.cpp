#include <gtest/gtest.h>

#include "dthcp/rng.hpp"
#include "dthcp/trainer.hpp"

using namespace dthcp;

namespace {

std::vector<SceneBundle> scenes(const RunConfig& cfg, int n, std::uint64_t base) {
    std::vector<SceneBundle> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(generate_scene(cfg.synth, mix_seed(base, static_cast<std::uint64_t>(i)), "s" + std::to_string(i)));
    }
    return out;
}

}  // namespace

TEST(PrepareImage, AugmentedRowsCarryFeatures) {
    RunConfig cfg;
    for (const auto& b : scenes(cfg, 10, 3)) {
        const PreparedImage img = prepare_image(b, cfg);
        EXPECT_EQ(img.boxes.size(), img.clusters.num_rows());
        EXPECT_EQ(img.features.rows(), static_cast<Eigen::Index>(img.boxes.size()));
        EXPECT_EQ(img.features.topRows(b.features.rows()), b.features);
        EXPECT_EQ(img.base_labels.size(), img.boxes.size());
        for (std::size_t k = 0; k < img.clusters.synthetic_boxes().size(); ++k) {
            const auto row = static_cast<Eigen::Index>(b.proposals.size() + k);
            EXPECT_EQ(img.features.row(row), box_features(cfg.synth, b.scene, img.clusters.synthetic_boxes()[k]));
        }
    }
}

TEST(BuildSupervision, StageLabelsFollowPreviousScores) {
    RunConfig cfg;
    SplitMix64 g(71);
    const auto b = scenes(cfg, 4, 9);
    for (const auto& bundle : b) {
        const PreparedImage img = prepare_image(bundle, cfg);
        if (img.boxes.empty()) continue;
        const DetectorModel m = DetectorModel::xavier(cfg.synth.feature_dim, cfg.synth.num_classes + 1, 3, g);
        const ForwardPass pass = forward(m, img.features);
        const Supervision sup = build_supervision(img, pass, cfg);
        ASSERT_EQ(sup.stage_labels.size(), 4u);
        const auto k2 = select_pseudo_gt_ir(img.clusters, pass.refine[0], pass.refine[0], 2, cfg.hgps);
        const auto expect = assign_labels(img.boxes, k2, cfg.hgps, cfg.synth.num_classes);
        EXPECT_EQ(sup.stage_labels[2].labels, expect.labels);
        EXPECT_EQ(sup.stage_labels[2].weights, expect.weights);
    }
}

TEST(Train, DeterministicAndLearns) {
    RunConfig cfg;
    cfg.seed = 5;
    cfg.train.epochs = 15;
    cfg.train.lr = 0.1;
    const auto train_set = scenes(cfg, 24, 1);
    const auto a = train(train_set, train_set, cfg);
    const auto b = train(train_set, train_set, cfg);
    EXPECT_EQ(a.loss_curve, b.loss_curve);
    EXPECT_EQ(a.model.cls.weight, b.model.cls.weight);
    ASSERT_EQ(a.map_curve.size(), 16u);
    EXPECT_GT(a.map_curve.back().map, a.map_curve.front().map + 0.3);
    EXPECT_LT(a.loss_curve.back(), a.loss_curve.front());

    RunConfig threaded = cfg;
    threaded.train.threads = 3;
    EXPECT_EQ(train(train_set, train_set, threaded).loss_curve, a.loss_curve);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
    RunConfig cfg;
    cfg.train.epochs = 2;
    cfg.train.lr = 0.0;
    const auto s = scenes(cfg, 4, 2);
    RunConfig none = cfg;
    none.train.epochs = 0;
    const auto trained = train(s, {}, cfg);
    const auto init = train(s, {}, none);
    EXPECT_EQ(trained.model.cls.weight, init.model.cls.weight);
    EXPECT_EQ(trained.model.refine[2].bias, init.model.refine[2].bias);
    EXPECT_EQ(trained.model.step, 2);
}

TEST(Train, OneEpochOneScene) {
    RunConfig cfg;
    cfg.train.epochs = 1;
    const auto s = scenes(cfg, 1, 4);
    const auto r = train(s, s, cfg);
    EXPECT_EQ(r.loss_curve.size(), 1u);
    EXPECT_EQ(r.map_curve.size(), 2u);
}
