#include <gtest/gtest.h>

#include <set>

#include "dthcp/error.hpp"
#include "dthcp/hgps.hpp"
#include "dthcp/oracles.hpp"
#include "dthcp/rng.hpp"
#include "dthcp/synth.hpp"

using namespace dthcp;

namespace {

Heatmap fill(int rows, int cols, std::vector<std::tuple<int, int, int, int, double>> rects, int cls = 0) {
    Grid g(rows, cols, 0.0);
    for (const auto& [r0, r1, c0, c1, v] : rects) {
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) g.at(r, c) = v;
        }
    }
    return Heatmap(cls, g);
}

std::size_t members_of_kind(const Cluster& c, MemberKind k) {
    return static_cast<std::size_t>(
        std::count_if(c.members.begin(), c.members.end(), [&](const ClusterMember& m) { return m.kind == k; }));
}

}  // namespace

TEST(HgpsConfig, Validation) {
    HgpsConfig c;
    EXPECT_NO_THROW(c.validate());
    c.tau_low = 0.9;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = {};
    c.scale = 0.5;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = {};
    c.tau_iou2 = 0.6;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = {};
    c.stages = 0;
    EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(BuildClusters, LowRegionWithoutHighIsSingleton) {
    const std::vector<Heatmap> maps{fill(10, 10, {{2, 4, 2, 4, 0.5}, {0, 0, 9, 9, 1.0}})};
    const std::vector<int> labels{1};
    const std::vector<Box> props{Box(2, 2, 5, 5)};
    const ClusterSet cs = build_clusters(maps, labels, props, {10, 10}, {});
    // the (0, 9) pixel is its own low+high pair and comes first in row-major
    // order; the block at rows 2..4 has no high region
    ASSERT_EQ(cs.clusters().size(), 2u);
    const Cluster& lone = cs.clusters()[1];
    EXPECT_FALSE(lone.high_region.has_value());
    ASSERT_EQ(lone.members.size(), 1u);
    EXPECT_EQ(lone.members[0].kind, MemberKind::LowBox);
    EXPECT_EQ(lone.members[0].box, Box(2, 2, 5, 5));
    EXPECT_EQ(lone.members[0].row, 2u);
}

TEST(BuildClusters, SingleHighTakesProposalsBetween) {
    // low box (2,2,8,8), high box (4,4,6,6), scaled low (1.4,1.4,8.6,8.6)
    const std::vector<Heatmap> maps{fill(10, 10, {{2, 7, 2, 7, 0.5}, {4, 5, 4, 5, 1.0}})};
    const std::vector<int> labels{1};
    const std::vector<Box> props{Box(4, 4, 6, 6), Box(3, 3, 8, 8), Box(1, 1, 9, 9), Box(4.5, 4, 6, 6),
                                 Box(1.5, 1.5, 8.5, 8.5)};
    const ClusterSet cs = build_clusters(maps, labels, props, {10, 10}, {});
    ASSERT_EQ(cs.clusters().size(), 1u);
    const auto& m = cs.clusters()[0].members;
    ASSERT_EQ(m.size(), 4u);
    EXPECT_EQ(m[0].kind, MemberKind::LowBox);
    EXPECT_EQ(m[0].row, 5u);
    EXPECT_EQ(m[1].row, 0u);
    EXPECT_EQ(m[2].row, 1u);
    EXPECT_EQ(m[3].row, 4u);
    EXPECT_EQ(cs.num_rows(), 6u);
}

TEST(BuildClusters, TwoHighsShareLowWithDedup) {
    // one low region holding two 3x3 high blobs; A at cols 8..10, B at cols 20..22
    const std::vector<Heatmap> maps{fill(32, 32, {{8, 20, 4, 27, 0.5}, {12, 14, 8, 10, 1.0}, {12, 14, 20, 22, 1.0}})};
    const std::vector<int> labels{1};
    const Box tight_a(8, 12, 11, 15), tight_b(20, 12, 23, 15), giant(7, 11, 24, 16);
    const std::vector<Box> props{tight_a, tight_b, giant};
    const ClusterSet cs = build_clusters(maps, labels, props, {32, 32}, {});
    ASSERT_EQ(cs.clusters().size(), 2u);
    const Cluster& a = cs.clusters()[0];
    const Cluster& b = cs.clusters()[1];
    EXPECT_EQ(a.members[0].kind, MemberKind::ScaledHighBox);
    EXPECT_EQ(b.members[0].kind, MemberKind::ScaledHighBox);
    auto has = [](const Cluster& c, std::size_t row) {
        return std::any_of(c.members.begin(), c.members.end(),
                           [&](const ClusterMember& m) { return m.kind == MemberKind::Proposal && m.row == row; });
    };
    EXPECT_TRUE(has(a, 0));
    EXPECT_FALSE(has(a, 1));
    EXPECT_TRUE(has(b, 1));
    EXPECT_FALSE(has(b, 0));
    // the giant box qualifies for both and is kept by exactly one
    EXPECT_NE(has(a, 2), has(b, 2));
    EXPECT_EQ(cs, oracle::cluster_enumeration(maps, labels, props, {32, 32}, {}));
}

TEST(BuildClusters, AbsentClassesAndErrors) {
    const std::vector<Heatmap> maps{fill(8, 8, {{1, 3, 1, 3, 1.0}})};
    const std::vector<Box> props{Box(0, 0, 4, 4)};
    EXPECT_TRUE(build_clusters(maps, std::vector<int>{0}, props, {8, 8}, {}).empty());
    EXPECT_TRUE(build_clusters({}, std::vector<int>{}, props, {8, 8}, {}).empty());
    EXPECT_THROW(build_clusters(maps, std::vector<int>{0, 1}, props, {8, 8}, {}), InvalidInput);
    EXPECT_THROW(build_clusters(maps, std::vector<int>{1}, props, {9, 8}, {}), InvalidInput);
}

TEST(BuildClusters, EmptyProposalsGiveSyntheticOnly) {
    const std::vector<Heatmap> maps{fill(16, 16, {{1, 12, 1, 14, 0.5}, {3, 5, 3, 5, 1.0}, {3, 5, 10, 12, 1.0}})};
    const ClusterSet cs = build_clusters(maps, std::vector<int>{1}, {}, {16, 16}, {});
    ASSERT_EQ(cs.clusters().size(), 2u);
    for (const auto& c : cs.clusters()) EXPECT_EQ(c.members.size(), 1u);
}

class SyntheticClusters : public ::testing::TestWithParam<int> {};

TEST_P(SyntheticClusters, StructuralInvariants) {
    SynthConfig sc;
    sc.pair_probability = 0.6;
    const HgpsConfig cfg;
    const auto bundle = generate_scene(sc, static_cast<std::uint64_t>(GetParam()), "s");
    const Extent ext = bundle.scene.extent;
    const ClusterSet cs = build_clusters(bundle.heatmaps, bundle.image_labels, bundle.proposals, ext, cfg);
    ASSERT_EQ(cs, oracle::cluster_enumeration(bundle.heatmaps, bundle.image_labels, bundle.proposals, ext, cfg));

    std::set<std::pair<int, std::size_t>> proposal_rows;
    for (const auto& c : cs.clusters()) {
        ASSERT_FALSE(c.members.empty());
        EXPECT_EQ(members_of_kind(c, MemberKind::LowBox) + members_of_kind(c, MemberKind::ScaledHighBox), 1u);
        EXPECT_NE(c.members[0].kind, MemberKind::Proposal);
        const ClassThresholds* t = nullptr;
        for (const auto& th : cs.thresholds()) {
            if (th.class_id == c.class_id) t = &th;
        }
        ASSERT_NE(t, nullptr);
        const Box low = t->low_boxes.at(c.low_region);
        const Box scaled_low = scale_box(low, cfg.scale, ext);
        if (c.high_region) {
            const Box high = t->high_boxes.at(*c.high_region);
            for (const auto& m : c.members) EXPECT_TRUE(between(m.box, high, scaled_low));
        }
        for (const auto& m : c.members) {
            if (m.kind == MemberKind::Proposal) {
                // dedup: a proposal belongs to at most one cluster per class
                EXPECT_TRUE(proposal_rows.insert({c.class_id, m.row}).second);
            }
        }
    }
    // each instance's tight box sits in exactly one cluster, of its own class
    for (const auto& inst : bundle.scene.instances) {
        int found = 0;
        for (const auto& c : cs.clusters()) {
            for (const auto& m : c.members) {
                if (m.kind == MemberKind::Proposal && m.box == inst.box) found += (c.class_id == inst.class_id);
            }
        }
        EXPECT_EQ(found, 1) << "instance of class " << inst.class_id;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SyntheticClusters, ::testing::Range(0, 40));

TEST(SyntheticClusters, OneClusterPerInstance) {
    SynthConfig sc;
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        const auto b = generate_scene(sc, seed, "s");
        const ClusterSet cs = build_clusters(b.heatmaps, b.image_labels, b.proposals, b.scene.extent, {});
        for (int c = 0; c < sc.num_classes; ++c) {
            const auto n = std::count_if(b.scene.instances.begin(), b.scene.instances.end(),
                                         [&](const Instance& i) { return i.class_id == c; });
            EXPECT_EQ(cs.count_for_class(c), static_cast<std::size_t>(n)) << "seed " << seed << " class " << c;
        }
    }
}

namespace {

ClusterSet one_cluster(std::size_t n_members) {
    Cluster c{0, 0, 0, {}};
    c.members.push_back({MemberKind::LowBox, n_members - 1, Box(0, 0, 10, 10)});
    for (std::size_t i = 0; i + 1 < n_members; ++i) {
        c.members.push_back({MemberKind::Proposal, i, Box(0, 0, 5.0 + static_cast<double>(i), 5)});
    }
    return ClusterSet(n_members - 1, {c}, {});
}

}  // namespace

TEST(SelectIr, Fixtures) {
    HgpsConfig cfg;
    const ClusterSet single = one_cluster(1);
    Matrix s = Matrix::Constant(1, 2, 0.3);
    auto out = select_pseudo_gt_ir(single, s, s, 1, cfg);
    ASSERT_EQ(out.entries.size(), 1u);
    EXPECT_EQ(out.entries[0].row, 0u);

    // members rows: synthetic 2, proposals 0, 1; scores in member order (0.1, 0.7, 0.3)
    const ClusterSet three = one_cluster(3);
    Matrix m(3, 2);
    m << 0.7, 0.3, 0.3, 0.7, 0.1, 0.9;
    out = select_pseudo_gt_ir(three, m, m, 2, cfg);
    ASSERT_EQ(out.entries.size(), 1u);
    EXPECT_EQ(out.entries[0].row, 0u);
    EXPECT_DOUBLE_EQ(out.entries[0].weight, 0.7);
    EXPECT_EQ(out.stage, 2);

    // argmax over one source, weight from the other
    Matrix w = Matrix::Constant(3, 2, 0.25);
    out = select_pseudo_gt_ir(three, m, w, 1, cfg);
    EXPECT_DOUBLE_EQ(out.entries[0].weight, 0.25);

    EXPECT_THROW(select_pseudo_gt_ir(three, m, m, 0, cfg), InvalidInput);
    EXPECT_THROW(select_pseudo_gt_ir(three, m, m, 4, cfg), InvalidInput);
    EXPECT_THROW(select_pseudo_gt_ir(three, m.topRows(2), m.topRows(2), 1, cfg), InvalidInput);
}

TEST(SelectIr, TiesGoToEarlierMember) {
    const ClusterSet three = one_cluster(3);
    const Matrix m = Matrix::Constant(3, 2, 0.5);
    EXPECT_EQ(select_pseudo_gt_ir(three, m, m, 1, {}).entries[0].row, 2u);
}

TEST(SelectIr, ColumnScalingKeepsArgmaxAndDistinctSelections) {
    SplitMix64 g(31);
    SynthConfig sc;
    sc.pair_probability = 1.0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto b = generate_scene(sc, seed, "s");
        const ClusterSet cs = build_clusters(b.heatmaps, b.image_labels, b.proposals, b.scene.extent, {});
        Matrix s(static_cast<Eigen::Index>(cs.num_rows()), sc.num_classes + 1);
        for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = g.uniform();
        const auto base = select_pseudo_gt_ir(cs, s, s, 1, {});
        Matrix scaled = s;
        for (Eigen::Index c = 0; c < s.cols(); ++c) scaled.col(c) *= g.uniform(0.1, 10.0);
        const auto again = select_pseudo_gt_ir(cs, scaled, scaled, 1, {});
        ASSERT_EQ(base.entries.size(), again.entries.size());
        std::set<std::pair<int, std::size_t>> rows;
        for (std::size_t i = 0; i < base.entries.size(); ++i) {
            EXPECT_EQ(base.entries[i].row, again.entries[i].row);
            EXPECT_TRUE(rows.insert({base.entries[i].class_id, base.entries[i].row}).second);
        }
    }
}

TEST(SelectWsbdn, EveryMemberWeightOne) {
    EXPECT_TRUE(select_pseudo_gt_wsbdn(ClusterSet()).entries.empty());
    const auto out = select_pseudo_gt_wsbdn(one_cluster(4));
    ASSERT_EQ(out.entries.size(), 4u);
    for (const auto& e : out.entries) EXPECT_EQ(e.weight, 1.0);
    EXPECT_EQ(out.stage, 0);

    // classes with cluster sizes (2) and (3, 1)
    std::vector<Cluster> cl;
    cl.push_back({0, 0, 0, {{MemberKind::LowBox, 3, Box(0, 0, 1, 1)}, {MemberKind::Proposal, 0, Box(0, 0, 1, 1)}}});
    cl.push_back({1, 0, 0,
                  {{MemberKind::ScaledHighBox, 4, Box(0, 0, 1, 1)},
                   {MemberKind::Proposal, 1, Box(0, 0, 1, 1)},
                   {MemberKind::Proposal, 2, Box(0, 0, 1, 1)}}});
    cl.push_back({1, 0, 1, {{MemberKind::ScaledHighBox, 5, Box(0, 0, 1, 1)}}});
    EXPECT_EQ(select_pseudo_gt_wsbdn(ClusterSet(3, cl, {})).entries.size(), 6u);
}

TEST(AssignLabels, Fixtures) {
    PseudoGtSet gts{1, {{Box(0, 0, 10, 10), 0.9, 3, 0}}};
    const std::vector<Box> boxes{Box(0, 0, 10, 10), Box(0, 0, 10, 3), Box(20, 20, 30, 30), Box(0, 0, 10, 0.5)};
    const auto a = assign_labels(boxes, gts, {}, 4);
    EXPECT_EQ(a.labels[0], 3);
    EXPECT_DOUBLE_EQ(a.weights[0], 0.9);
    EXPECT_DOUBLE_EQ(a.best_iou[0], 1.0);
    EXPECT_EQ(a.labels[1], a.background());
    EXPECT_EQ(a.labels[2], AssignedLabels::kIgnored);
    EXPECT_EQ(a.weights[2], 0.0);
    EXPECT_EQ(a.labels[3], AssignedLabels::kIgnored);
    EXPECT_EQ(a.count(3) + a.count(a.background()) + a.count_ignored(), boxes.size());

    const auto none = assign_labels(boxes, PseudoGtSet{}, {}, 4);
    EXPECT_EQ(none.count_ignored(), boxes.size());
}

TEST(AssignLabels, BestMatchingGtWins) {
    PseudoGtSet gts{1, {{Box(0, 0, 10, 10), 0.4, 0, 0}, {Box(1, 0, 11, 10), 0.8, 1, 1}}};
    const auto a = assign_labels(std::vector<Box>{Box(1, 0, 11, 10)}, gts, {}, 2);
    EXPECT_EQ(a.labels[0], 1);
    EXPECT_DOUBLE_EQ(a.weights[0], 0.8);
}

TEST(Baselines, TopScoringAndThresholdBoxes) {
    const std::vector<Box> boxes{Box(0, 0, 1, 1), Box(0, 0, 2, 2), Box(0, 0, 3, 3)};
    Matrix s(3, 3);
    s << 0.2, 0.5, 0.3, 0.9, 0.1, 0.0, 0.9, 0.6, 0.0;
    const auto top = select_top_scoring(boxes, s, std::vector<int>{1, 1});
    ASSERT_EQ(top.entries.size(), 2u);
    EXPECT_EQ(top.entries[0].row, 1u);
    EXPECT_EQ(top.entries[1].row, 2u);

    const std::vector<Heatmap> maps{fill(10, 10, {{1, 2, 1, 2, 0.5}, {6, 8, 6, 8, 0.5}})};
    const auto thr = select_threshold_boxes(maps, std::vector<int>{1}, 0.3);
    ASSERT_EQ(thr.entries.size(), 2u);
    EXPECT_EQ(thr.entries[0].box, Box(1, 1, 3, 3));
    EXPECT_EQ(thr.entries[1].box, Box(6, 6, 9, 9));
}
