// Exercises the shared library through its C header only.

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "dthcp/dthcp.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dthcp_capi_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(CApi, ConfigLifecycle) {
    dthcp_config* cfg = nullptr;
    ASSERT_EQ(dthcp_config_create(&cfg), DTHCP_OK);
    EXPECT_EQ(dthcp_config_set(cfg, "tau_low", "0.25"), DTHCP_OK);
    char* v = nullptr;
    ASSERT_EQ(dthcp_config_get(cfg, "tau_low", &v), DTHCP_OK);
    EXPECT_STREQ(v, "0.25");
    dthcp_string_free(v);
    EXPECT_EQ(dthcp_config_set(cfg, "bogus", "1"), DTHCP_ERR_BAD_INPUT);
    EXPECT_NE(std::string(dthcp_last_error()).find("bogus"), std::string::npos);
    EXPECT_EQ(dthcp_config_load(cfg, "/nonexistent/cfg.txt"), DTHCP_ERR_BAD_INPUT);
    EXPECT_EQ(dthcp_config_create(nullptr), DTHCP_ERR_BAD_INPUT);
    dthcp_config_destroy(cfg);
}

TEST(CApi, IouAndErrors) {
    const double a[4] = {0, 0, 2, 2}, b[4] = {1, 0, 3, 2}, bad[4] = {0, 0, 0, 1};
    double out = 0;
    ASSERT_EQ(dthcp_iou(a, b, &out), DTHCP_OK);
    EXPECT_DOUBLE_EQ(out, 1.0 / 3.0);
    EXPECT_EQ(dthcp_iou(a, bad, &out), DTHCP_ERR_BAD_INPUT);
    EXPECT_EQ(dthcp_iou(a, b, nullptr), DTHCP_ERR_BAD_INPUT);
}

TEST(CApi, ClustersFromHeatmaps) {
    dthcp_config* cfg = nullptr;
    ASSERT_EQ(dthcp_config_create(&cfg), DTHCP_OK);
    std::vector<double> v(100, 0.0);
    for (int r = 2; r < 8; ++r) {
        for (int c = 2; c < 8; ++c) v[r * 10 + c] = 0.5;
    }
    v[44] = v[45] = v[54] = v[55] = 1.0;
    dthcp_heatmap* h = nullptr;
    ASSERT_EQ(dthcp_heatmap_create(0, 10, 10, v.data(), &h), DTHCP_OK);
    const int labels[1] = {1};
    const double props[8] = {4, 4, 6, 6, 0, 0, 10, 10};
    dthcp_cluster_set* set = nullptr;
    const dthcp_heatmap* maps[1] = {h};
    ASSERT_EQ(dthcp_clusters_build(cfg, maps, 1, labels, 1, props, 2, 10, 10, &set), DTHCP_OK);
    ASSERT_EQ(dthcp_clusters_count(set), 1u);
    int cls = -1;
    std::size_t n = 0;
    ASSERT_EQ(dthcp_clusters_info(set, 0, &cls, &n), DTHCP_OK);
    EXPECT_EQ(cls, 0);
    EXPECT_EQ(n, 2u);
    dthcp_member_kind kind;
    std::size_t row = 0;
    double box[4];
    ASSERT_EQ(dthcp_clusters_member(set, 0, 0, &kind, &row, box), DTHCP_OK);
    EXPECT_EQ(kind, DTHCP_MEMBER_LOW_BOX);
    EXPECT_EQ(row, 2u);
    EXPECT_EQ(box[0], 2.0);
    EXPECT_EQ(dthcp_clusters_member(set, 0, 5, &kind, &row, box), DTHCP_ERR_BAD_INPUT);
    char* json = nullptr;
    ASSERT_EQ(dthcp_clusters_to_json(set, &json), DTHCP_OK);
    EXPECT_NE(std::string(json).find("low_box"), std::string::npos);
    dthcp_string_free(json);
    dthcp_clusters_destroy(set);

    // heatmap shape must match the image
    EXPECT_EQ(dthcp_clusters_build(cfg, maps, 1, labels, 1, props, 2, 12, 10, &set), DTHCP_ERR_BAD_INPUT);
    dthcp_heatmap_destroy(h);
    const double out_of_range[1] = {2.0};
    EXPECT_EQ(dthcp_heatmap_create(0, 1, 1, out_of_range, &h), DTHCP_ERR_BAD_INPUT);
    dthcp_config_destroy(cfg);
}

TEST(CApi, SceneAndCommands) {
    const auto dir = scratch("cmds");
    dthcp_config* cfg = nullptr;
    ASSERT_EQ(dthcp_config_create(&cfg), DTHCP_OK);
    ASSERT_EQ(dthcp_config_set(cfg, "scene_count", "3"), DTHCP_OK);
    ASSERT_EQ(dthcp_config_set(cfg, "epochs", "2"), DTHCP_OK);

    dthcp_scene* scene = nullptr;
    ASSERT_EQ(dthcp_scene_generate(cfg, 4, &scene), DTHCP_OK);
    EXPECT_GT(dthcp_scene_num_proposals(scene), 0u);
    dthcp_cluster_set* set = nullptr;
    ASSERT_EQ(dthcp_clusters_from_scene(cfg, scene, &set), DTHCP_OK);
    EXPECT_EQ(dthcp_clusters_count(set), dthcp_scene_num_instances(scene));
    dthcp_clusters_destroy(set);
    dthcp_scene_destroy(scene);

    const std::string scenes = (dir / "scenes").string();
    ASSERT_EQ(dthcp_run_synth(cfg, scenes.c_str()), DTHCP_OK) << dthcp_last_error();
    EXPECT_TRUE(fs::exists(dir / "scenes" / "scene_0002" / "scene.json"));

    const std::string clusters = (dir / "c.json").string();
    const std::string bundle = (dir / "scenes" / "scene_0001").string();
    dthcp_cluster_args args{bundle.c_str(), nullptr, 0, nullptr, nullptr, clusters.c_str(), nullptr, 0};
    EXPECT_EQ(dthcp_run_cluster(cfg, &args), DTHCP_OK) << dthcp_last_error();

    const char* missing[1] = {"/nonexistent/heatmap.txt"};
    const std::string labels = (dir / "labels.txt").string();
    std::ofstream(labels) << "1,0,0,0\n";
    dthcp_cluster_args bad{nullptr, missing, 1, nullptr, labels.c_str(), clusters.c_str(), nullptr, 0};
    EXPECT_EQ(dthcp_run_cluster(cfg, &bad), DTHCP_ERR_BAD_INPUT);

    const std::string out = (dir / "train").string();
    ASSERT_EQ(dthcp_run_train(cfg, scenes.c_str(), nullptr, out.c_str()), DTHCP_OK) << dthcp_last_error();
    const std::string dets = (dir / "train" / "detections.csv").string();
    const std::string gts = (dir / "scenes" / "ground_truth.csv").string();
    const std::string metrics = (dir / "m.json").string();
    EXPECT_EQ(dthcp_run_eval(cfg, dets.c_str(), gts.c_str(), nullptr, metrics.c_str()), DTHCP_OK);
    EXPECT_EQ(dthcp_run_eval(cfg, "/nonexistent.csv", gts.c_str(), nullptr, metrics.c_str()), DTHCP_ERR_BAD_INPUT);
    dthcp_config_destroy(cfg);
}
