#pragma once

#include <string>
#include <vector>

#include "dthcp/config.hpp"
#include "dthcp/synth.hpp"

namespace dthcp::cmd {

/// Writes cfg.scene_count bundles `scene_0000`, ... under out_dir, plus
/// manifest.json and ground_truth.csv. Scene i uses seed mix_seed(cfg.seed, i).
void run_synth(const RunConfig& cfg, const std::string& out_dir);

std::vector<SceneBundle> load_scene_dir(const std::string& dir);

struct ClusterInput {
    /// Either a bundle directory...
    std::string bundle_dir;
    /// ...or heatmap files, one per present class in ascending class order,
    /// plus a proposals CSV and a labels file.
    std::vector<std::string> heatmaps;
    std::string proposals;
    std::string labels;
    std::string out;
    /// Optional PPM, one panel per present class stacked vertically.
    std::string overlay;
    int overlay_zoom = 4;
};

void run_cluster(const RunConfig& cfg, const ClusterInput& in);

struct TrainInput {
    std::string scene_dir;
    /// Scenes for the mAP curve; defaults to the training scenes.
    std::string eval_dir;
    std::string out_dir;
};

/// Writes checkpoint.json, loss_curve.csv, map_curve.csv, detections.csv and
/// config.json.
void run_train(const RunConfig& cfg, const TrainInput& in);

struct EvalInput {
    std::string detections;
    std::string ground_truth;
    /// Optional pseudo-GT CSV in ground-truth format.
    std::string pseudo_gt;
    std::string out;
};

void run_eval(const RunConfig& cfg, const EvalInput& in);

}  // namespace dthcp::cmd
