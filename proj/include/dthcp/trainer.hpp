#pragma once

#include <span>
#include <string>
#include <vector>

#include "dthcp/config.hpp"
#include "dthcp/evalmetrics.hpp"
#include "dthcp/hgps.hpp"
#include "dthcp/midn.hpp"
#include "dthcp/synth.hpp"

namespace dthcp {

/// Per-image state that does not change during training.
struct PreparedImage {
    std::string id;
    std::vector<int> image_labels;
    Vector box_label;
    ClusterSet clusters;
    /// Proposals followed by the cluster set's synthetic boxes.
    std::vector<Box> boxes;
    Matrix features;
    AssignedLabels base_labels;
};

PreparedImage prepare_image(const SceneBundle& bundle, const RunConfig& cfg);

/// Labels for the base stage and each refinement stage, derived from a forward
/// pass and held constant for the backward pass.
Supervision build_supervision(const PreparedImage& img, const ForwardPass& pass, const RunConfig& cfg);

struct MapPoint {
    long long iteration = 0;
    int epoch = 0;
    double map = 0.0;
};

struct TrainResult {
    DetectorModel model;
    /// Mean total loss of each iteration's batch.
    std::vector<double> loss_curve;
    std::vector<MapPoint> map_curve;
};

/// Trains on `train_set` and measures mAP on `eval_set` (before the first
/// iteration, then every eval_every iterations or once per epoch).
/// Deterministic in cfg, including cfg.seed.
TrainResult train(std::span<const SceneBundle> train_set, std::span<const SceneBundle> eval_set, const RunConfig& cfg);

/// Detections on the raw proposals: the mean of the refinement heads' scores,
/// per-class NMS.
std::vector<Detection> detect(const DetectorModel& model, const SceneBundle& bundle, int num_classes, double nms_iou);

double evaluate_map(const DetectorModel& model, std::span<const SceneBundle> scenes, int num_classes, double nms_iou);

}  // namespace dthcp
