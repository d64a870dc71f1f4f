#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dthcp/geometry.hpp"
#include "dthcp/hgps.hpp"

namespace dthcp {

struct Detection {
    std::string image_id;
    int class_id = 0;
    Box box{0, 0, 1, 1};
    double score = 0.0;
};

struct GroundTruth {
    std::string image_id;
    int class_id = 0;
    Box box{0, 0, 1, 1};
};

enum class ApInterpolation { AllPoints, ElevenPoint };

/// VOC-style matching: detections of `class_id` in descending score order
/// (ties keep input order); each takes its best-IoU ground truth in the same
/// image, a true positive iff IoU >= iou_threshold and that truth is unclaimed.
/// Returns the true-positive flag for each detection in sorted order.
std::vector<bool> match_detections(std::span<const Detection> sorted_dets, std::span<const GroundTruth> gts,
                                   int class_id, double iou_threshold);

/// Detections of one class sorted by descending score, stable.
std::vector<Detection> sorted_class_detections(std::span<const Detection> dets, int class_id);

/// Area under the PR curve; 0 when the class has no ground truth.
double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts, int class_id,
                         double iou_threshold = 0.5, ApInterpolation interp = ApInterpolation::AllPoints);

struct ApReport {
    /// Empty entries for classes without ground truth.
    std::vector<std::optional<double>> per_class;
    double mean = 0.0;
};

/// Mean of per-class AP over classes with at least one ground truth.
ApReport mean_ap(std::span<const Detection> dets, std::span<const GroundTruth> gts, int num_classes,
                 double iou_threshold = 0.5, ApInterpolation interp = ApInterpolation::AllPoints);

/// Highest-scoring detection per (image, class); ties keep the earlier one.
std::vector<Detection> top1_per_image_class(std::span<const Detection> dets);

struct CorLocReport {
    std::vector<std::optional<double>> per_class;
    double mean = 0.0;
};

/// Per class, the fraction of positive images whose candidate box overlaps some
/// ground truth of that class at IoU >= iou_threshold. Only geometry matters.
CorLocReport corloc(std::span<const Detection> top1, std::span<const GroundTruth> gts, int num_classes,
                    double iou_threshold = 0.5);

struct PseudoGtClassQuality {
    int class_id = 0;
    std::size_t instances = 0;
    std::size_t matched = 0;
    double best_iou_sum = 0.0;
    std::size_t pseudo_boxes = 0;
    std::size_t merges = 0;
    std::size_t part_only = 0;

    double recall() const { return instances ? static_cast<double>(matched) / instances : 0.0; }
    double mean_best_iou() const { return instances ? best_iou_sum / instances : 0.0; }
};

struct PseudoGtQuality {
    std::vector<PseudoGtClassQuality> classes;

    void merge(const PseudoGtQuality& other);
    PseudoGtClassQuality total() const;
};

inline constexpr double kMergeIou = 0.3;

/// Quality of one image's pseudo GTs against its true instances:
/// recall at IoU 0.5, mean best IoU, merges (a pseudo box overlapping >= 2
/// instances at IoU >= 0.3 each) and part-only boxes (inside a true box with
/// IoU < 0.5).
PseudoGtQuality pseudo_gt_quality(std::span<const PseudoGt> pseudo, std::span<const GroundTruth> truth,
                                  int num_classes);

}  // namespace dthcp
