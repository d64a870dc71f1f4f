#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dthcp/geometry.hpp"
#include "dthcp/heatmap.hpp"
#include "dthcp/types.hpp"

namespace dthcp {

struct HgpsConfig {
    double tau_high = 0.8;
    double tau_low = 0.3;
    double scale = 1.2;
    double tau_iou1 = 0.5;
    double tau_iou2 = 0.1;
    int stages = 3;
    /// At stage 1 the argmax runs over ws^(0). By default the emitted weight
    /// still comes from the class-wise scores s^(0); set this to take it from
    /// ws^(0) instead.
    bool stage1_weight_from_ws = false;
    Connectivity connectivity = Connectivity::Eight;

    /// Throws InvalidInput unless 0 < tau_low < tau_high <= 1, scale >= 1,
    /// 0 < tau_iou2 < tau_iou1 < 1 and stages >= 1.
    void validate() const;
};

enum class MemberKind { Proposal, LowBox, ScaledHighBox };

const char* to_string(MemberKind kind);

struct ClusterMember {
    MemberKind kind = MemberKind::Proposal;
    /// Row in the augmented box list: the proposal index for proposals,
    /// num_proposals + k for the k-th synthetic box.
    std::size_t row = 0;
    Box box{0, 0, 1, 1};

    bool operator==(const ClusterMember&) const = default;
};

struct Cluster {
    int class_id = 0;
    std::size_t low_region = 0;
    std::optional<std::size_t> high_region;
    /// Synthetic member first, then proposals in ascending index.
    std::vector<ClusterMember> members;

    bool operator==(const Cluster&) const = default;
};

/// Threshold boxes of one active class, kept for dumps and overlays.
struct ClassThresholds {
    int class_id = 0;
    std::vector<Box> low_boxes;
    std::vector<Box> high_boxes;
    std::vector<std::size_t> low_of_high;

    bool operator==(const ClassThresholds&) const = default;
};

class ClusterSet {
public:
    ClusterSet() = default;
    ClusterSet(std::size_t num_proposals, std::vector<Cluster> clusters, std::vector<ClassThresholds> thresholds);

    std::size_t num_proposals() const { return num_proposals_; }
    const std::vector<Cluster>& clusters() const { return clusters_; }
    const std::vector<ClassThresholds>& thresholds() const { return thresholds_; }
    bool empty() const { return clusters_.empty(); }

    /// Synthetic (low / scaled-high) boxes in row order; they occupy rows
    /// num_proposals() .. num_rows() - 1 of any score or feature matrix.
    const std::vector<Box>& synthetic_boxes() const { return synthetic_; }
    std::size_t num_rows() const { return num_proposals_ + synthetic_.size(); }

    /// Proposals followed by synthetic boxes.
    std::vector<Box> augmented_boxes(std::span<const Box> proposals) const;

    std::size_t count_for_class(int class_id) const;

    bool operator==(const ClusterSet&) const = default;

private:
    std::size_t num_proposals_ = 0;
    std::vector<Cluster> clusters_;
    std::vector<ClassThresholds> thresholds_;
    std::vector<Box> synthetic_;
};

/// Pseudo-GT cluster construction from dual-threshold heatmap boxes.
/// `heatmaps` must hold one map (matched by class id) for every class with
/// image_labels[c] == 1, each exactly image-sized.
ClusterSet build_clusters(std::span<const Heatmap> heatmaps, std::span<const int> image_labels,
                          std::span<const Box> proposals, Extent image, const HgpsConfig& cfg);

struct PseudoGt {
    Box box{0, 0, 1, 1};
    double weight = 1.0;
    int class_id = 0;
    std::size_t row = 0;
};

struct PseudoGtSet {
    /// 0 for the base detector, k for refinement stage k.
    int stage = 0;
    std::vector<PseudoGt> entries;
};

/// Per cluster, picks the member with the largest `argmax_source(row, c)`
/// (ties to the earlier member) and weights it with `weight_source(row, c)`.
PseudoGtSet select_pseudo_gt_ir(const ClusterSet& clusters, const Matrix& argmax_source,
                                const Matrix& weight_source, int stage, const HgpsConfig& cfg);

/// Every member of every cluster, weight 1.
PseudoGtSet select_pseudo_gt_wsbdn(const ClusterSet& clusters);

struct AssignedLabels {
    static constexpr int kIgnored = -1;

    int num_classes = 0;
    std::vector<int> labels;
    std::vector<double> weights;
    std::vector<double> best_iou;

    int background() const { return num_classes; }
    std::size_t size() const { return labels.size(); }
    std::size_t count_ignored() const;
    std::size_t count_labelled() const { return size() - count_ignored(); }
    std::size_t count(int label) const;
};

/// IoU-threshold label assignment. Foreground classes are 0..C-1 and the
/// background column is C.
AssignedLabels assign_labels(std::span<const Box> boxes, const PseudoGtSet& gts, const HgpsConfig& cfg,
                             int num_classes);

/// Baseline: one pseudo GT per present class, the globally top-scoring box.
PseudoGtSet select_top_scoring(std::span<const Box> boxes, const Matrix& scores, std::span<const int> image_labels);

/// Baseline: every threshold box at `tau` of every present class is a pseudo GT.
PseudoGtSet select_threshold_boxes(std::span<const Heatmap> heatmaps, std::span<const int> image_labels, double tau,
                                   Connectivity conn = Connectivity::Eight);

}  // namespace dthcp
