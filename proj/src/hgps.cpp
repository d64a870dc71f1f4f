#include "dthcp/hgps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dthcp/error.hpp"

namespace dthcp {

void HgpsConfig::validate() const {
    if (!(tau_low > 0.0 && tau_low < tau_high && tau_high <= 1.0)) {
        throw InvalidInput("thresholds must satisfy 0 < tau_low < tau_high <= 1");
    }
    if (!(scale >= 1.0) || !std::isfinite(scale)) throw InvalidInput("scale factor must be >= 1");
    if (!(tau_iou2 > 0.0 && tau_iou2 < tau_iou1 && tau_iou1 < 1.0)) {
        throw InvalidInput("IoU thresholds must satisfy 0 < tau_iou2 < tau_iou1 < 1");
    }
    if (stages < 1) throw InvalidInput("number of refinement stages must be >= 1");
}

const char* to_string(MemberKind kind) {
    switch (kind) {
        case MemberKind::Proposal: return "proposal";
        case MemberKind::LowBox: return "low_box";
        case MemberKind::ScaledHighBox: return "scaled_high_box";
    }
    return "unknown";
}

ClusterSet::ClusterSet(std::size_t num_proposals, std::vector<Cluster> clusters,
                       std::vector<ClassThresholds> thresholds)
    : num_proposals_(num_proposals), clusters_(std::move(clusters)), thresholds_(std::move(thresholds)) {
    for (const Cluster& cluster : clusters_) {
        if (cluster.members.empty()) throw InvariantViolation("cluster has no members");
        for (const ClusterMember& m : cluster.members) {
            if (m.kind == MemberKind::Proposal) {
                if (m.row >= num_proposals_) throw InvariantViolation("proposal member row out of range");
                continue;
            }
            if (m.row != num_proposals_ + synthetic_.size()) {
                throw InvariantViolation("synthetic members must be numbered consecutively");
            }
            synthetic_.push_back(m.box);
        }
    }
}

std::vector<Box> ClusterSet::augmented_boxes(std::span<const Box> proposals) const {
    if (proposals.size() != num_proposals_) throw InvalidInput("proposal count does not match cluster set");
    std::vector<Box> out(proposals.begin(), proposals.end());
    out.insert(out.end(), synthetic_.begin(), synthetic_.end());
    return out;
}

std::size_t ClusterSet::count_for_class(int class_id) const {
    return static_cast<std::size_t>(std::count_if(clusters_.begin(), clusters_.end(),
                                                  [&](const Cluster& c) { return c.class_id == class_id; }));
}

namespace {

const Heatmap& heatmap_for(std::span<const Heatmap> heatmaps, int class_id) {
    for (const Heatmap& h : heatmaps) {
        if (h.class_id() == class_id) return h;
    }
    std::ostringstream os;
    os << "missing heatmap for active class " << class_id;
    throw InvalidInput(os.str());
}

std::vector<std::size_t> proposals_between(std::span<const Box> proposals, const Box& inner, const Box& outer) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (between(proposals[i], inner, outer)) out.push_back(i);
    }
    return out;
}

}  // namespace

ClusterSet build_clusters(std::span<const Heatmap> heatmaps, std::span<const int> image_labels,
                          std::span<const Box> proposals, Extent image, const HgpsConfig& cfg) {
    cfg.validate();
    std::vector<Cluster> clusters;
    std::vector<ClassThresholds> thresholds;
    std::size_t next_synthetic_row = proposals.size();

    for (std::size_t c = 0; c < image_labels.size(); ++c) {
        if (image_labels[c] != 1) continue;
        const int class_id = static_cast<int>(c);
        const Heatmap& h = heatmap_for(heatmaps, class_id);
        if (h.cols() != static_cast<int>(image.width) || h.rows() != static_cast<int>(image.height)) {
            throw InvalidInput("heatmap dimensions differ from image dimensions");
        }

        const auto lows = threshold_regions(h, cfg.tau_low, ThresholdLevel::Low, cfg.connectivity);
        const auto highs = threshold_regions(h, cfg.tau_high, ThresholdLevel::High, cfg.connectivity);
        const SubordinateMap sub = subordinate(highs, lows);

        ClassThresholds record{class_id, {}, {}, sub.low_of_high};
        for (const auto& r : lows) record.low_boxes.push_back(r.box);
        for (const auto& r : highs) record.high_boxes.push_back(r.box);
        thresholds.push_back(std::move(record));

        for (std::size_t n = 0; n < lows.size(); ++n) {
            const Box& low_box = lows[n].box;
            const std::vector<std::size_t> under = sub.highs_under(n);

            if (under.size() <= 1) {
                Cluster cluster{class_id, n, std::nullopt, {}};
                cluster.members.push_back({MemberKind::LowBox, next_synthetic_row++, low_box});
                if (under.size() == 1) {
                    cluster.high_region = under[0];
                    const Box scaled_low = scale_box(low_box, cfg.scale, image);
                    for (std::size_t p : proposals_between(proposals, highs[under[0]].box, scaled_low)) {
                        cluster.members.push_back({MemberKind::Proposal, p, proposals[p]});
                    }
                }
                clusters.push_back(std::move(cluster));
                continue;
            }

            // Several instances share this low region: one cluster per high box,
            // each qualifying proposal kept only where its IoU with the scaled
            // high box is largest (ties to the lower high box).
            const Box scaled_low = scale_box(low_box, cfg.scale, image);
            std::vector<Box> scaled_highs;
            std::vector<std::vector<std::size_t>> candidates;
            for (std::size_t m : under) {
                scaled_highs.push_back(scale_box(highs[m].box, cfg.scale, image));
                candidates.push_back(proposals_between(proposals, highs[m].box, scaled_low));
            }

            std::vector<std::vector<std::size_t>> kept(under.size());
            for (std::size_t p = 0; p < proposals.size(); ++p) {
                std::optional<std::size_t> best;
                double best_iou = -1.0;
                for (std::size_t j = 0; j < under.size(); ++j) {
                    if (!std::binary_search(candidates[j].begin(), candidates[j].end(), p)) continue;
                    const double v = iou(proposals[p], scaled_highs[j]);
                    if (v > best_iou) {
                        best_iou = v;
                        best = j;
                    }
                }
                if (best) kept[*best].push_back(p);
            }

            for (std::size_t j = 0; j < under.size(); ++j) {
                Cluster cluster{class_id, n, under[j], {}};
                cluster.members.push_back({MemberKind::ScaledHighBox, next_synthetic_row++, scaled_highs[j]});
                for (std::size_t p : kept[j]) cluster.members.push_back({MemberKind::Proposal, p, proposals[p]});
                clusters.push_back(std::move(cluster));
            }
        }
    }
    return ClusterSet(proposals.size(), std::move(clusters), std::move(thresholds));
}

PseudoGtSet select_pseudo_gt_ir(const ClusterSet& clusters, const Matrix& argmax_source,
                                const Matrix& weight_source, int stage, const HgpsConfig& cfg) {
    if (stage < 1 || stage > cfg.stages) throw InvalidInput("refinement stage index out of range");
    const auto rows = static_cast<Eigen::Index>(clusters.num_rows());
    if (argmax_source.rows() < rows || weight_source.rows() < rows) {
        throw InvalidInput("score matrix lacks rows for cluster members");
    }
    if (argmax_source.rows() != weight_source.rows() || argmax_source.cols() != weight_source.cols()) {
        throw InvalidInput("argmax and weight score matrices differ in shape");
    }

    PseudoGtSet out{stage, {}};
    for (const Cluster& cluster : clusters.clusters()) {
        if (cluster.members.empty()) throw InvariantViolation("cannot select from an empty cluster");
        if (cluster.class_id >= argmax_source.cols()) throw InvalidInput("score matrix lacks class column");
        const auto col = static_cast<Eigen::Index>(cluster.class_id);
        const ClusterMember* best = &cluster.members.front();
        for (const ClusterMember& m : cluster.members) {
            if (argmax_source(static_cast<Eigen::Index>(m.row), col) >
                argmax_source(static_cast<Eigen::Index>(best->row), col)) {
                best = &m;
            }
        }
        out.entries.push_back(
            {best->box, weight_source(static_cast<Eigen::Index>(best->row), col), cluster.class_id, best->row});
    }
    return out;
}

PseudoGtSet select_pseudo_gt_wsbdn(const ClusterSet& clusters) {
    PseudoGtSet out{0, {}};
    for (const Cluster& cluster : clusters.clusters()) {
        for (const ClusterMember& m : cluster.members) {
            out.entries.push_back({m.box, 1.0, cluster.class_id, m.row});
        }
    }
    return out;
}

std::size_t AssignedLabels::count_ignored() const { return count(kIgnored); }

std::size_t AssignedLabels::count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

AssignedLabels assign_labels(std::span<const Box> boxes, const PseudoGtSet& gts, const HgpsConfig& cfg,
                             int num_classes) {
    AssignedLabels out;
    out.num_classes = num_classes;
    out.labels.assign(boxes.size(), AssignedLabels::kIgnored);
    out.weights.assign(boxes.size(), 0.0);
    out.best_iou.assign(boxes.size(), 0.0);

    for (std::size_t r = 0; r < boxes.size(); ++r) {
        double best = -1.0;
        const PseudoGt* match = nullptr;
        for (const PseudoGt& gt : gts.entries) {
            const double v = iou(boxes[r], gt.box);
            if (v > best) {
                best = v;
                match = &gt;
            }
        }
        if (match == nullptr) continue;
        out.best_iou[r] = best;
        if (best >= cfg.tau_iou1) {
            out.labels[r] = match->class_id;
        } else if (best >= cfg.tau_iou2) {
            out.labels[r] = num_classes;
        } else {
            continue;
        }
        out.weights[r] = match->weight;
    }
    return out;
}

PseudoGtSet select_top_scoring(std::span<const Box> boxes, const Matrix& scores, std::span<const int> image_labels) {
    if (scores.rows() != static_cast<Eigen::Index>(boxes.size())) {
        throw InvalidInput("score rows do not match box count");
    }
    PseudoGtSet out{1, {}};
    if (boxes.empty()) return out;
    for (std::size_t c = 0; c < image_labels.size(); ++c) {
        if (image_labels[c] != 1) continue;
        const auto col = static_cast<Eigen::Index>(c);
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < scores.rows(); ++r) {
            if (scores(r, col) > scores(best, col)) best = r;
        }
        out.entries.push_back({boxes[static_cast<std::size_t>(best)], scores(best, static_cast<Eigen::Index>(c)),
                               static_cast<int>(c), static_cast<std::size_t>(best)});
    }
    return out;
}

PseudoGtSet select_threshold_boxes(std::span<const Heatmap> heatmaps, std::span<const int> image_labels, double tau,
                                   Connectivity conn) {
    PseudoGtSet out{1, {}};
    for (std::size_t c = 0; c < image_labels.size(); ++c) {
        if (image_labels[c] != 1) continue;
        const Heatmap& h = heatmap_for(heatmaps, static_cast<int>(c));
        for (const auto& region : threshold_regions(h, tau, ThresholdLevel::Low, conn)) {
            out.entries.push_back({region.box, 1.0, static_cast<int>(c), 0});
        }
    }
    return out;
}

}  // namespace dthcp
