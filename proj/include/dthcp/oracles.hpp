#pragma once

#include <span>
#include <vector>

#include "dthcp/evalmetrics.hpp"
#include "dthcp/heatmap.hpp"
#include "dthcp/hgps.hpp"

// Brute-force reference implementations. They share no code with the
// production paths they check beyond the plain data types.

namespace dthcp::oracle {

/// BFS flood fill. Components ordered by first pixel in row-major order,
/// pixels sorted row-major.
std::vector<std::vector<Pixel>> connected_components(const BinaryMask& mask, Connectivity conn);

/// Cluster construction by exhaustive evaluation of the between predicate over
/// every (proposal, high region, low region) triple.
ClusterSet cluster_enumeration(std::span<const Heatmap> heatmaps, std::span<const int> image_labels,
                               std::span<const Box> proposals, Extent image, const HgpsConfig& cfg);

/// AP by re-matching every score prefix independently and taking, for each
/// recall step, the best precision at any prefix with at least that recall.
double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts, int class_id,
                         double iou_threshold = 0.5);

}  // namespace dthcp::oracle
