#pragma once

#include <string>
#include <vector>

#include "dthcp/evalmetrics.hpp"
#include "dthcp/heatmap.hpp"
#include "dthcp/hgps.hpp"
#include "dthcp/midn.hpp"
#include "dthcp/synth.hpp"

namespace dthcp::io {

// All readers throw InvalidInput on missing files or malformed content.

/// Text grid: a "rows cols" line, then one line per row of space-separated values.
std::string format_grid(const Grid& g);
Grid parse_grid(const std::string& text);
Heatmap read_heatmap(const std::string& path, int class_id);
void write_heatmap(const std::string& path, const Heatmap& h);

/// CSV with header x1,y1,x2,y2.
std::vector<Box> read_proposals(const std::string& path);
std::string format_proposals(std::span<const Box> boxes);

/// CSV with header image_id,class_id,x1,y1,x2,y2[,score].
std::vector<Detection> read_detections(const std::string& path);
std::vector<GroundTruth> read_ground_truth(const std::string& path);
std::string format_detections(std::span<const Detection> dets);
std::string format_ground_truth(std::span<const GroundTruth> gts);

/// Image labels as a comma- or whitespace-separated 0/1 list.
std::vector<int> parse_labels(const std::string& text);

/// Bundle directory: scene.json plus heatmap_<class>.txt for each present class.
void write_bundle(const std::string& dir, const SceneBundle& bundle);
SceneBundle read_bundle(const std::string& dir);

std::string cluster_json(const ClusterSet& clusters);

std::string checkpoint_json(const DetectorModel& model);
DetectorModel parse_checkpoint(const std::string& text);

/// Binary PPM of a heatmap in grey, upscaled by `zoom`, with low threshold
/// boxes in blue, high threshold boxes in red and each cluster's synthetic box
/// in green.
std::string render_overlay(const Heatmap& h, const ClusterSet& clusters, int zoom);

std::string read_file(const std::string& path);
/// Writes through a temporary file and renames, so readers never see partial output.
void write_file(const std::string& path, const std::string& contents);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace dthcp::io
