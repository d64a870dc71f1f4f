#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dthcp/evalmetrics.hpp"
#include "dthcp/geometry.hpp"
#include "dthcp/heatmap.hpp"
#include "dthcp/types.hpp"

namespace dthcp {

/// Knobs of the synthetic scene generator.
///
/// Heatmaps: every instance contributes a plateau of value 1 over its core (the
/// box shrunk about its center by core_ratio) that decays linearly to 0 at the
/// box enlarged by falloff_ratio. A class map is the pixelwise max over that
/// class's instances plus uniform noise in [0, noise_amplitude), min-max
/// normalized. Values are sampled at pixel centers.
///
/// Proposals per instance: the exact box (when include_tight_box), n_jitter
/// jittered copies, n_part sub-rectangles of the core ("discriminative parts"),
/// plus n_merge jittered unions for each adjacent same-class pair, then n_random
/// uniform boxes. The list is shuffled and truncated to max_proposals, dropping
/// random boxes first.
///
/// Features: f = q * mu[c*] + (1 - q) * mu[bg] + feature_noise * N(0, I), where
/// q is the box's best IoU with an instance of class c*. The class means come
/// from feature_seed and are shared by all scenes.
struct SynthConfig {
    int width = 96;
    int height = 96;
    int num_classes = 4;

    double class_presence = 0.5;
    int max_instances_per_class = 3;
    double min_instance_size = 12;
    double max_instance_size = 22;
    double min_gap = 3;
    /// Chance that a class with >= 2 instances places its second one next to the
    /// first at pair_gap pixels, giving one merged low-threshold region.
    double pair_probability = 0.3;
    double pair_gap = 2;

    double core_ratio = 0.5;
    double falloff_ratio = 1.5;
    double noise_amplitude = 0.02;

    bool include_tight_box = true;
    int n_jitter = 3;
    double jitter_sigma = 0.04;
    int n_part = 2;
    int n_merge = 1;
    int n_random = 20;
    int max_proposals = 60;

    int feature_dim = 8;
    double feature_noise = 0.3;
    std::uint64_t feature_seed = 7;

    /// Throws InvalidInput on inconsistent values.
    void validate() const;
};

struct Instance {
    int class_id = 0;
    Box box{0, 0, 1, 1};
};

struct Scene {
    std::string id;
    Extent extent;
    std::vector<Instance> instances;
    /// Index pairs into `instances` placed side by side.
    std::vector<std::pair<std::size_t, std::size_t>> adjacent_pairs;
    std::uint64_t seed = 0;
};

struct SceneBundle {
    Scene scene;
    /// One map for each present class, ordered by class id.
    std::vector<Heatmap> heatmaps;
    std::vector<Box> proposals;
    Matrix features;
    std::vector<int> image_labels;
    std::vector<GroundTruth> ground_truth;
};

/// Deterministic in (cfg, seed).
SceneBundle generate_scene(const SynthConfig& cfg, std::uint64_t seed, const std::string& id = "scene");

/// Builds the heatmap of one class from instance geometry alone (noise drawn
/// from `noise_seed`).
Heatmap render_heatmap(const SynthConfig& cfg, std::span<const Instance> instances, int class_id, Extent extent,
                       std::uint64_t noise_seed);

/// Feature row for any box in a scene; the noise is keyed by (scene seed, box),
/// so an identical box always receives an identical row.
RowVector box_features(const SynthConfig& cfg, const Scene& scene, const Box& box);
Matrix box_features(const SynthConfig& cfg, const Scene& scene, std::span<const Box> boxes);

/// Score model that rates boxes inside an instance core (parts, see core_ratio) above every
/// whole-object box: 0.95 + 0.05 * IoU for parts, 0.9 * IoU otherwise. Columns
/// 0..C-1 are classes; column C holds 1 - max class score.
Matrix part_biased_scores(const Scene& scene, std::span<const Box> boxes, int num_classes, double core_ratio);

}  // namespace dthcp
