#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dthcp/hgps.hpp"
#include "dthcp/synth.hpp"

namespace dthcp {

struct TrainerConfig {
    int epochs = 12;
    int batch_size = 8;
    double lr = 0.02;
    /// Epoch at the end of which lr is multiplied by lr_decay_factor; 0 disables.
    int lr_decay_epoch = 8;
    double lr_decay_factor = 0.1;
    double weight_decay = 0.0005;
    bool use_cls_ign = true;
    /// Evaluate mAP every this many iterations; 0 evaluates once per epoch.
    int eval_every = 0;
    double nms_iou = 0.3;
    int threads = 1;

    void validate() const;
};

/// Everything a command needs. Settable by flat key names, e.g. `tau_low`,
/// `n_random`, `lr`, `seed`.
struct RunConfig {
    HgpsConfig hgps;
    SynthConfig synth;
    TrainerConfig train;
    std::uint64_t seed = 0;
    int scene_count = 8;

    void validate() const;

    /// Throws InvalidInput for unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    /// JSON object of every key, in keys() order.
    std::string to_json() const;

    /// Applies a config file: either a JSON object with flat keys or
    /// `key = value` lines (`#` starts a comment).
    void apply_text(const std::string& text);
    void apply_file(const std::string& path);
};

}  // namespace dthcp
