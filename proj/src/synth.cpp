#include "dthcp/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>

#include "dthcp/error.hpp"
#include "dthcp/rng.hpp"

namespace dthcp {

void SynthConfig::validate() const {
    if (width < 8 || height < 8) throw InvalidInput("image extent must be at least 8x8");
    if (num_classes < 1) throw InvalidInput("num_classes must be >= 1");
    if (class_presence < 0.0 || class_presence > 1.0) throw InvalidInput("class_presence must lie in [0, 1]");
    if (max_instances_per_class < 0) throw InvalidInput("max_instances_per_class must be >= 0");
    if (min_instance_size < 4 || max_instance_size < min_instance_size) {
        throw InvalidInput("instance sizes must satisfy 4 <= min <= max");
    }
    if (max_instance_size + 2 > std::min(width, height)) throw InvalidInput("instances overflow the image extent");
    if (min_gap < 0 || pair_gap < 0) throw InvalidInput("gaps must be >= 0");
    if (pair_probability < 0.0 || pair_probability > 1.0) throw InvalidInput("pair_probability must lie in [0, 1]");
    if (!(core_ratio > 0.0 && core_ratio < 1.0 && falloff_ratio > 1.0)) {
        throw InvalidInput("heatmap model requires 0 < core_ratio < 1 < falloff_ratio");
    }
    if (noise_amplitude < 0.0 || noise_amplitude >= 1.0) throw InvalidInput("noise_amplitude must lie in [0, 1)");
    if (n_jitter < 0 || n_part < 0 || n_merge < 0 || n_random < 0) throw InvalidInput("proposal counts must be >= 0");
    if (jitter_sigma < 0.0) throw InvalidInput("jitter_sigma must be >= 0");
    if (max_proposals < 1) throw InvalidInput("max_proposals must be >= 1");
    if (feature_dim < 1) throw InvalidInput("feature_dim must be >= 1");
    if (feature_noise < 0.0) throw InvalidInput("feature_noise must be >= 0");
}

namespace {

double gap_between(const Box& a, const Box& b) {
    return std::max({b.x1() - a.x2(), a.x1() - b.x2(), b.y1() - a.y2(), a.y1() - b.y2()});
}

bool fits(const Box& b, const Extent& e) { return b.x1() >= 1 && b.y1() >= 1 && b.x2() <= e.width - 1 && b.y2() <= e.height - 1; }

bool clear_of(const Box& b, const std::vector<Instance>& placed, double min_gap, std::size_t skip) {
    for (std::size_t i = 0; i < placed.size(); ++i) {
        if (i == skip) continue;
        if (gap_between(b, placed[i].box) < min_gap) return false;
    }
    return true;
}

std::optional<Box> try_place(const SynthConfig& cfg, SplitMix64& rng, const Extent& e,
                             const std::vector<Instance>& placed) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        const auto w = static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(cfg.min_instance_size),
                                                           static_cast<std::int64_t>(cfg.max_instance_size)));
        const auto h = static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(cfg.min_instance_size),
                                                           static_cast<std::int64_t>(cfg.max_instance_size)));
        const auto x = static_cast<double>(rng.uniform_int(1, static_cast<std::int64_t>(e.width - 1 - w)));
        const auto y = static_cast<double>(rng.uniform_int(1, static_cast<std::int64_t>(e.height - 1 - h)));
        Box b(x, y, x + w, y + h);
        if (clear_of(b, placed, cfg.min_gap, placed.size())) return b;
    }
    return std::nullopt;
}

std::optional<Box> try_place_adjacent(const SynthConfig& cfg, SplitMix64& rng, const Extent& e,
                                      const std::vector<Instance>& placed, std::size_t partner) {
    const Box& p = placed[partner].box;
    const double g = cfg.pair_gap;
    const Box candidates[4] = {
        Box(p.x2() + g, p.y1(), p.x2() + g + p.width(), p.y2()),   // right
        Box(p.x1() - g - p.width(), p.y1(), p.x1() - g, p.y2()),   // left
        Box(p.x1(), p.y2() + g, p.x2(), p.y2() + g + p.height()),  // below
        Box(p.x1(), p.y1() - g - p.height(), p.x2(), p.y1() - g),  // above
    };
    const auto first = static_cast<int>(rng.uniform_int(0, 3));
    for (int k = 0; k < 4; ++k) {
        const Box& b = candidates[(first + k) % 4];
        if (fits(b, e) && clear_of(b, placed, cfg.min_gap, partner)) return b;
    }
    return std::nullopt;
}

Box clip_to(double x1, double y1, double x2, double y2, const Extent& e) {
    x1 = std::clamp(x1, 0.0, e.width - 1.0);
    y1 = std::clamp(y1, 0.0, e.height - 1.0);
    x2 = std::clamp(x2, x1 + 1.0, e.width);
    y2 = std::clamp(y2, y1 + 1.0, e.height);
    return Box(x1, y1, x2, y2);
}

Box jitter(const Box& b, double sigma, SplitMix64& rng, const Extent& e) {
    auto noise = [&](double scale) { return std::clamp(rng.normal(), -2.5, 2.5) * sigma * scale; };
    const double w = b.width();
    const double h = b.height();
    const double x1 = b.x1() + noise(w);
    const double y1 = b.y1() + noise(h);
    const double x2 = b.x2() + noise(w);
    const double y2 = b.y2() + noise(h);
    return clip_to(x1, y1, x2, y2, e);
}

Box core_of(const Box& b, double core_ratio) {
    const double hw = 0.5 * b.width() * core_ratio;
    const double hh = 0.5 * b.height() * core_ratio;
    return Box(b.center_x() - hw, b.center_y() - hh, b.center_x() + hw, b.center_y() + hh);
}

Box union_box(const Box& a, const Box& b) {
    return Box(std::min(a.x1(), b.x1()), std::min(a.y1(), b.y1()), std::max(a.x2(), b.x2()), std::max(a.y2(), b.y2()));
}

std::uint64_t box_key(std::uint64_t seed, const Box& b) {
    std::uint64_t k = seed;
    for (double v : {b.x1(), b.y1(), b.x2(), b.y2()}) k = mix_seed(k, std::bit_cast<std::uint64_t>(v));
    return k;
}

Matrix class_means(const SynthConfig& cfg) {
    SplitMix64 rng(cfg.feature_seed);
    Matrix mu(cfg.num_classes + 1, cfg.feature_dim);
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
        for (Eigen::Index j = 0; j < mu.cols(); ++j) mu(i, j) = rng.normal();
    }
    return mu;
}

}  // namespace

Heatmap render_heatmap(const SynthConfig& cfg, std::span<const Instance> instances, int class_id, Extent extent,
                       std::uint64_t noise_seed) {
    const int rows = static_cast<int>(extent.height);
    const int cols = static_cast<int>(extent.width);
    Grid raw(rows, cols, 0.0);
    for (const Instance& inst : instances) {
        if (inst.class_id != class_id) continue;
        const double cx = inst.box.center_x();
        const double cy = inst.box.center_y();
        const double core_w = 0.5 * inst.box.width() * cfg.core_ratio;
        const double core_h = 0.5 * inst.box.height() * cfg.core_ratio;
        const double fall_w = 0.5 * inst.box.width() * cfg.falloff_ratio;
        const double fall_h = 0.5 * inst.box.height() * cfg.falloff_ratio;
        for (int r = 0; r < rows; ++r) {
            const double dy = std::max(0.0, std::abs(r + 0.5 - cy) - core_h) / (fall_h - core_h);
            for (int c = 0; c < cols; ++c) {
                const double dx = std::max(0.0, std::abs(c + 0.5 - cx) - core_w) / (fall_w - core_w);
                const double v = std::max(0.0, 1.0 - std::max(dx, dy));
                raw.at(r, c) = std::max(raw.at(r, c), v);
            }
        }
    }
    if (cfg.noise_amplitude > 0.0) {
        SplitMix64 rng(noise_seed);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) raw.at(r, c) += cfg.noise_amplitude * rng.uniform();
        }
    }
    return normalize(ActivationMap{class_id, std::move(raw)});
}

RowVector box_features(const SynthConfig& cfg, const Scene& scene, const Box& box) {
    static thread_local std::uint64_t cached_seed = 0;
    static thread_local Matrix cached_mu;
    if (cached_mu.size() == 0 || cached_seed != cfg.feature_seed || cached_mu.rows() != cfg.num_classes + 1 ||
        cached_mu.cols() != cfg.feature_dim) {
        cached_mu = class_means(cfg);
        cached_seed = cfg.feature_seed;
    }
    const Matrix& mu = cached_mu;

    double q = 0.0;
    int best_class = -1;
    for (const Instance& inst : scene.instances) {
        const double v = iou(box, inst.box);
        if (v > q) {
            q = v;
            best_class = inst.class_id;
        }
    }
    RowVector f = (1.0 - q) * mu.row(cfg.num_classes);
    if (best_class >= 0) f += q * mu.row(best_class);
    SplitMix64 rng(box_key(scene.seed, box));
    for (Eigen::Index j = 0; j < f.size(); ++j) f(j) += cfg.feature_noise * rng.normal();
    return f;
}

Matrix box_features(const SynthConfig& cfg, const Scene& scene, std::span<const Box> boxes) {
    Matrix out(static_cast<Eigen::Index>(boxes.size()), cfg.feature_dim);
    for (std::size_t i = 0; i < boxes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = box_features(cfg, scene, boxes[i]);
    return out;
}

SceneBundle generate_scene(const SynthConfig& cfg, std::uint64_t seed, const std::string& id) {
    cfg.validate();
    SplitMix64 rng(seed);
    SceneBundle bundle;
    Scene& scene = bundle.scene;
    scene.id = id;
    scene.extent = Extent{static_cast<double>(cfg.width), static_cast<double>(cfg.height)};
    scene.seed = seed;

    for (int c = 0; c < cfg.num_classes; ++c) {
        if (!rng.bernoulli(cfg.class_presence) || cfg.max_instances_per_class == 0) continue;
        const auto count = rng.uniform_int(1, cfg.max_instances_per_class);
        std::optional<std::size_t> first;
        for (std::int64_t i = 0; i < count; ++i) {
            std::optional<Box> placed;
            bool paired = false;
            if (i == 1 && first && rng.bernoulli(cfg.pair_probability)) {
                placed = try_place_adjacent(cfg, rng, scene.extent, scene.instances, *first);
                paired = placed.has_value();
            }
            if (!placed) placed = try_place(cfg, rng, scene.extent, scene.instances);
            if (!placed) continue;
            if (paired) scene.adjacent_pairs.emplace_back(*first, scene.instances.size());
            if (!first) first = scene.instances.size();
            scene.instances.push_back({c, *placed});
        }
    }

    bundle.image_labels.assign(static_cast<std::size_t>(cfg.num_classes), 0);
    for (const Instance& inst : scene.instances) {
        bundle.image_labels[static_cast<std::size_t>(inst.class_id)] = 1;
        bundle.ground_truth.push_back({scene.id, inst.class_id, inst.box});
    }
    for (int c = 0; c < cfg.num_classes; ++c) {
        if (!bundle.image_labels[static_cast<std::size_t>(c)]) continue;
        bundle.heatmaps.push_back(render_heatmap(cfg, scene.instances, c, scene.extent, mix_seed(seed, 1000 + c)));
    }

    // Tiers decide what survives truncation: tight boxes, jitters, merges, parts, random.
    std::vector<std::vector<Box>> tiers(5);
    for (const Instance& inst : scene.instances) {
        if (cfg.include_tight_box) tiers[0].push_back(inst.box);
        for (int j = 0; j < cfg.n_jitter; ++j) tiers[1].push_back(jitter(inst.box, cfg.jitter_sigma, rng, scene.extent));
        const Box core = core_of(inst.box, cfg.core_ratio);
        for (int j = 0; j < cfg.n_part; ++j) {
            const double pw = core.width() * rng.uniform(0.3, 0.7);
            const double ph = core.height() * rng.uniform(0.3, 0.7);
            const double x = core.x1() + rng.uniform(0.0, core.width() - pw);
            const double y = core.y1() + rng.uniform(0.0, core.height() - ph);
            tiers[3].push_back(Box(x, y, x + pw, y + ph));
        }
    }
    for (const auto& [a, b] : scene.adjacent_pairs) {
        const Box u = union_box(scene.instances[a].box, scene.instances[b].box);
        for (int j = 0; j < cfg.n_merge; ++j) tiers[2].push_back(jitter(u, cfg.jitter_sigma * 0.5, rng, scene.extent));
    }
    for (int j = 0; j < cfg.n_random; ++j) {
        const double w = rng.uniform(4.0, cfg.width / 2.0);
        const double h = rng.uniform(4.0, cfg.height / 2.0);
        const double x = rng.uniform(0.0, cfg.width - w);
        const double y = rng.uniform(0.0, cfg.height - h);
        tiers[4].push_back(Box(x, y, x + w, y + h));
    }

    auto& props = bundle.proposals;
    for (auto& tier : tiers) {
        for (const Box& b : tier) {
            if (props.size() >= static_cast<std::size_t>(cfg.max_proposals)) break;
            props.push_back(b);
        }
    }
    for (std::size_t i = props.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(props[i - 1], props[j]);
    }

    bundle.features = box_features(cfg, scene, props);
    return bundle;
}

Matrix part_biased_scores(const Scene& scene, std::span<const Box> boxes, int num_classes, double core_ratio) {
    Matrix scores = Matrix::Zero(static_cast<Eigen::Index>(boxes.size()), num_classes + 1);
    for (std::size_t r = 0; r < boxes.size(); ++r) {
        double top = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            double s = 0.0;
            for (const Instance& inst : scene.instances) {
                if (inst.class_id != c) continue;
                const double v = iou(boxes[r], inst.box);
                const bool part = contains(core_of(inst.box, core_ratio), boxes[r]);
                s = std::max(s, part ? 0.95 + 0.05 * v : 0.9 * v);
            }
            scores(static_cast<Eigen::Index>(r), c) = s;
            top = std::max(top, s);
        }
        scores(static_cast<Eigen::Index>(r), num_classes) = 1.0 - top;
    }
    return scores;
}

}  // namespace dthcp
