#include "dthcp/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "dthcp/error.hpp"
#include "dthcp/rng.hpp"

namespace dthcp {

PreparedImage prepare_image(const SceneBundle& bundle, const RunConfig& cfg) {
    const int C = cfg.synth.num_classes;
    if (static_cast<int>(bundle.image_labels.size()) != C) {
        throw InvalidInput("scene " + bundle.scene.id + " has " + std::to_string(bundle.image_labels.size()) +
                           " labels, config says " + std::to_string(C));
    }
    if (bundle.features.rows() != static_cast<Eigen::Index>(bundle.proposals.size())) {
        throw InvalidInput("scene " + bundle.scene.id + ": feature rows do not match proposals");
    }
    if (bundle.features.cols() != cfg.synth.feature_dim) {
        throw InvalidInput("scene " + bundle.scene.id + ": feature dim does not match config");
    }
    PreparedImage img;
    img.id = bundle.scene.id;
    img.image_labels = bundle.image_labels;
    img.box_label = box_level_label(bundle.image_labels);
    img.clusters = build_clusters(bundle.heatmaps, bundle.image_labels, bundle.proposals, bundle.scene.extent, cfg.hgps);
    img.boxes = img.clusters.augmented_boxes(bundle.proposals);

    const auto& synthetic = img.clusters.synthetic_boxes();
    img.features.resize(static_cast<Eigen::Index>(img.boxes.size()), bundle.features.cols());
    img.features.topRows(bundle.features.rows()) = bundle.features;
    if (!synthetic.empty()) {
        img.features.bottomRows(static_cast<Eigen::Index>(synthetic.size())) =
            box_features(cfg.synth, bundle.scene, synthetic);
    }
    img.base_labels = assign_labels(img.boxes, select_pseudo_gt_wsbdn(img.clusters), cfg.hgps, C);
    return img;
}

Supervision build_supervision(const PreparedImage& img, const ForwardPass& pass, const RunConfig& cfg) {
    const int C = cfg.synth.num_classes;
    Supervision sup;
    sup.box_label = img.box_label;
    sup.use_cls_ign = cfg.train.use_cls_ign;
    sup.stage_labels.push_back(img.base_labels);
    for (int k = 1; k <= static_cast<int>(pass.refine.size()); ++k) {
        const Matrix& prev = k == 1 ? pass.base.s : pass.refine[static_cast<std::size_t>(k - 2)];
        const Matrix& argmax_src = k == 1 ? pass.base.ws : prev;
        const Matrix& weight_src = (k == 1 && cfg.hgps.stage1_weight_from_ws) ? pass.base.ws : prev;
        const auto gts = select_pseudo_gt_ir(img.clusters, argmax_src, weight_src, k, cfg.hgps);
        sup.stage_labels.push_back(assign_labels(img.boxes, gts, cfg.hgps, C));
    }
    return sup;
}

std::vector<Detection> detect(const DetectorModel& model, const SceneBundle& bundle, int num_classes,
                              double nms_iou) {
    std::vector<Detection> out;
    if (bundle.proposals.empty()) return out;
    const ForwardPass pass = forward(model, bundle.features);
    Matrix scores = Matrix::Zero(bundle.features.rows(), num_classes + 1);
    if (pass.refine.empty()) {
        scores = pass.base.s;
    } else {
        for (const auto& s : pass.refine) scores += s;
        scores /= static_cast<double>(pass.refine.size());
    }
    for (int c = 0; c < num_classes; ++c) {
        std::vector<ScoredBox> cand;
        cand.reserve(bundle.proposals.size());
        for (std::size_t r = 0; r < bundle.proposals.size(); ++r) {
            cand.push_back({bundle.proposals[r], scores(static_cast<Eigen::Index>(r), c)});
        }
        for (std::size_t i : nms(cand, nms_iou)) out.push_back({bundle.scene.id, c, cand[i].box, cand[i].score});
    }
    return out;
}

double evaluate_map(const DetectorModel& model, std::span<const SceneBundle> scenes, int num_classes,
                    double nms_iou) {
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
    for (const auto& s : scenes) {
        auto d = detect(model, s, num_classes, nms_iou);
        dets.insert(dets.end(), d.begin(), d.end());
        gts.insert(gts.end(), s.ground_truth.begin(), s.ground_truth.end());
    }
    return mean_ap(dets, gts, num_classes).mean;
}

namespace {

struct ImageStep {
    Gradients grads;
    double loss = 0.0;
};

ImageStep image_step(const DetectorModel& model, const PreparedImage& img, const RunConfig& cfg) {
    ImageStep out;
    if (img.boxes.empty()) {
        out.grads = zero_gradients(model);
        return out;
    }
    const ForwardPass pass = forward(model, img.features);
    const Supervision sup = build_supervision(img, pass, cfg);
    out.loss = evaluate_loss(LossId::Total, 0, pass, sup);
    out.grads = backward(LossId::Total, 0, model, img.features, pass, sup);
    return out;
}

}  // namespace

TrainResult train(std::span<const SceneBundle> train_set, std::span<const SceneBundle> eval_set,
                  const RunConfig& cfg) {
    cfg.validate();
    const int C = cfg.synth.num_classes;
    std::vector<PreparedImage> images;
    images.reserve(train_set.size());
    for (const auto& b : train_set) images.push_back(prepare_image(b, cfg));

    SplitMix64 init(mix_seed(cfg.seed, 0x1417));
    TrainResult res;
    res.model = DetectorModel::xavier(cfg.synth.feature_dim, C + 1, cfg.hgps.stages, init);

    auto measure = [&](long long it, int epoch) {
        if (eval_set.empty()) return;
        res.map_curve.push_back({it, epoch, evaluate_map(res.model, eval_set, C, cfg.train.nms_iou)});
    };
    measure(0, 0);
    if (images.empty()) return res;

    const auto B = static_cast<std::size_t>(cfg.train.batch_size);
    const auto threads = static_cast<std::size_t>(cfg.train.threads);
    std::vector<std::size_t> order(images.size());
    long long it = 0;
    for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        const bool decayed = cfg.train.lr_decay_epoch > 0 && epoch > cfg.train.lr_decay_epoch;
        const double lr = decayed ? cfg.train.lr * cfg.train.lr_decay_factor : cfg.train.lr;
        std::iota(order.begin(), order.end(), std::size_t{0});
        SplitMix64 shuffle(mix_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
        }
        for (std::size_t start = 0; start < order.size(); start += B) {
            const std::size_t n = std::min(B, order.size() - start);
            std::vector<ImageStep> steps(n);
            if (threads > 1 && n > 1) {
                std::vector<std::thread> pool;
                const std::size_t workers = std::min(threads, n);
                for (std::size_t w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        for (std::size_t i = w; i < n; i += workers) {
                            steps[i] = image_step(res.model, images[order[start + i]], cfg);
                        }
                    });
                }
                for (auto& t : pool) t.join();
            } else {
                for (std::size_t i = 0; i < n; ++i) steps[i] = image_step(res.model, images[order[start + i]], cfg);
            }
            // Reduce in batch order so the result does not depend on thread timing.
            Gradients total = zero_gradients(res.model);
            double loss = 0.0;
            for (const auto& s : steps) {
                accumulate(total, s.grads, 1.0 / static_cast<double>(n));
                loss += s.loss / static_cast<double>(n);
            }
            sgd_step(res.model, total, lr, cfg.train.weight_decay);
            ++it;
            res.loss_curve.push_back(loss);
            if (cfg.train.eval_every > 0 && it % cfg.train.eval_every == 0) measure(it, epoch);
        }
        if (cfg.train.eval_every == 0) measure(it, epoch);
    }
    return res;
}

}  // namespace dthcp
