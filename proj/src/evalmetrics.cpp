#include "dthcp/evalmetrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "dthcp/error.hpp"

namespace dthcp {

std::vector<Detection> sorted_class_detections(std::span<const Detection> dets, int class_id) {
    std::vector<Detection> out;
    for (const Detection& d : dets) {
        if (d.class_id == class_id) out.push_back(d);
    }
    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return out;
}

std::vector<bool> match_detections(std::span<const Detection> sorted_dets, std::span<const GroundTruth> gts,
                                   int class_id, double iou_threshold) {
    std::vector<bool> claimed(gts.size(), false);
    std::vector<bool> tp(sorted_dets.size(), false);
    for (std::size_t i = 0; i < sorted_dets.size(); ++i) {
        const Detection& d = sorted_dets[i];
        double best = -1.0;
        std::size_t best_j = gts.size();
        for (std::size_t j = 0; j < gts.size(); ++j) {
            if (gts[j].class_id != class_id || gts[j].image_id != d.image_id) continue;
            const double v = iou(d.box, gts[j].box);
            if (v > best) {
                best = v;
                best_j = j;
            }
        }
        if (best_j < gts.size() && best >= iou_threshold && !claimed[best_j]) {
            claimed[best_j] = true;
            tp[i] = true;
        }
    }
    return tp;
}

double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts, int class_id,
                         double iou_threshold, ApInterpolation interp) {
    const auto npos = static_cast<std::size_t>(
        std::count_if(gts.begin(), gts.end(), [&](const GroundTruth& g) { return g.class_id == class_id; }));
    if (npos == 0) return 0.0;

    const auto sorted = sorted_class_detections(dets, class_id);
    const auto tp = match_detections(sorted, gts, class_id, iou_threshold);

    std::vector<double> recall(sorted.size()), precision(sorted.size());
    std::size_t tp_count = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (tp[i]) ++tp_count;
        recall[i] = static_cast<double>(tp_count) / static_cast<double>(npos);
        precision[i] = static_cast<double>(tp_count) / static_cast<double>(i + 1);
    }

    if (interp == ApInterpolation::ElevenPoint) {
        double ap = 0.0;
        for (int t = 0; t <= 10; ++t) {
            const double level = t / 10.0;
            double p = 0.0;
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                if (recall[i] >= level) p = std::max(p, precision[i]);
            }
            ap += p / 11.0;
        }
        return ap;
    }

    // All-points: precision envelope, then sum over recall increments.
    std::vector<double> envelope = precision;
    for (std::size_t i = envelope.size(); i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (recall[i] > prev_recall) {
            ap += (recall[i] - prev_recall) * envelope[i];
            prev_recall = recall[i];
        }
    }
    return ap;
}

ApReport mean_ap(std::span<const Detection> dets, std::span<const GroundTruth> gts, int num_classes,
                 double iou_threshold, ApInterpolation interp) {
    ApReport report;
    report.per_class.resize(static_cast<std::size_t>(num_classes));
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
        const bool has_gt = std::any_of(gts.begin(), gts.end(), [&](const GroundTruth& g) { return g.class_id == c; });
        if (!has_gt) continue;
        const double ap = average_precision(dets, gts, c, iou_threshold, interp);
        report.per_class[static_cast<std::size_t>(c)] = ap;
        sum += ap;
        ++counted;
    }
    report.mean = counted ? sum / counted : 0.0;
    return report;
}

std::vector<Detection> top1_per_image_class(std::span<const Detection> dets) {
    std::map<std::pair<std::string, int>, std::size_t> best;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        auto key = std::make_pair(dets[i].image_id, dets[i].class_id);
        auto it = best.find(key);
        if (it == best.end()) {
            best.emplace(key, i);
        } else if (dets[i].score > dets[it->second].score) {
            it->second = i;
        }
    }
    std::vector<Detection> out;
    out.reserve(best.size());
    for (const auto& [key, idx] : best) out.push_back(dets[idx]);
    return out;
}

CorLocReport corloc(std::span<const Detection> top1, std::span<const GroundTruth> gts, int num_classes,
                    double iou_threshold) {
    CorLocReport report;
    report.per_class.resize(static_cast<std::size_t>(num_classes));
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
        std::map<std::string, bool> positive;  // image -> hit
        for (const GroundTruth& g : gts) {
            if (g.class_id == c) positive.emplace(g.image_id, false);
        }
        if (positive.empty()) continue;
        for (const Detection& d : top1) {
            if (d.class_id != c) continue;
            auto it = positive.find(d.image_id);
            if (it == positive.end()) continue;
            for (const GroundTruth& g : gts) {
                if (g.class_id == c && g.image_id == d.image_id && iou(d.box, g.box) >= iou_threshold) {
                    it->second = true;
                    break;
                }
            }
        }
        const auto hits = std::count_if(positive.begin(), positive.end(), [](const auto& kv) { return kv.second; });
        const double value = static_cast<double>(hits) / static_cast<double>(positive.size());
        report.per_class[static_cast<std::size_t>(c)] = value;
        sum += value;
        ++counted;
    }
    report.mean = counted ? sum / counted : 0.0;
    return report;
}

void PseudoGtQuality::merge(const PseudoGtQuality& other) {
    if (classes.empty()) {
        classes = other.classes;
        return;
    }
    if (classes.size() != other.classes.size()) throw InvalidInput("quality reports differ in class count");
    for (std::size_t c = 0; c < classes.size(); ++c) {
        PseudoGtClassQuality& a = classes[c];
        const PseudoGtClassQuality& b = other.classes[c];
        a.instances += b.instances;
        a.matched += b.matched;
        a.best_iou_sum += b.best_iou_sum;
        a.pseudo_boxes += b.pseudo_boxes;
        a.merges += b.merges;
        a.part_only += b.part_only;
    }
}

PseudoGtClassQuality PseudoGtQuality::total() const {
    PseudoGtClassQuality t;
    t.class_id = -1;
    for (const auto& c : classes) {
        t.instances += c.instances;
        t.matched += c.matched;
        t.best_iou_sum += c.best_iou_sum;
        t.pseudo_boxes += c.pseudo_boxes;
        t.merges += c.merges;
        t.part_only += c.part_only;
    }
    return t;
}

PseudoGtQuality pseudo_gt_quality(std::span<const PseudoGt> pseudo, std::span<const GroundTruth> truth,
                                  int num_classes) {
    PseudoGtQuality report;
    for (int c = 0; c < num_classes; ++c) {
        PseudoGtClassQuality q;
        q.class_id = c;
        std::vector<const GroundTruth*> inst;
        for (const GroundTruth& g : truth) {
            if (g.class_id == c) inst.push_back(&g);
        }
        std::vector<const PseudoGt*> boxes;
        for (const PseudoGt& p : pseudo) {
            if (p.class_id == c) boxes.push_back(&p);
        }
        q.instances = inst.size();
        q.pseudo_boxes = boxes.size();

        for (const GroundTruth* g : inst) {
            double best = 0.0;
            for (const PseudoGt* p : boxes) best = std::max(best, iou(g->box, p->box));
            q.best_iou_sum += best;
            if (best >= 0.5) ++q.matched;
        }
        for (const PseudoGt* p : boxes) {
            std::size_t overlapping = 0;
            bool part = false;
            for (const GroundTruth* g : inst) {
                const double v = iou(p->box, g->box);
                if (v >= kMergeIou) ++overlapping;
                if (contains(g->box, p->box) && v < 0.5) part = true;
            }
            if (overlapping >= 2) ++q.merges;
            if (part) ++q.part_only;
        }
        report.classes.push_back(q);
    }
    return report;
}

}  // namespace dthcp
