#include "dthcp/oracles.hpp"

#include <algorithm>
#include <deque>
#include <optional>

#include "dthcp/error.hpp"

namespace dthcp::oracle {

std::vector<std::vector<Pixel>> connected_components(const BinaryMask& mask, Connectivity conn) {
    const int rows = mask.rows();
    const int cols = mask.cols();
    std::vector<std::vector<bool>> seen(static_cast<std::size_t>(rows), std::vector<bool>(static_cast<std::size_t>(cols)));
    std::vector<std::vector<Pixel>> out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!mask.test(r, c) || seen[r][c]) continue;
            std::vector<Pixel> comp;
            std::deque<Pixel> queue{{r, c}};
            seen[r][c] = true;
            while (!queue.empty()) {
                const Pixel p = queue.front();
                queue.pop_front();
                comp.push_back(p);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (conn == Connectivity::Four && dr != 0 && dc != 0) continue;
                        const int nr = p.row + dr;
                        const int nc = p.col + dc;
                        if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
                        if (!mask.test(nr, nc) || seen[nr][nc]) continue;
                        seen[nr][nc] = true;
                        queue.push_back({nr, nc});
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            out.push_back(std::move(comp));
        }
    }
    return out;
}

namespace {

struct Rect {
    double x1, y1, x2, y2;
};

Rect rect_of(const Box& b) { return {b.x1(), b.y1(), b.x2(), b.y2()}; }

Rect cover(const std::vector<Pixel>& px) {
    Rect r{1e300, 1e300, -1e300, -1e300};
    for (const Pixel& p : px) {
        r.x1 = std::min(r.x1, static_cast<double>(p.col));
        r.y1 = std::min(r.y1, static_cast<double>(p.row));
        r.x2 = std::max(r.x2, p.col + 1.0);
        r.y2 = std::max(r.y2, p.row + 1.0);
    }
    return r;
}

bool inside(const Rect& outer, const Rect& in) {
    return outer.x1 <= in.x1 && outer.y1 <= in.y1 && in.x2 <= outer.x2 && in.y2 <= outer.y2;
}

double overlap(const Rect& a, const Rect& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / ((a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter);
}

Rect enlarge(const Rect& r, double factor, const Extent& e) {
    const double grow_x = 0.5 * (factor - 1.0) * (r.x2 - r.x1);
    const double grow_y = 0.5 * (factor - 1.0) * (r.y2 - r.y1);
    return {std::max(0.0, r.x1 - grow_x), std::max(0.0, r.y1 - grow_y), std::min(e.width, r.x2 + grow_x),
            std::min(e.height, r.y2 + grow_y)};
}

Box box_of(const Rect& r) { return Box(r.x1, r.y1, r.x2, r.y2); }

std::vector<std::vector<Pixel>> regions_at(const Heatmap& h, double tau, Connectivity conn) {
    BinaryMask mask(h.rows(), h.cols());
    for (int r = 0; r < h.rows(); ++r) {
        for (int c = 0; c < h.cols(); ++c) mask.set(r, c, h.at(r, c) >= tau);
    }
    return oracle::connected_components(mask, conn);
}

}  // namespace

ClusterSet cluster_enumeration(std::span<const Heatmap> heatmaps, std::span<const int> image_labels,
                               std::span<const Box> proposals, Extent image, const HgpsConfig& cfg) {
    std::vector<Cluster> clusters;
    std::vector<ClassThresholds> records;
    std::size_t synthetic = proposals.size();

    std::vector<Rect> props;
    for (const Box& p : proposals) props.push_back(rect_of(p));

    for (std::size_t c = 0; c < image_labels.size(); ++c) {
        if (image_labels[c] != 1) continue;
        const Heatmap* h = nullptr;
        for (const Heatmap& cand : heatmaps) {
            if (cand.class_id() == static_cast<int>(c)) h = &cand;
        }
        if (h == nullptr) throw InvalidInput("missing heatmap");

        const auto lows = regions_at(*h, cfg.tau_low, cfg.connectivity);
        const auto highs = regions_at(*h, cfg.tau_high, cfg.connectivity);

        // Subordination by exhaustive subset tests over every (high, low) pair.
        std::vector<std::size_t> owner(highs.size());
        for (std::size_t m = 0; m < highs.size(); ++m) {
            std::size_t hits = 0;
            for (std::size_t n = 0; n < lows.size(); ++n) {
                if (std::includes(lows[n].begin(), lows[n].end(), highs[m].begin(), highs[m].end())) {
                    owner[m] = n;
                    ++hits;
                }
            }
            if (hits != 1) throw InvariantViolation("high region not contained in exactly one low region");
        }

        ClassThresholds rec{static_cast<int>(c), {}, {}, owner};
        for (const auto& l : lows) rec.low_boxes.push_back(box_of(cover(l)));
        for (const auto& hr : highs) rec.high_boxes.push_back(box_of(cover(hr)));
        records.push_back(rec);

        for (std::size_t n = 0; n < lows.size(); ++n) {
            const Rect low = cover(lows[n]);
            const Rect low_r = enlarge(low, cfg.scale, image);
            std::vector<std::size_t> under;
            for (std::size_t m = 0; m < highs.size(); ++m) {
                if (owner[m] == n) under.push_back(m);
            }

            // qualifies[j][p]: proposal p lies between high box j and the scaled low box.
            std::vector<std::vector<bool>> qualifies(under.size(), std::vector<bool>(props.size()));
            for (std::size_t j = 0; j < under.size(); ++j) {
                const Rect hb = cover(highs[under[j]]);
                for (std::size_t p = 0; p < props.size(); ++p) {
                    qualifies[j][p] = inside(props[p], hb) && inside(low_r, props[p]);
                }
            }

            if (under.empty()) {
                clusters.push_back({static_cast<int>(c), n, std::nullopt, {{MemberKind::LowBox, synthetic++, box_of(low)}}});
                continue;
            }
            if (under.size() == 1) {
                Cluster cl{static_cast<int>(c), n, under[0], {{MemberKind::LowBox, synthetic++, box_of(low)}}};
                for (std::size_t p = 0; p < props.size(); ++p) {
                    if (qualifies[0][p]) cl.members.push_back({MemberKind::Proposal, p, proposals[p]});
                }
                clusters.push_back(std::move(cl));
                continue;
            }

            std::vector<Rect> scaled;
            for (std::size_t m : under) scaled.push_back(enlarge(cover(highs[m]), cfg.scale, image));
            for (std::size_t j = 0; j < under.size(); ++j) {
                Cluster cl{static_cast<int>(c), n, under[j], {{MemberKind::ScaledHighBox, synthetic++, box_of(scaled[j])}}};
                for (std::size_t p = 0; p < props.size(); ++p) {
                    if (!qualifies[j][p]) continue;
                    // Keep p here only if no other qualifying cluster beats this one:
                    // a strictly larger IoU, or an equal IoU at a lower index.
                    const double mine = overlap(props[p], scaled[j]);
                    bool keep = true;
                    for (std::size_t o = 0; o < under.size() && keep; ++o) {
                        if (o == j || !qualifies[o][p]) continue;
                        const double other = overlap(props[p], scaled[o]);
                        if (other > mine || (other == mine && o < j)) keep = false;
                    }
                    if (keep) cl.members.push_back({MemberKind::Proposal, p, proposals[p]});
                }
                clusters.push_back(std::move(cl));
            }
        }
    }
    return ClusterSet(proposals.size(), std::move(clusters), std::move(records));
}

double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts, int class_id,
                         double iou_threshold) {
    std::vector<const GroundTruth*> truth;
    for (const GroundTruth& g : gts) {
        if (g.class_id == class_id) truth.push_back(&g);
    }
    if (truth.empty()) return 0.0;

    std::vector<const Detection*> ranked;
    for (const Detection& d : dets) {
        if (d.class_id == class_id) ranked.push_back(&d);
    }
    // Insertion sort keeps equal scores in input order.
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        for (std::size_t j = i; j > 0 && ranked[j]->score > ranked[j - 1]->score; --j) std::swap(ranked[j], ranked[j - 1]);
    }

    auto rect_iou = [](const Box& a, const Box& b) { return overlap(rect_of(a), rect_of(b)); };

    const std::size_t n = ranked.size();
    std::vector<double> recall(n + 1, 0.0), precision(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) {
        // Re-run the greedy matching from scratch on the first k detections.
        std::vector<bool> used(truth.size(), false);
        std::size_t tp = 0;
        for (std::size_t i = 0; i < k; ++i) {
            double best = -1.0;
            std::size_t arg = truth.size();
            for (std::size_t j = 0; j < truth.size(); ++j) {
                if (truth[j]->image_id != ranked[i]->image_id) continue;
                const double v = rect_iou(ranked[i]->box, truth[j]->box);
                if (v > best) {
                    best = v;
                    arg = j;
                }
            }
            if (arg < truth.size() && best >= iou_threshold && !used[arg]) {
                used[arg] = true;
                ++tp;
            }
        }
        recall[k] = static_cast<double>(tp) / static_cast<double>(truth.size());
        precision[k] = static_cast<double>(tp) / static_cast<double>(k);
    }

    double ap = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double step = recall[k] - recall[k - 1];
        if (step <= 0.0) continue;
        double best = 0.0;
        for (std::size_t j = 1; j <= n; ++j) {
            if (recall[j] >= recall[k]) best = std::max(best, precision[j]);
        }
        ap += step * best;
    }
    return ap;
}

}  // namespace dthcp::oracle
