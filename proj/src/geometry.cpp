#include "dthcp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dthcp/error.hpp"

namespace dthcp {

Box::Box(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2))) {
        throw InvalidInput("box coordinates must be finite");
    }
    if (!(x2 > x1 && y2 > y1)) {
        std::ostringstream os;
        os << "box must have positive area: (" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << ")";
        throw InvalidInput(os.str());
    }
}

double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

double iou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const Box& outer, const Box& inner) {
    return outer.x1() <= inner.x1() && outer.y1() <= inner.y1() && inner.x2() <= outer.x2() &&
           inner.y2() <= outer.y2();
}

bool between(const Box& candidate, const Box& inner_bound, const Box& outer_bound) {
    return contains(candidate, inner_bound) && contains(outer_bound, candidate);
}

Box scale_box(const Box& b, double factor, Extent bounds) {
    if (!(factor >= 1.0) || !std::isfinite(factor)) {
        throw InvalidInput("scale factor must be >= 1");
    }
    // grow each side by half the extra extent; exact identity at factor 1
    const double dx = 0.5 * (factor - 1.0) * b.width();
    const double dy = 0.5 * (factor - 1.0) * b.height();
    return Box(std::max(0.0, b.x1() - dx), std::max(0.0, b.y1() - dy), std::min(bounds.width, b.x2() + dx),
               std::min(bounds.height, b.y2() + dy));
}

std::vector<std::size_t> nms(std::span<const ScoredBox> boxes, double iou_threshold) {
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return boxes[a].score > boxes[b].score;
    });

    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return iou(boxes[idx].box, boxes[k].box) >= iou_threshold;
        });
        if (!suppressed) kept.push_back(idx);
    }
    return kept;
}

}  // namespace dthcp
