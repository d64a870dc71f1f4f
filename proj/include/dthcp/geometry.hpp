#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dthcp {

/// Axis-aligned box in continuous image coordinates, origin top-left.
/// Always has strictly positive area and finite coordinates; the constructor
/// throws InvalidInput otherwise.
class Box {
public:
    Box(double x1, double y1, double x2, double y2);

    double x1() const { return x1_; }
    double y1() const { return y1_; }
    double x2() const { return x2_; }
    double y2() const { return y2_; }

    double width() const { return x2_ - x1_; }
    double height() const { return y2_ - y1_; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x1_ + x2_); }
    double center_y() const { return 0.5 * (y1_ + y2_); }

    bool operator==(const Box&) const = default;

private:
    double x1_, y1_, x2_, y2_;
};

/// Image extent used for clipping, in pixels.
struct Extent {
    double width = 0;
    double height = 0;
};

double intersection_area(const Box& a, const Box& b);

/// Intersection over union, in [0, 1]. Symmetric, 1 for identical boxes.
double iou(const Box& a, const Box& b);

/// Inclusive containment: shared edges count.
bool contains(const Box& outer, const Box& inner);

/// `candidate` lies spatially between `inner_bound` and `outer_bound`:
/// the candidate covers the inner bound and is covered by the outer bound.
bool between(const Box& candidate, const Box& inner_bound, const Box& outer_bound);

/// Enlarges `b` about its center by `factor` (>= 1) and clips to the extent.
Box scale_box(const Box& b, double factor, Extent bounds);

struct ScoredBox {
    Box box;
    double score;
};

/// Greedy NMS. Boxes are visited in descending score order (ties: lower index
/// first); a box is kept iff its IoU with every kept box is below the threshold.
/// Returns original indices in kept order.
std::vector<std::size_t> nms(std::span<const ScoredBox> boxes, double iou_threshold);

}  // namespace dthcp
