#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dthcp/geometry.hpp"

namespace dthcp {

/// Row-major grid of doubles.
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, double fill = 0.0);
    Grid(int rows, int cols, std::vector<double> values);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return values_.empty(); }

    double at(int r, int c) const { return values_[index(r, c)]; }
    double& at(int r, int c) { return values_[index(r, c)]; }

    std::span<const double> values() const { return values_; }
    double min() const;
    double max() const;

    bool operator==(const Grid&) const = default;

private:
    std::size_t index(int r, int c) const {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> values_;
};

/// Unnormalized per-class activation map at network resolution.
struct ActivationMap {
    int class_id = 0;
    Grid values;
};

/// Per-class heatmap with values in [0, 1].
class Heatmap {
public:
    Heatmap(int class_id, Grid values);

    int class_id() const { return class_id_; }
    const Grid& grid() const { return values_; }
    int rows() const { return values_.rows(); }
    int cols() const { return values_.cols(); }
    double at(int r, int c) const { return values_.at(r, c); }

private:
    int class_id_;
    Grid values_;
};

/// Min-max normalization. A constant map carries no localization signal and
/// maps to all zeros.
Heatmap normalize(const ActivationMap& raw);

/// Corner-aligned bilinear resize to rows x cols.
ActivationMap upsample_bilinear(const ActivationMap& raw, int rows, int cols);

struct Pixel {
    int row = 0;
    int col = 0;
    auto operator<=>(const Pixel&) const = default;
};

enum class Connectivity { Four = 4, Eight = 8 };

class BinaryMask {
public:
    BinaryMask(int rows, int cols);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool test(int r, int c) const { return bits_[static_cast<std::size_t>(r) * cols_ + c] != 0; }
    void set(int r, int c, bool on = true) { bits_[static_cast<std::size_t>(r) * cols_ + c] = on ? 1 : 0; }

private:
    int rows_;
    int cols_;
    std::vector<std::uint8_t> bits_;
};

/// Connected components via two-pass union-find labeling. Each component's
/// pixels are in row-major order; components are ordered by their first pixel
/// in row-major order, i.e. by (min row, then min col within that row).
std::vector<std::vector<Pixel>> connected_components(const BinaryMask& mask, Connectivity conn);

/// Tightest cover of a non-empty pixel set; pixel (row, col) is the unit
/// square [col, col + 1] x [row, row + 1].
Box tight_box(std::span<const Pixel> pixels);

enum class ThresholdLevel { Low, High };

struct ThresholdRegion {
    std::size_t id = 0;
    std::vector<Pixel> pixels;
    Box box{0, 0, 1, 1};
    ThresholdLevel level = ThresholdLevel::Low;
    double threshold = 0.0;
};

/// Components of the mask {v >= tau}.
std::vector<ThresholdRegion> threshold_regions(const Heatmap& h, double tau, ThresholdLevel level,
                                               Connectivity conn = Connectivity::Eight);

/// For each high region, the index of the low region whose pixel set contains it.
struct SubordinateMap {
    std::vector<std::size_t> low_of_high;

    /// Indices of high regions subordinate to low region `low`, ascending.
    std::vector<std::size_t> highs_under(std::size_t low) const;
};

/// Region-level containment, never box containment. Throws InvariantViolation
/// when a high pixel lies outside every low region or the high region straddles
/// two low regions (thresholds not ordered or maps differ).
SubordinateMap subordinate(std::span<const ThresholdRegion> highs, std::span<const ThresholdRegion> lows);

}  // namespace dthcp
