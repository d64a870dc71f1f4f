#include "dthcp/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "dthcp/error.hpp"

namespace dthcp {

Grid::Grid(int rows, int cols, double fill) : Grid(rows, cols, std::vector<double>()) {
    values_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
}

Grid::Grid(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows < 1 || cols < 1) throw InvalidInput("grid dimensions must be positive");
    if (!values_.empty() && values_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw InvalidInput("grid value count does not match dimensions");
    }
    if (std::any_of(values_.begin(), values_.end(), [](double v) { return !std::isfinite(v); })) {
        throw InvalidInput("grid values must be finite");
    }
}

double Grid::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Grid::max() const { return *std::max_element(values_.begin(), values_.end()); }

Heatmap::Heatmap(int class_id, Grid values) : class_id_(class_id), values_(std::move(values)) {
    if (values_.empty()) throw InvalidInput("heatmap is empty");
    for (double v : values_.values()) {
        if (v < 0.0 || v > 1.0) throw InvalidInput("heatmap values must lie in [0, 1]");
    }
}

Heatmap normalize(const ActivationMap& raw) {
    const Grid& g = raw.values;
    const double lo = g.min();
    const double hi = g.max();
    Grid out(g.rows(), g.cols(), 0.0);
    if (hi > lo) {
        const double span = hi - lo;
        for (int r = 0; r < g.rows(); ++r) {
            for (int c = 0; c < g.cols(); ++c) {
                out.at(r, c) = std::clamp((g.at(r, c) - lo) / span, 0.0, 1.0);
            }
        }
    }
    return Heatmap(raw.class_id, std::move(out));
}

ActivationMap upsample_bilinear(const ActivationMap& raw, int rows, int cols) {
    if (rows < 1 || cols < 1) throw InvalidInput("target dimensions must be positive");
    const Grid& src = raw.values;
    Grid out(rows, cols, 0.0);

    // Corner-aligned: output index i samples source coordinate i * (n_src - 1) / (n_out - 1).
    auto source_coord = [](int i, int n_out, int n_src) {
        if (n_out == 1 || n_src == 1) return 0.0;
        return static_cast<double>(i) * static_cast<double>(n_src - 1) / static_cast<double>(n_out - 1);
    };

    for (int r = 0; r < rows; ++r) {
        const double sy = source_coord(r, rows, src.rows());
        const int y0 = std::min(static_cast<int>(std::floor(sy)), src.rows() - 1);
        const int y1 = std::min(y0 + 1, src.rows() - 1);
        const double fy = sy - y0;
        for (int c = 0; c < cols; ++c) {
            const double sx = source_coord(c, cols, src.cols());
            const int x0 = std::min(static_cast<int>(std::floor(sx)), src.cols() - 1);
            const int x1 = std::min(x0 + 1, src.cols() - 1);
            const double fx = sx - x0;
            const double top = (1.0 - fx) * src.at(y0, x0) + fx * src.at(y0, x1);
            const double bottom = (1.0 - fx) * src.at(y1, x0) + fx * src.at(y1, x1);
            out.at(r, c) = (1.0 - fy) * top + fy * bottom;
        }
    }
    return ActivationMap{raw.class_id, std::move(out)};
}

BinaryMask::BinaryMask(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) throw InvalidInput("mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0);
}

namespace {

class DisjointSet {
public:
    std::size_t make() {
        parent_.push_back(parent_.size());
        return parent_.size() - 1;
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // Keep the smaller label as root so roots follow scan order.
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

constexpr std::size_t kNoLabel = static_cast<std::size_t>(-1);

}  // namespace

std::vector<std::vector<Pixel>> connected_components(const BinaryMask& mask, Connectivity conn) {
    const int rows = mask.rows();
    const int cols = mask.cols();
    std::vector<std::size_t> labels(static_cast<std::size_t>(rows) * cols, kNoLabel);
    DisjointSet sets;

    auto label_at = [&](int r, int c) -> std::size_t {
        if (r < 0 || c < 0 || c >= cols) return kNoLabel;
        return labels[static_cast<std::size_t>(r) * cols + c];
    };

    // First pass: provisional labels from already-visited neighbours.
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!mask.test(r, c)) continue;
            std::size_t neighbours[4] = {label_at(r, c - 1), label_at(r - 1, c), kNoLabel, kNoLabel};
            if (conn == Connectivity::Eight) {
                neighbours[2] = label_at(r - 1, c - 1);
                neighbours[3] = label_at(r - 1, c + 1);
            }
            std::size_t own = kNoLabel;
            for (std::size_t n : neighbours) {
                if (n == kNoLabel) continue;
                if (own == kNoLabel) {
                    own = n;
                } else {
                    sets.unite(own, n);
                }
            }
            if (own == kNoLabel) own = sets.make();
            labels[static_cast<std::size_t>(r) * cols + c] = own;
        }
    }

    // Second pass: resolve roots and gather pixels in scan order.
    std::unordered_map<std::size_t, std::size_t> component_of_root;
    std::vector<std::vector<Pixel>> components;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::size_t l = labels[static_cast<std::size_t>(r) * cols + c];
            if (l == kNoLabel) continue;
            const std::size_t root = sets.find(l);
            auto [it, inserted] = component_of_root.try_emplace(root, components.size());
            if (inserted) components.emplace_back();
            components[it->second].push_back(Pixel{r, c});
        }
    }
    return components;
}

Box tight_box(std::span<const Pixel> pixels) {
    if (pixels.empty()) throw InvalidInput("tight box of empty pixel set");
    int r0 = pixels[0].row, r1 = pixels[0].row, c0 = pixels[0].col, c1 = pixels[0].col;
    for (const Pixel& p : pixels) {
        r0 = std::min(r0, p.row);
        r1 = std::max(r1, p.row);
        c0 = std::min(c0, p.col);
        c1 = std::max(c1, p.col);
    }
    return Box(c0, r0, c1 + 1.0, r1 + 1.0);
}

std::vector<ThresholdRegion> threshold_regions(const Heatmap& h, double tau, ThresholdLevel level,
                                               Connectivity conn) {
    BinaryMask mask(h.rows(), h.cols());
    for (int r = 0; r < h.rows(); ++r) {
        for (int c = 0; c < h.cols(); ++c) {
            if (h.at(r, c) >= tau) mask.set(r, c);
        }
    }
    auto components = connected_components(mask, conn);
    std::vector<ThresholdRegion> regions;
    regions.reserve(components.size());
    for (auto& pixels : components) {
        ThresholdRegion region;
        region.id = regions.size();
        region.box = tight_box(pixels);
        region.pixels = std::move(pixels);
        region.level = level;
        region.threshold = tau;
        regions.push_back(std::move(region));
    }
    return regions;
}

std::vector<std::size_t> SubordinateMap::highs_under(std::size_t low) const {
    std::vector<std::size_t> out;
    for (std::size_t h = 0; h < low_of_high.size(); ++h) {
        if (low_of_high[h] == low) out.push_back(h);
    }
    return out;
}

SubordinateMap subordinate(std::span<const ThresholdRegion> highs, std::span<const ThresholdRegion> lows) {
    auto key = [](const Pixel& p) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.row)) << 32) |
               static_cast<std::uint32_t>(p.col);
    };
    std::unordered_map<std::uint64_t, std::size_t> low_of_pixel;
    for (std::size_t n = 0; n < lows.size(); ++n) {
        for (const Pixel& p : lows[n].pixels) low_of_pixel.emplace(key(p), n);
    }

    SubordinateMap map;
    map.low_of_high.reserve(highs.size());
    for (std::size_t m = 0; m < highs.size(); ++m) {
        std::size_t owner = kNoLabel;
        for (const Pixel& p : highs[m].pixels) {
            auto it = low_of_pixel.find(key(p));
            if (it == low_of_pixel.end()) {
                std::ostringstream os;
                os << "high region " << m << " pixel (" << p.row << ", " << p.col << ") lies in no low region";
                throw InvariantViolation(os.str());
            }
            if (owner == kNoLabel) {
                owner = it->second;
            } else if (owner != it->second) {
                throw InvariantViolation("high region straddles two low regions");
            }
        }
        if (owner == kNoLabel) throw InvariantViolation("high region has no pixels");
        map.low_of_high.push_back(owner);
    }
    return map;
}

}  // namespace dthcp
