#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include "vgiq/dataio.hpp"
#include "vgiq/error.hpp"
#include "vgiq/evaluate.hpp"
#include "vgiq/gpr.hpp"

namespace vgiq {

struct GridShape {
    std::size_t rows = 0;  ///< along latitude
    std::size_t cols = 0;  ///< along longitude
};

[[nodiscard]] inline GridShape grid_shape(const BBox& bbox, double cells_per_degree) {
    bbox.validate();
    if (!(cells_per_degree > 0.0)) throw ConfigError("resolution must be > 0");
    const auto cells = [cells_per_degree](double extent) {
        return static_cast<std::size_t>(std::max(1.0, std::round(extent * cells_per_degree)));
    };
    return {cells(bbox.lat_max - bbox.lat_min), cells(bbox.lon_max - bbox.lon_min)};
}

/// Cell centres, row-major starting at (lat_min, lon_min): latitude is the
/// outer loop, longitude the inner.
[[nodiscard]] inline std::vector<GeoPoint> grid_centers(const BBox& bbox, double cells_per_degree) {
    const auto shape = grid_shape(bbox, cells_per_degree);
    const double dlat = (bbox.lat_max - bbox.lat_min) / static_cast<double>(shape.rows);
    const double dlon = (bbox.lon_max - bbox.lon_min) / static_cast<double>(shape.cols);
    std::vector<GeoPoint> out;
    out.reserve(shape.rows * shape.cols);
    for (std::size_t r = 0; r < shape.rows; ++r) {
        for (std::size_t c = 0; c < shape.cols; ++c) {
            out.push_back({bbox.lat_min + (static_cast<double>(r) + 0.5) * dlat,
                           bbox.lon_min + (static_cast<double>(c) + 0.5) * dlon});
        }
    }
    return out;
}

[[nodiscard]] inline std::vector<GridCell> predict_grid(const GprModel& model, const BBox& bbox,
                                                        double cells_per_degree) {
    const auto centers = grid_centers(bbox, cells_per_degree);
    const auto pred = predict(model, centers);
    std::vector<GridCell> out(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) out[i] = {centers[i], pred[i].mean, pred[i].variance};
    return out;
}

struct Rgb {
    unsigned char r = 0, g = 0, b = 0;
};

/// Linear blue -> red ramp: t = 0 is (0, 0, 255), t = 1 is (255, 0, 0).
[[nodiscard]] inline Rgb color_ramp(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto r = static_cast<unsigned char>(std::lround(255.0 * t));
    return {r, 0, static_cast<unsigned char>(255 - r)};
}

/// Binary PPM (P6) of the grid means, north up, each cell `scale` pixels wide.
/// Colours scale linearly between the grid minimum and maximum.
inline void write_heatmap_ppm(std::ostream& os, std::span<const GridCell> grid, GridShape shape, int scale = 8) {
    if (grid.size() != shape.rows * shape.cols || grid.empty()) throw ConfigError("heatmap: grid/shape mismatch");
    const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end(),
                                              [](const GridCell& a, const GridCell& b) { return a.mean < b.mean; });
    const double span = hi->mean - lo->mean;
    const auto s = static_cast<std::size_t>(std::max(1, scale));
    os << "P6\n" << shape.cols * s << ' ' << shape.rows * s << "\n255\n";
    for (std::size_t r = shape.rows; r-- > 0;) {
        for (std::size_t dy = 0; dy < s; ++dy) {
            for (std::size_t c = 0; c < shape.cols; ++c) {
                const double t = span > 0.0 ? (grid[r * shape.cols + c].mean - lo->mean) / span : 0.5;
                const Rgb px = color_ramp(t);
                for (std::size_t dx = 0; dx < s; ++dx) os.put(static_cast<char>(px.r)).put(static_cast<char>(px.g)).put(static_cast<char>(px.b));
            }
        }
    }
}

/// Bar chart PPM of one histogram per model, stacked vertically.
inline void write_histogram_ppm(std::ostream& os, const EvalReport& report, int bar_width = 12, int panel_height = 80) {
    // common bin range across models
    long long first = 0, last = -1;
    bool any = false;
    for (const auto& m : report.models) {
        if (m.histogram.counts.empty()) continue;
        const long long a = m.histogram.first_bin;
        const long long b = a + static_cast<long long>(m.histogram.counts.size()) - 1;
        first = any ? std::min(first, a) : a;
        last = any ? std::max(last, b) : b;
        any = true;
    }
    if (!any) throw ConfigError("histogram image: no data");
    const auto bins = static_cast<std::size_t>(last - first + 1);
    const auto bw = static_cast<std::size_t>(std::max(1, bar_width));
    const auto ph = static_cast<std::size_t>(std::max(2, panel_height));
    const std::size_t width = bins * bw;
    const std::size_t height = report.models.size() * ph;
    std::vector<Rgb> img(width * height, Rgb{255, 255, 255});
    for (std::size_t p = 0; p < report.models.size(); ++p) {
        const auto& h = report.models[p].histogram;
        std::size_t peak = 1;
        for (auto c : h.counts) peak = std::max(peak, c);
        const Rgb col = color_ramp(report.models.size() > 1 ? static_cast<double>(p) / static_cast<double>(report.models.size() - 1) : 0.0);
        for (std::size_t i = 0; i < h.counts.size(); ++i) {
            const auto bin = static_cast<std::size_t>(h.first_bin - first) + i;
            const auto bar = static_cast<std::size_t>(std::lround(static_cast<double>(h.counts[i]) / static_cast<double>(peak) * static_cast<double>(ph - 2)));
            for (std::size_t y = 0; y < bar; ++y) {
                const std::size_t row = (p + 1) * ph - 1 - y;
                for (std::size_t x = bin * bw + 1; x < (bin + 1) * bw; ++x) img[row * width + x] = col;
            }
        }
        for (std::size_t x = 0; x < width; ++x) img[((p + 1) * ph - 1) * width + x] = Rgb{0, 0, 0};
    }
    os << "P6\n" << width << ' ' << height << "\n255\n";
    for (const auto& px : img) os.put(static_cast<char>(px.r)).put(static_cast<char>(px.g)).put(static_cast<char>(px.b));
}

}  // namespace vgiq
