#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "biome/matrix.hpp"
#include "biome/png.hpp"

namespace biome::plot {

namespace detail {

// 5x7 bitmap glyphs for axis labels; each byte is one row, low 5 bits used.
inline const std::map<char, std::array<unsigned char, 7>>& font() {
    static const std::map<char, std::array<unsigned char, 7>> f = {
        {'a', {0x00, 0x00, 0x0e, 0x01, 0x0f, 0x11, 0x0f}},
        {'b', {0x10, 0x10, 0x1e, 0x11, 0x11, 0x11, 0x1e}},
        {'c', {0x00, 0x00, 0x0e, 0x11, 0x10, 0x11, 0x0e}},
        {'d', {0x01, 0x01, 0x0f, 0x11, 0x11, 0x11, 0x0f}},
        {'e', {0x00, 0x00, 0x0e, 0x11, 0x1f, 0x10, 0x0e}},
        {'f', {0x06, 0x09, 0x08, 0x1c, 0x08, 0x08, 0x08}},
        {'g', {0x00, 0x0f, 0x11, 0x11, 0x0f, 0x01, 0x0e}},
        {'h', {0x10, 0x10, 0x1e, 0x11, 0x11, 0x11, 0x11}},
        {'i', {0x04, 0x00, 0x0c, 0x04, 0x04, 0x04, 0x0e}},
        {'j', {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0c}},
        {'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
        {'l', {0x0c, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
        {'m', {0x00, 0x00, 0x1a, 0x15, 0x15, 0x15, 0x15}},
        {'n', {0x00, 0x00, 0x1e, 0x11, 0x11, 0x11, 0x11}},
        {'o', {0x00, 0x00, 0x0e, 0x11, 0x11, 0x11, 0x0e}},
        {'p', {0x00, 0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10}},
        {'q', {0x00, 0x0f, 0x11, 0x11, 0x0f, 0x01, 0x01}},
        {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
        {'s', {0x00, 0x00, 0x0f, 0x10, 0x0e, 0x01, 0x1e}},
        {'t', {0x08, 0x08, 0x1c, 0x08, 0x08, 0x09, 0x06}},
        {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x11, 0x0f}},
        {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0a, 0x04}},
        {'w', {0x00, 0x00, 0x15, 0x15, 0x15, 0x15, 0x0a}},
        {'x', {0x00, 0x00, 0x11, 0x0a, 0x04, 0x0a, 0x11}},
        {'y', {0x00, 0x11, 0x11, 0x0f, 0x01, 0x11, 0x0e}},
        {'z', {0x00, 0x00, 0x1f, 0x02, 0x04, 0x08, 0x1f}},
        {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
        {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
        {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
        {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
        {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
        {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
        {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
        {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
        {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
        {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
        {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
        {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    };
    return f;
}

struct Canvas {
    int width, height;
    std::vector<unsigned char> rgb;

    Canvas(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 255) {}

    void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const size_t i = (static_cast<size_t>(y) * width + x) * 3;
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }

    void text(int x, int y, const std::string& s, bool vertical = false) {
        int cx = x, cy = y;
        for (char ch : s) {
            auto it = font().find(ch);
            if (it == font().end()) it = font().find(' ');
            for (int r = 0; r < 7; ++r)
                for (int c = 0; c < 5; ++c)
                    if (it->second[static_cast<size_t>(r)] & (1 << (4 - c))) {
                        if (vertical)
                            set(cx + r, cy - c, 0, 0, 0);  // rotated 90 degrees CCW
                        else
                            set(cx + c, cy + r, 0, 0, 0);
                    }
            if (vertical) cy -= 6;
            else cx += 6;
        }
    }
};

// Compact viridis-style colormap from anchor interpolation.
inline void colormap(double t, unsigned char& r, unsigned char& g, unsigned char& b) {
    static const double anchors[][3] = {
        {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
        {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
        {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.478, 0.821, 0.318},
        {0.741, 0.873, 0.150}, {0.993, 0.906, 0.144}};
    t = std::clamp(t, 0.0, 1.0) * 10.0;
    const int i = std::min(static_cast<int>(t), 9);
    const double u = t - i;
    r = static_cast<unsigned char>(255.0 * (anchors[i][0] * (1 - u) + anchors[i + 1][0] * u));
    g = static_cast<unsigned char>(255.0 * (anchors[i][1] * (1 - u) + anchors[i + 1][1] * u));
    b = static_cast<unsigned char>(255.0 * (anchors[i][2] * (1 - u) + anchors[i + 1][2] * u));
}

}  // namespace detail

// Heatmap with labeled axes at fixed canvas dimensions. Row 0 of the data is
// drawn at the bottom (origin lower), so frequency-like axes read upward.
inline void save_heatmap_png(const std::string& path, const Mat& data,
                             const std::string& xlabel, const std::string& ylabel) {
    require(!data.empty(), "plot: empty data");
    constexpr int kPlotW = 512, kPlotH = 384, kLeft = 56, kTop = 12, kBottom = 40, kRight = 12;
    detail::Canvas cv(kLeft + kPlotW + kRight, kTop + kPlotH + kBottom);

    double lo = data.v[0], hi = data.v[0];
    for (double x : data.v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double span = (hi > lo) ? hi - lo : 1.0;
    for (int py = 0; py < kPlotH; ++py) {
        const int r = std::min(data.rows - 1, (kPlotH - 1 - py) * data.rows / kPlotH);
        for (int px = 0; px < kPlotW; ++px) {
            const int c = std::min(data.cols - 1, px * data.cols / kPlotW);
            unsigned char rr, gg, bb;
            detail::colormap((data.at(r, c) - lo) / span, rr, gg, bb);
            cv.set(kLeft + px, kTop + py, rr, gg, bb);
        }
    }
    for (int px = -1; px <= kPlotW; ++px) {
        cv.set(kLeft + px, kTop - 1, 0, 0, 0);
        cv.set(kLeft + px, kTop + kPlotH, 0, 0, 0);
    }
    for (int py = -1; py <= kPlotH; ++py) {
        cv.set(kLeft - 1, kTop + py, 0, 0, 0);
        cv.set(kLeft + kPlotW, kTop + py, 0, 0, 0);
    }
    cv.text(kLeft + kPlotW / 2 - 3 * static_cast<int>(xlabel.size()), kTop + kPlotH + 16, xlabel);
    cv.text(kLeft - 24, kTop + kPlotH / 2 + 3 * static_cast<int>(ylabel.size()), ylabel, true);
    io::write_png_rgb(path, cv.width, cv.height, cv.rgb);
}

// 2-D scatter colored by class label.
inline void save_scatter_png(const std::string& path, const Mat& points, const std::vector<int>& labels,
                             const std::string& xlabel = "component 1",
                             const std::string& ylabel = "component 2") {
    require_shape(points.cols == 2, "plot: scatter wants n x 2 points");
    require(points.rows == static_cast<int>(labels.size()), "plot: labels misaligned");
    constexpr int kPlotW = 480, kPlotH = 480, kLeft = 56, kTop = 12, kBottom = 40, kRight = 12;
    detail::Canvas cv(kLeft + kPlotW + kRight, kTop + kPlotH + kBottom);

    static const unsigned char palette[][3] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                               {214, 39, 40},  {148, 103, 189}, {140, 86, 75}};
    double lo0 = points.at(0, 0), hi0 = lo0, lo1 = points.at(0, 1), hi1 = lo1;
    for (int i = 0; i < points.rows; ++i) {
        lo0 = std::min(lo0, points.at(i, 0));
        hi0 = std::max(hi0, points.at(i, 0));
        lo1 = std::min(lo1, points.at(i, 1));
        hi1 = std::max(hi1, points.at(i, 1));
    }
    const double s0 = hi0 > lo0 ? hi0 - lo0 : 1.0, s1 = hi1 > lo1 ? hi1 - lo1 : 1.0;
    for (int i = 0; i < points.rows; ++i) {
        const int px = kLeft + static_cast<int>((points.at(i, 0) - lo0) / s0 * (kPlotW - 8)) + 4;
        const int py = kTop + kPlotH - 4 - static_cast<int>((points.at(i, 1) - lo1) / s1 * (kPlotH - 8));
        const auto& c = palette[static_cast<size_t>(labels[static_cast<size_t>(i)]) % 6];
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx)
                if (dx * dx + dy * dy <= 4) cv.set(px + dx, py + dy, c[0], c[1], c[2]);
    }
    for (int px = -1; px <= kPlotW; ++px) {
        cv.set(kLeft + px, kTop - 1, 0, 0, 0);
        cv.set(kLeft + px, kTop + kPlotH, 0, 0, 0);
    }
    for (int py = -1; py <= kPlotH; ++py) {
        cv.set(kLeft - 1, kTop + py, 0, 0, 0);
        cv.set(kLeft + kPlotW, kTop + py, 0, 0, 0);
    }
    cv.text(kLeft + kPlotW / 2 - 3 * static_cast<int>(xlabel.size()), kTop + kPlotH + 16, xlabel);
    cv.text(kLeft - 24, kTop + kPlotH / 2 + 3 * static_cast<int>(ylabel.size()), ylabel, true);
    io::write_png_rgb(path, cv.width, cv.height, cv.rgb);
}

}  // namespace biome::plot
