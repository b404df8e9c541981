#include "warpgrid/colormap.hpp"

#include <cmath>

namespace warpgrid {

namespace {

struct Anchor {
    double pos;
    double r, g, b;
};

// Anchor positions and colors are the documented definition of the map.
constexpr Anchor kAnchors[] = {
    {0.00, 10, 10, 60},    // navy
    {0.25, 30, 90, 200},   // blue
    {0.50, 40, 200, 160},  // teal
    {0.75, 245, 200, 40},  // yellow
    {1.00, 230, 30, 30},   // red
};

std::array<std::array<uint8_t, 3>, 256> build() {
    std::array<std::array<uint8_t, 3>, 256> table{};
    for (int i = 0; i < 256; ++i) {
        const double t = i / 255.0;
        size_t seg = 0;
        while (seg + 2 < std::size(kAnchors) && t > kAnchors[seg + 1].pos) ++seg;
        const Anchor& a = kAnchors[seg];
        const Anchor& b = kAnchors[seg + 1];
        const double u = (t - a.pos) / (b.pos - a.pos);
        table[i][0] = static_cast<uint8_t>(std::lround(a.r + u * (b.r - a.r)));
        table[i][1] = static_cast<uint8_t>(std::lround(a.g + u * (b.g - a.g)));
        table[i][2] = static_cast<uint8_t>(std::lround(a.b + u * (b.b - a.b)));
    }
    return table;
}

}  // namespace

const std::array<std::array<uint8_t, 3>, 256>& heat_colormap() {
    static const auto table = build();
    return table;
}

}  // namespace warpgrid
