#include "warpgrid/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace warpgrid {

ImageBuffer::ImageBuffer(int c, int h, int w, float fill)
    : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

SamplingGrid::SamplingGrid(int h, int w, float fill)
    : height(h), width(w), coords(2 * static_cast<size_t>(h) * w, fill) {}

Mask::Mask(int h, int w, uint8_t fill) : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

size_t Mask::count() const {
    size_t n = 0;
    for (uint8_t v : data) n += v;
    return n;
}

ConfidenceMap::ConfidenceMap(int h, int w, float fill)
    : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

ErrorMap::ErrorMap(int h, int w, float fill)
    : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

SamplingGrid identity_grid(int height, int width) {
    if (height < 2 || width < 2)
        throw std::invalid_argument("identity_grid: dimensions must be >= 2");
    SamplingGrid g(height, width);
    for (int r = 0; r < height; ++r) {
        const float gy = 2.0f * static_cast<float>(r) / static_cast<float>(height - 1) - 1.0f;
        for (int c = 0; c < width; ++c) {
            const float gx = 2.0f * static_cast<float>(c) / static_cast<float>(width - 1) - 1.0f;
            g.x(r, c) = gx;
            g.y(r, c) = gy;
        }
    }
    return g;
}

bool all_finite(const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float f) { return std::isfinite(f); });
}

}  // namespace warpgrid
