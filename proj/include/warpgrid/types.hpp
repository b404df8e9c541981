#pragma once

#include <cstdint>
#include <vector>

namespace warpgrid {

// C x H x W image, row-major within each channel plane, intensities in [0,1].
struct ImageBuffer {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;  // size = channels*height*width

    ImageBuffer() = default;
    ImageBuffer(int c, int h, int w, float fill = 0.0f);

    float at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    bool same_shape(const ImageBuffer& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

// 2 x H x W field of normalized coordinates: plane 0 = x, plane 1 = y.
// Under align-corners, -1/+1 are the centers of the first/last pixels.
// Values outside [-1,1] encode out-of-range (cross-image invisibility).
struct SamplingGrid {
    int height = 0;
    int width = 0;
    std::vector<float> coords;  // size = 2*height*width, x-plane then y-plane

    SamplingGrid() = default;
    SamplingGrid(int h, int w, float fill = 0.0f);

    float x(int r, int c) const { return coords[static_cast<size_t>(r) * width + c]; }
    float y(int r, int c) const { return coords[pixel_count() + static_cast<size_t>(r) * width + c]; }
    float& x(int r, int c) { return coords[static_cast<size_t>(r) * width + c]; }
    float& y(int r, int c) { return coords[pixel_count() + static_cast<size_t>(r) * width + c]; }

    bool in_range(int r, int c) const {
        const float gx = x(r, c), gy = y(r, c);
        return gx >= -1.0f && gx <= 1.0f && gy >= -1.0f && gy <= 1.0f;
    }

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    bool same_shape(const SamplingGrid& o) const { return height == o.height && width == o.width; }
};

// Canonical grid: pixel (r,c) maps to x = 2c/(W-1) - 1, y = 2r/(H-1) - 1.
// Throws std::invalid_argument for dimensions < 2.
SamplingGrid identity_grid(int height, int width);

// H x W binary mask stored as 0/1 bytes.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    Mask() = default;
    Mask(int h, int w, uint8_t fill = 0);

    uint8_t at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
    uint8_t& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }

    size_t count() const;  // number of set pixels
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    bool same_shape(const Mask& o) const { return height == o.height && width == o.width; }
};

// H x W map of per-pixel confidences in [0,1].
struct ConfidenceMap {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    ConfidenceMap() = default;
    ConfidenceMap(int h, int w, float fill = 0.0f);

    float at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
    float& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// H x W map of non-negative per-pixel errors.
struct ErrorMap {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    ErrorMap() = default;
    ErrorMap(int h, int w, float fill = 0.0f);

    float at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
    float& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// One annotated correspondence, pixel units.
struct Keypoint {
    float x_src = 0, y_src = 0;
    float x_tgt = 0, y_tgt = 0;
    bool visible = true;
};
using KeypointSet = std::vector<Keypoint>;

// True when every buffer entry is finite.
bool all_finite(const std::vector<float>& v);

}  // namespace warpgrid
