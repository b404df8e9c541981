#include "warpgrid/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace warpgrid {

namespace {

// Normalized [-1,1] -> pixel coordinate under align-corners, with snapping so
// that stored f32 identity coordinates land exactly on pixel centers.
inline double unnormalize(float coord, int extent) {
    double p = (static_cast<double>(coord) + 1.0) * 0.5 * (extent - 1);
    const double r = std::round(p);
    if (std::abs(p - r) < kSnapEps) p = r;
    return p;
}

inline bool in_bounds(int v, int extent) { return v >= 0 && v < extent; }

struct TapSet {
    int x0, y0;      // top-left tap
    double fx, fy;   // fractional offsets
    double w00, w01, w10, w11;
    bool b00, b01, b10, b11;  // tap validity under zero padding
};

inline TapSet make_taps(float gx, float gy, int src_w, int src_h) {
    const double px = unnormalize(gx, src_w);
    const double py = unnormalize(gy, src_h);
    TapSet t;
    t.x0 = static_cast<int>(std::floor(px));
    t.y0 = static_cast<int>(std::floor(py));
    t.fx = px - t.x0;
    t.fy = py - t.y0;
    t.w00 = (1.0 - t.fx) * (1.0 - t.fy);
    t.w01 = t.fx * (1.0 - t.fy);
    t.w10 = (1.0 - t.fx) * t.fy;
    t.w11 = t.fx * t.fy;
    t.b00 = in_bounds(t.x0, src_w) && in_bounds(t.y0, src_h);
    t.b01 = in_bounds(t.x0 + 1, src_w) && in_bounds(t.y0, src_h);
    t.b10 = in_bounds(t.x0, src_w) && in_bounds(t.y0 + 1, src_h);
    t.b11 = in_bounds(t.x0 + 1, src_w) && in_bounds(t.y0 + 1, src_h);
    return t;
}

}  // namespace

ImageBuffer bilinear_sample(const ImageBuffer& image, const SamplingGrid& grid) {
    if (image.channels < 1 || image.height < 1 || image.width < 1)
        throw std::invalid_argument("bilinear_sample: empty image");
    if (grid.height < 1 || grid.width < 1)
        throw std::invalid_argument("bilinear_sample: empty grid");

    ImageBuffer out(image.channels, grid.height, grid.width);
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const TapSet t = make_taps(grid.x(r, c), grid.y(r, c), image.width, image.height);
            for (int ch = 0; ch < image.channels; ++ch) {
                double acc = 0.0;
                if (t.b00) acc += t.w00 * image.at(ch, t.y0, t.x0);
                if (t.b01) acc += t.w01 * image.at(ch, t.y0, t.x0 + 1);
                if (t.b10) acc += t.w10 * image.at(ch, t.y0 + 1, t.x0);
                if (t.b11) acc += t.w11 * image.at(ch, t.y0 + 1, t.x0 + 1);
                out.at(ch, r, c) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

WarpGradients bilinear_sample_backward(const ImageBuffer& image, const SamplingGrid& grid,
                                       const ImageBuffer& upstream) {
    if (upstream.channels != image.channels || upstream.height != grid.height ||
        upstream.width != grid.width)
        throw std::invalid_argument("bilinear_sample_backward: upstream shape mismatch");

    WarpGradients g;
    g.d_grid = SamplingGrid(grid.height, grid.width);
    g.d_image = ImageBuffer(image.channels, image.height, image.width);

    const double sx = 0.5 * (image.width - 1);   // d px / d x_norm
    const double sy = 0.5 * (image.height - 1);  // d py / d y_norm

    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const TapSet t = make_taps(grid.x(r, c), grid.y(r, c), image.width, image.height);
            double gpx = 0.0, gpy = 0.0;
            for (int ch = 0; ch < image.channels; ++ch) {
                const double up = upstream.at(ch, r, c);
                if (up == 0.0) continue;
                const double v00 = t.b00 ? image.at(ch, t.y0, t.x0) : 0.0;
                const double v01 = t.b01 ? image.at(ch, t.y0, t.x0 + 1) : 0.0;
                const double v10 = t.b10 ? image.at(ch, t.y0 + 1, t.x0) : 0.0;
                const double v11 = t.b11 ? image.at(ch, t.y0 + 1, t.x0 + 1) : 0.0;
                // d out / d fx and d out / d fy of the padded interpolant.
                gpx += up * ((1.0 - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
                gpy += up * ((1.0 - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
                if (t.b00) g.d_image.at(ch, t.y0, t.x0) += static_cast<float>(up * t.w00);
                if (t.b01) g.d_image.at(ch, t.y0, t.x0 + 1) += static_cast<float>(up * t.w01);
                if (t.b10) g.d_image.at(ch, t.y0 + 1, t.x0) += static_cast<float>(up * t.w10);
                if (t.b11) g.d_image.at(ch, t.y0 + 1, t.x0 + 1) += static_cast<float>(up * t.w11);
            }
            g.d_grid.x(r, c) = static_cast<float>(gpx * sx);
            g.d_grid.y(r, c) = static_cast<float>(gpy * sy);
        }
    }
    return g;
}

SamplingGrid compose_grids(const SamplingGrid& g_first, const SamplingGrid& g_second) {
    if (!g_first.same_shape(g_second))
        throw std::invalid_argument("compose_grids: dimension mismatch");

    constexpr float kSentinel = 2.0f;
    SamplingGrid out(g_first.height, g_first.width);
    for (int r = 0; r < g_second.height; ++r) {
        for (int c = 0; c < g_second.width; ++c) {
            if (!g_second.in_range(r, c)) {
                out.x(r, c) = kSentinel;
                out.y(r, c) = kSentinel;
                continue;
            }
            const TapSet t = make_taps(g_second.x(r, c), g_second.y(r, c), g_first.width, g_first.height);
            double ax = 0.0, ay = 0.0;
            if (t.b00) { ax += t.w00 * g_first.x(t.y0, t.x0); ay += t.w00 * g_first.y(t.y0, t.x0); }
            if (t.b01) { ax += t.w01 * g_first.x(t.y0, t.x0 + 1); ay += t.w01 * g_first.y(t.y0, t.x0 + 1); }
            if (t.b10) { ax += t.w10 * g_first.x(t.y0 + 1, t.x0); ay += t.w10 * g_first.y(t.y0 + 1, t.x0); }
            if (t.b11) { ax += t.w11 * g_first.x(t.y0 + 1, t.x0 + 1); ay += t.w11 * g_first.y(t.y0 + 1, t.x0 + 1); }
            out.x(r, c) = static_cast<float>(ax);
            out.y(r, c) = static_cast<float>(ay);
        }
    }
    return out;
}

ImageBuffer resize_image(const ImageBuffer& image, int height, int width) {
    if (height == image.height && width == image.width) return image;
    return bilinear_sample(image, identity_grid(height, width));
}

SamplingGrid resize_field(const SamplingGrid& field, int height, int width) {
    if (height == field.height && width == field.width) return field;
    ImageBuffer as_image(2, field.height, field.width);
    as_image.data = field.coords;
    const ImageBuffer resized = resize_image(as_image, height, width);
    SamplingGrid out(height, width);
    out.coords = resized.data;
    return out;
}

Mask resize_mask(const Mask& mask, int height, int width) {
    if (height == mask.height && width == mask.width) return mask;
    ImageBuffer as_image(1, mask.height, mask.width);
    for (size_t i = 0; i < mask.data.size(); ++i) as_image.data[i] = mask.data[i] ? 1.0f : 0.0f;
    const ImageBuffer resized = resize_image(as_image, height, width);
    Mask out(height, width);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = resized.data[i] >= 0.5f ? 1 : 0;
    return out;
}

}  // namespace warpgrid
