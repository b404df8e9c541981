#pragma once

#include "warpgrid/types.hpp"

namespace warpgrid {

// Differentiable bilinear warp W(image, grid) under align-corners with zero
// padding: each of the four taps contributes only while it lies inside the
// source image, so fully out-of-range samples produce 0.
//
// Sample coordinates within kSnapEps pixels of an integer are snapped onto it,
// which makes warping by the identity grid (and grid composition with the
// identity) exact despite f32 coordinate rounding.
inline constexpr double kSnapEps = 1e-4;

// Output has the grid's spatial dims and the image's channel count.
ImageBuffer bilinear_sample(const ImageBuffer& image, const SamplingGrid& grid);

// Gradients of bilinear_sample contracted with an upstream cotangent.
struct WarpGradients {
    SamplingGrid d_grid;   // dL/d(grid coords), 2 x Ho x Wo
    ImageBuffer d_image;   // dL/d(source intensities), C x Hi x Wi
};

// upstream must match the forward output shape (C x Ho x Wo). Gradients are
// zero wherever taps fall outside the source (zero padding).
WarpGradients bilinear_sample_backward(const ImageBuffer& image, const SamplingGrid& grid,
                                       const ImageBuffer& upstream);

// Grid-level counterpart of double warping: samples g_first's coordinate
// planes at g_second's positions, so warping by the result approximates
// warping by g_first then g_second. Out-of-range compositions are marked with
// the sentinel coordinate 2.0 on both planes. Approximate under interpolation;
// losses double-warp literally instead of composing.
SamplingGrid compose_grids(const SamplingGrid& g_first, const SamplingGrid& g_second);

// Align-corners bilinear resize (image or coordinate/displacement field).
// Displacements are in normalized units, so resizing needs no value scaling.
ImageBuffer resize_image(const ImageBuffer& image, int height, int width);
SamplingGrid resize_field(const SamplingGrid& field, int height, int width);
Mask resize_mask(const Mask& mask, int height, int width);

}  // namespace warpgrid
