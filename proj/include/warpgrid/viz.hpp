#pragma once

#include <string>

#include "warpgrid/losses.hpp"
#include "warpgrid/types.hpp"

namespace warpgrid {

// Emitted artifacts (fixed filenames under out_dir):
//   <stem>_warped.png      - source warped into the target frame
//   <stem>_checker.png     - 8x8 checkerboard blend of warped vs target
//   <stem>_cycle_error.png - target-side cycle-error heatmap; the per-pixel
//                            L2 error scaled by 1/sqrt(channels) indexes the
//                            fixed 256-entry colormap directly
//   <stem>_confidence.png  - target-side confidence, 8-bit grayscale
struct VizPaths {
    std::string warped, checker, cycle_error, confidence;
};

VizPaths render_visualizations(const ImageBuffer& image_s, const ImageBuffer& image_t,
                               const GridPrediction& pred, const std::string& out_dir,
                               const std::string& stem);

}  // namespace warpgrid
