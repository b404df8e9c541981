#include "warpgrid/viz.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "warpgrid/colormap.hpp"
#include "warpgrid/errors.hpp"
#include "warpgrid/io.hpp"
#include "warpgrid/warp.hpp"

namespace fs = std::filesystem;

namespace warpgrid {

VizPaths render_visualizations(const ImageBuffer& image_s, const ImageBuffer& image_t,
                               const GridPrediction& pred, const std::string& out_dir,
                               const std::string& stem) {
    if (!image_s.same_shape(image_t))
        throw std::invalid_argument("render_visualizations: image dims differ");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw IoError("cannot create visualization directory: " + out_dir);

    const int h = image_t.height, w = image_t.width;
    VizPaths paths;
    paths.warped = (fs::path(out_dir) / (stem + "_warped.png")).string();
    paths.checker = (fs::path(out_dir) / (stem + "_checker.png")).string();
    paths.cycle_error = (fs::path(out_dir) / (stem + "_cycle_error.png")).string();
    paths.confidence = (fs::path(out_dir) / (stem + "_confidence.png")).string();

    const ImageBuffer warped = bilinear_sample(image_s, pred.g_st);
    save_image(warped, paths.warped);

    constexpr int kTile = 8;
    ImageBuffer checker = image_t;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (((y / kTile) + (x / kTile)) % 2 == 0)
                for (int c = 0; c < checker.channels; ++c) checker.at(c, y, x) = warped.at(c, y, x);
    save_image(checker, paths.checker);

    // Target-side cycle error through both grids.
    const ImageBuffer cycle = bilinear_sample(bilinear_sample(image_t, pred.g_ts), pred.g_st);
    const auto& cmap = heat_colormap();
    ImageBuffer heat(3, h, w);
    const double scale = 1.0 / std::sqrt(static_cast<double>(image_t.channels));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int c = 0; c < image_t.channels; ++c) {
                const double d = static_cast<double>(image_t.at(c, y, x)) - cycle.at(c, y, x);
                s += d * d;
            }
            const double e = std::clamp(std::sqrt(s) * scale, 0.0, 1.0);
            const int idx = static_cast<int>(std::lround(e * 255.0));
            for (int c = 0; c < 3; ++c) heat.at(c, y, x) = cmap[idx][c] / 255.0f;
        }
    save_image(heat, paths.cycle_error);

    save_confidence(pred.conf_t, paths.confidence);
    return paths;
}

}  // namespace warpgrid
