#pragma once

#include <array>
#include <cstdint>

namespace warpgrid {

// Fixed 256-entry RGB colormap for error heatmaps, linearly interpolated
// between five anchors (navy, blue, teal, yellow, red). Entry 0 is the
// colormap origin used for zero error.
const std::array<std::array<uint8_t, 3>, 256>& heat_colormap();

}  // namespace warpgrid
