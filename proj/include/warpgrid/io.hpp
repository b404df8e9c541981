#pragma once

#include <string>

#include "warpgrid/types.hpp"

namespace warpgrid {

// PNG decode. Accepts 8- or 16-bit gray / gray+alpha / RGB / RGBA; intensities
// are scaled to [0,1] and the channel count is preserved. Other bit depths and
// palette images raise FormatError::Code::unsupported; corrupt streams raise
// FormatError::Code::malformed; a missing file raises IoError.
ImageBuffer load_image(const std::string& path);

// PNG encode at the given bit depth (8 or 16). Values are clamped to [0,1]
// and rounded to the nearest code, so save/load round-trips are idempotent
// at the stored depth.
void save_image(const ImageBuffer& image, const std::string& path, int bit_depth = 8);

// Masks ride on the same PNG path as 0/255 grayscale.
Mask load_mask(const std::string& path);
void save_mask(const Mask& mask, const std::string& path);

ConfidenceMap load_confidence(const std::string& path);
void save_confidence(const ConfidenceMap& map, const std::string& path);

// "WGRD" grid container: magic, u32 version=1, u32 H, u32 W, then 2*H*W
// little-endian f32 (x-plane then y-plane, row-major). Round-trip is bit-exact.
void save_grid(const SamplingGrid& grid, const std::string& path);
SamplingGrid load_grid(const std::string& path);

// Keypoints as a JSON array of [x_src, y_src, x_tgt, y_tgt, visible] records.
void save_keypoints(const KeypointSet& kps, const std::string& path);
KeypointSet load_keypoints(const std::string& path);

}  // namespace warpgrid
