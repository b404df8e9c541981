#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "warpgrid/types.hpp"

namespace warpgrid {

// Radial-basis control-point displacements added on top of the affine part.
// stiffness scales the kernel width: stiffer fields bend less.
struct NonrigidSpec {
    struct ControlPoint {
        float cx = 0, cy = 0;  // normalized center
        float dx = 0, dy = 0;  // normalized displacement
    };
    std::vector<ControlPoint> points;
    float stiffness = 1.0f;
};

// Ground-truth warp: rotation/scale/translation in normalized coordinates
// about the image center, plus an optional nonrigid component.
struct WarpSpec {
    float rotation = 0.0f;  // radians
    float scale_x = 1.0f, scale_y = 1.0f;          // in [0.5, 2]
    float translate_x = 0.0f, translate_y = 0.0f;  // |.| <= 0.5 normalized
    std::optional<NonrigidSpec> nonrigid;          // displacement magnitude <= 0.3
    uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument on bound violations
};

// Forward map x_target = T(x_source) evaluated in normalized coordinates.
void apply_warp(const WarpSpec& spec, float x, float y, float& out_x, float& out_y);

enum class TextureKind { blobs, value_noise, checker };
TextureKind texture_from_name(const std::string& name);  // throws ConfigError
std::string texture_name(TextureKind kind);

// Deterministic RGB texture with locally discriminative structure. Minimum
// size 8x8.
ImageBuffer generate_texture(int height, int width, TextureKind kind, uint64_t seed);

// Ground-truth bidirectional grids for a warp. g_ts holds T at source pixels;
// g_st holds T^-1 at target pixels (affine part inverted analytically, the
// nonrigid part by fixed-point iteration, <= 50 steps to 1e-5). Pixels whose
// inversion diverged carry the sentinel coordinate 2.0 and a zero in
// `invertible`. Throws on |det| < 1e-6 or > 20% divergence.
struct WarpGrids {
    SamplingGrid g_st, g_ts;
    Mask invertible;  // target-side convergence flags
};
WarpGrids grids_from_warp(const WarpSpec& spec, int height, int width);

struct SyntheticPair {
    ImageBuffer image_s, image_t;
    Mask mask_s, mask_t;
    SamplingGrid g_st, g_ts;  // ground truth
    Mask vis_s, vis_t;        // in-range and unoccluded
    KeypointSet keypoints;
    uint64_t seed = 0;
};

// Builds the target by warping the source, pastes solid occluder patches over
// roughly occlusion_fraction of the target mask, and derives visibility and
// exact keypoint correspondences from the grids.
SyntheticPair make_pair(const ImageBuffer& texture, const WarpSpec& spec, float occlusion_fraction,
                        uint64_t seed, int keypoint_count = 16);

// Dataset generation config; ranges are sampled per pair from the pair seed.
struct SynthConfig {
    int image_size = 64;
    TextureKind texture = TextureKind::blobs;
    float occlusion_fraction = 0.0f;
    float rotation_max_deg = 30.0f;
    float scale_min = 0.8f, scale_max = 1.25f;
    float translation_max = 0.2f;
    int nonrigid_points = 0;          // 0 disables the nonrigid component
    float nonrigid_magnitude = 0.0f;  // max control-point displacement
    int keypoints = 16;
    uint64_t seed = 0;
};

WarpSpec sample_warp_spec(const SynthConfig& config, uint64_t pair_seed);

// Writes <id>_{src,tgt,mask_s,mask_t,vis_s,vis_t}.png, <id>_{gst,gts}.wgrd,
// <id>_kps.json per pair plus manifest.json; returns the manifest path.
// Regeneration from a manifest is bit-identical.
std::string generate_dataset(int count, const SynthConfig& config, const std::string& out_dir);
std::string regenerate_from_manifest(const std::string& manifest_path, const std::string& out_dir);

// Manifest access for solvers/metrics.
struct PairFiles {
    std::string id;
    uint64_t seed = 0;
    WarpSpec spec;
};
struct DatasetManifest {
    SynthConfig config;
    std::vector<PairFiles> pairs;
};
DatasetManifest load_manifest(const std::string& manifest_path);

struct LoadedPair {
    std::string id;
    ImageBuffer image_s, image_t;
    Mask mask_s, mask_t, vis_s, vis_t;
    SamplingGrid gt_g_st, gt_g_ts;
    KeypointSet keypoints;
};
LoadedPair load_pair(const std::string& dir, const std::string& id);

}  // namespace warpgrid
