#pragma once

#include <map>
#include <string>

#include "warpgrid/features.hpp"
#include "warpgrid/types.hpp"

namespace warpgrid {

// Loss coefficients and optimizer defaults. All reductions in this module are
// means over masked pixels, which keeps these coefficients resolution-independent.
struct LossWeights {
    double dense = 10000.0;
    double sparse = 0.1;
    double reconstruction = 100.0;
    double matching = 2000.0;
    double smooth = 1000.0;
    double uncertainty = 0.01;
    double lambda_conf = 0.1;
    double learning_rate = 0.0001;
};

// Value plus gradients for every optimized quantity a loss touches. Gradient
// containers are allocated zero-filled only by the ops that produce them;
// SamplingGrid here is used as a plain 2-plane float buffer.
struct LossReport {
    double value = 0.0;
    bool degenerate = false;  // empty mask / empty keypoint set hit
    std::map<std::string, double> terms;    // per-term raw values (total_objective)
    std::map<std::string, double> weights;  // per-term active weights (total_objective)
    SamplingGrid d_grid_st, d_grid_ts;
    std::vector<float> d_conf_s, d_conf_t;  // H*W each
};

// Confidence-weighted feature distance between each image and the other
// image warped toward it, masked per side.
LossReport loss_matching(const ImageBuffer& image_s, const ImageBuffer& image_t,
                         const SamplingGrid& g_st, const SamplingGrid& g_ts,
                         const ConfidenceMap& conf_s, const ConfidenceMap& conf_t,
                         const Mask& mask_s, const Mask& mask_t, const FeatureExtractor& extractor);

// Confidence-weighted intensity distance between each image and its
// round-trip (warp there and back) reconstruction.
LossReport loss_reconstruction(const ImageBuffer& image_s, const ImageBuffer& image_t,
                               const SamplingGrid& g_st, const SamplingGrid& g_ts,
                               const ConfidenceMap& conf_s, const ConfidenceMap& conf_t,
                               const Mask& mask_s, const Mask& mask_t);

// Per-pixel cycle error, its min-max normalization over the mask, and the
// reference confidence 1 - e*. When masked errors are constant, e* = 0 and
// confidence = 1 everywhere (uniform error carries no ranking information).
struct ReferenceConfidence {
    ErrorMap error;        // raw per-pixel L2 across channels
    ErrorMap normalized;   // e*, clamped to [0,1]
    ConfidenceMap confidence;
};
ReferenceConfidence reference_confidence(const ImageBuffer& image, const ImageBuffer& image_cycle,
                                         const Mask& mask);

// L1 pull of predicted confidence toward the (stop-gradient) reference, minus
// a lambda_conf bonus for being confident. Gradient flows to predictions only;
// the L1 subgradient at exact equality is 0.
LossReport loss_uncertainty(const ConfidenceMap& ref_s, const ConfidenceMap& ref_t,
                            const ConfidenceMap& conf_s, const ConfidenceMap& conf_t,
                            const Mask& mask_s, const Mask& mask_t, double lambda_conf);

// Mean squared first difference of the displacement field (default), or of the
// raw grid (literal). The displacement variant does not penalize rigid
// translations; gradient lands in d_grid_st.
enum class SmoothnessMode { displacement, literal };
LossReport loss_smoothness(const SamplingGrid& grid, SmoothnessMode mode = SmoothnessMode::displacement);

// Mean squared coordinate error over visible pixels and both planes.
LossReport loss_dense_supervised(const SamplingGrid& predicted, const SamplingGrid& ground_truth,
                                 const Mask& visibility);

// For each visible keypoint, the predicted counterpart is read by sampling the
// opposite-direction grid at the keypoint's normalized location; squared error
// in normalized units, mean over keypoints and coordinates, summed over the
// two directions.
LossReport loss_sparse_keypoints(const SamplingGrid& g_st, const SamplingGrid& g_ts,
                                 const KeypointSet& keypoints);

// Progressive recipe stages; every stage keeps the losses of the previous one.
enum class Stage {
    dense_pretrain = 1,     // dense + smooth
    sparse_adapt = 2,       // + sparse keypoints on label-sparse pairs
    matching_refine = 3,    // + matching + reconstruction
    uncertainty_learning = 4  // + uncertainty
};

Stage stage_from_name(const std::string& name);  // throws ConfigError
std::string stage_name(Stage stage);

// One pair plus whatever labels it carries. Dense labels (grids + visibility)
// and sparse labels (keypoints) may be present independently.
struct PairSample {
    const ImageBuffer* image_s = nullptr;
    const ImageBuffer* image_t = nullptr;
    const Mask* mask_s = nullptr;
    const Mask* mask_t = nullptr;
    const SamplingGrid* gt_g_st = nullptr;
    const SamplingGrid* gt_g_ts = nullptr;
    const Mask* vis_s = nullptr;
    const Mask* vis_t = nullptr;
    const KeypointSet* keypoints = nullptr;
};

struct GridPrediction {
    SamplingGrid g_st, g_ts;
    ConfidenceMap conf_s, conf_t;
};

struct ObjectiveOptions {
    // When set, the matching/reconstruction confidence weights are treated as
    // stop-gradient and only the uncertainty term drives confidence updates.
    // Values are unaffected.
    bool confidence_from_uncertainty_only = false;
};

// Stage-gated weighted sum of the individual ops above, with combined
// gradients. Per-term raw values land in report.terms and the applied
// weights in report.weights, so the total is their dot product.
LossReport total_objective(Stage stage, const GridPrediction& prediction, const PairSample& pair,
                           const LossWeights& weights, const FeatureExtractor& extractor,
                           const ObjectiveOptions& options = {});

}  // namespace warpgrid
