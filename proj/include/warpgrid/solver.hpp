#pragma once

#include <vector>

#include "warpgrid/losses.hpp"

namespace warpgrid {

struct StageBudget {
    Stage stage = Stage::matching_refine;
    int iterations = 0;
};

// Per-pair direct optimization of displacement fields and confidence logits.
// Grids are parameterized as identity + displacement; confidences as
// sigmoid(logit), which keeps them inside (0,1) without projection.
struct DirectSolveConfig {
    // Only stages iii/iv are valid here: no supervision exists per pair.
    std::vector<StageBudget> schedule = {{Stage::matching_refine, 300},
                                         {Stage::uncertainty_learning, 150}};
    int levels = 3;  // coarse-to-fine; level k runs at size / 2^(levels-1-k)
    // Step sizes decay within each level (cosine to lr_floor) so the
    // optimization settles instead of oscillating at the Adam step size.
    double learning_rate = 0.03;
    double confidence_learning_rate = 0.15;  // logit space moves farther per unit
    double lr_floor = 0.05;                  // fraction of the base rate at the end
    double confidence_init_logit = 4.0;      // sigmoid(4) ~ 0.982
    // Confidence logits step only while the uncertainty loss is active; with
    // joint updates the matching/reconstruction terms contribute too.
    bool joint_confidence_updates = false;
    FeatureExtractor::Kind feature = FeatureExtractor::Kind::random_conv;
    uint32_t feature_seed = 17;
    LossWeights weights;
};

struct SolveIteration {
    int level = 0;
    Stage stage = Stage::matching_refine;
    int iteration = 0;
    double total = 0.0;
    std::map<std::string, double> terms;
};

struct SolveResult {
    GridPrediction prediction;
    std::vector<SolveIteration> trace;
};

// Throws NumericError with the offending stage/iteration and all loss terms
// when the objective goes non-finite.
SolveResult direct_solve(const ImageBuffer& image_s, const ImageBuffer& image_t, const Mask& mask_s,
                         const Mask& mask_t, const DirectSolveConfig& config);

}  // namespace warpgrid
