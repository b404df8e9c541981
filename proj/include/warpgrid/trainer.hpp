#pragma once

#include <string>
#include <vector>

#include "warpgrid/losses.hpp"
#include "warpgrid/predictor.hpp"

namespace warpgrid {

struct TrainStageBudget {
    Stage stage = Stage::dense_pretrain;
    int steps = 0;
};

struct TrainConfig {
    std::vector<TrainStageBudget> stages = {{Stage::dense_pretrain, 400},
                                            {Stage::sparse_adapt, 200},
                                            {Stage::matching_refine, 200},
                                            {Stage::uncertainty_learning, 120}};
    // From stage ii on, synthetic (dense-labeled) and keypoint-only pairs are
    // interleaved with this ratio.
    int synthetic_ratio = 1;
    int real_ratio = 3;
    int eval_every = 50;
    uint64_t seed = 0;
    FeatureExtractor::Kind feature = FeatureExtractor::Kind::random_conv;
    uint32_t feature_seed = 17;
    // Per the joint-update choice, all active losses drive confidence here.
    ObjectiveOptions options;
};

struct TrainResult {
    TinyPredictor predictor;
    std::vector<std::string> checkpoints;  // one per completed stage, in order
    std::string metrics_log;               // JSON-lines path
    double final_heldout_dense = 0.0;
};

// Progressive training. dense_manifest supplies fully labeled synthetic
// pairs; real_manifest plays the sparse-keypoint "real data" role (it is a
// held-out synthetic split; only its keypoints are exposed to the loss);
// heldout_manifest is used for evaluation only. Deterministic given config.
TrainResult train_predictor(const std::string& dense_manifest, const std::string& real_manifest,
                            const std::string& heldout_manifest, const PredictorSpec& spec,
                            const TrainConfig& config, const LossWeights& weights,
                            const std::string& out_dir);

// Mean held-out Synthetic Dense of a predictor over a manifest.
double heldout_dense_of(const TinyPredictor& model, const std::string& manifest_path);

}  // namespace warpgrid
