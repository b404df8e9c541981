#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "warpgrid/losses.hpp"
#include "warpgrid/solver.hpp"
#include "warpgrid/synth.hpp"
#include "warpgrid/trainer.hpp"

namespace warpgrid {

// One JSON document drives every command; CLI flags override keys one-to-one.
// Unknown keys are rejected at every nesting level.
struct RunConfig {
    uint64_t seed = 7;
    int image_size = 64;
    std::string solver_mode = "direct";  // "direct" | "predictor"
    std::vector<double> alphas = {0.1, 0.05, 0.01};
    LossWeights weights;

    int synth_count = 20;
    SynthConfig synth;  // image_size/seed mirrored from the top level

    DirectSolveConfig solve;

    TrainConfig train;  // seed mirrored from the top level
    int predictor_base_channels = 32;

    // Re-derives mirrored fields after overrides.
    void finalize();
};

RunConfig default_config();
RunConfig config_from_json(const nlohmann::json& j);  // throws ConfigError
RunConfig load_config(const std::string& path);       // throws IoError/ConfigError
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace warpgrid
