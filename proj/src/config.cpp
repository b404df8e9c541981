#include "warpgrid/config.hpp"

#include <fstream>

#include "warpgrid/errors.hpp"

namespace warpgrid {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& scope) {
    if (!j.is_object()) throw ConfigError("config: " + scope + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key \"" + key + "\" in " + scope);
    }
}

template <typename T>
void read(const json& j, const char* key, T& into) {
    if (j.contains(key)) {
        try {
            into = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config: bad value for key \"") + key + "\"");
        }
    }
}

void parse_weights(const json& j, LossWeights& w) {
    check_keys(j, {"dense", "sparse", "reconstruction", "matching", "smooth", "uncertainty",
                   "lambda_conf", "learning_rate"},
               "weights");
    read(j, "dense", w.dense);
    read(j, "sparse", w.sparse);
    read(j, "reconstruction", w.reconstruction);
    read(j, "matching", w.matching);
    read(j, "smooth", w.smooth);
    read(j, "uncertainty", w.uncertainty);
    read(j, "lambda_conf", w.lambda_conf);
    read(j, "learning_rate", w.learning_rate);
    if (w.dense < 0 || w.sparse < 0 || w.reconstruction < 0 || w.matching < 0 || w.smooth < 0 ||
        w.uncertainty < 0 || w.lambda_conf < 0)
        throw ConfigError("config: loss weights must be >= 0");
}

void parse_synth(const json& j, RunConfig& rc) {
    check_keys(j, {"count", "texture", "occlusion_fraction", "rotation_max_deg", "scale_min",
                   "scale_max", "translation_max", "nonrigid_points", "nonrigid_magnitude",
                   "keypoints"},
               "synth");
    read(j, "count", rc.synth_count);
    if (j.contains("texture")) rc.synth.texture = texture_from_name(j.at("texture").get<std::string>());
    read(j, "occlusion_fraction", rc.synth.occlusion_fraction);
    read(j, "rotation_max_deg", rc.synth.rotation_max_deg);
    read(j, "scale_min", rc.synth.scale_min);
    read(j, "scale_max", rc.synth.scale_max);
    read(j, "translation_max", rc.synth.translation_max);
    read(j, "nonrigid_points", rc.synth.nonrigid_points);
    read(j, "nonrigid_magnitude", rc.synth.nonrigid_magnitude);
    read(j, "keypoints", rc.synth.keypoints);
}

std::vector<StageBudget> parse_schedule(const json& arr, const char* scope) {
    if (!arr.is_array()) throw ConfigError(std::string("config: ") + scope + " must be an array");
    std::vector<StageBudget> out;
    for (const auto& e : arr) {
        check_keys(e, {"stage", "iterations"}, scope);
        StageBudget b;
        if (!e.contains("stage") || !e.contains("iterations"))
            throw ConfigError(std::string("config: ") + scope + " entries need stage and iterations");
        b.stage = stage_from_name(e.at("stage").get<std::string>());
        b.iterations = e.at("iterations").get<int>();
        if (b.iterations < 0) throw ConfigError("config: negative iteration budget");
        out.push_back(b);
    }
    return out;
}

void parse_solve(const json& j, RunConfig& rc) {
    check_keys(j, {"levels", "learning_rate", "confidence_init_logit", "joint_confidence_updates",
                   "feature", "feature_seed", "schedule"},
               "solve");
    read(j, "levels", rc.solve.levels);
    read(j, "learning_rate", rc.solve.learning_rate);
    read(j, "confidence_init_logit", rc.solve.confidence_init_logit);
    read(j, "joint_confidence_updates", rc.solve.joint_confidence_updates);
    if (j.contains("feature"))
        rc.solve.feature = FeatureExtractor::kind_from_name(j.at("feature").get<std::string>());
    read(j, "feature_seed", rc.solve.feature_seed);
    if (j.contains("schedule")) rc.solve.schedule = parse_schedule(j.at("schedule"), "solve.schedule");
    if (rc.solve.levels < 1) throw ConfigError("config: solve.levels must be >= 1");
}

void parse_train(const json& j, RunConfig& rc) {
    check_keys(j, {"stages", "synthetic_ratio", "real_ratio", "eval_every", "base_channels",
                   "feature", "feature_seed", "joint_confidence_updates"},
               "train");
    if (j.contains("stages")) {
        rc.train.stages.clear();
        for (const auto& e : j.at("stages")) {
            check_keys(e, {"stage", "steps"}, "train.stages");
            if (!e.contains("stage") || !e.contains("steps"))
                throw ConfigError("config: train.stages entries need stage and steps");
            TrainStageBudget b;
            b.stage = stage_from_name(e.at("stage").get<std::string>());
            b.steps = e.at("steps").get<int>();
            if (b.steps < 0) throw ConfigError("config: negative step budget");
            rc.train.stages.push_back(b);
        }
    }
    read(j, "synthetic_ratio", rc.train.synthetic_ratio);
    read(j, "real_ratio", rc.train.real_ratio);
    read(j, "eval_every", rc.train.eval_every);
    read(j, "base_channels", rc.predictor_base_channels);
    if (j.contains("feature"))
        rc.train.feature = FeatureExtractor::kind_from_name(j.at("feature").get<std::string>());
    read(j, "feature_seed", rc.train.feature_seed);
    if (j.contains("joint_confidence_updates"))
        rc.train.options.confidence_from_uncertainty_only = !j.at("joint_confidence_updates").get<bool>();
    if (rc.train.synthetic_ratio < 1 || rc.train.real_ratio < 0)
        throw ConfigError("config: interleave ratio must have synthetic >= 1, real >= 0");
}

}  // namespace

void RunConfig::finalize() {
    synth.image_size = image_size;
    synth.seed = seed;
    train.seed = seed;
}

RunConfig default_config() {
    RunConfig rc;
    rc.finalize();
    return rc;
}

RunConfig config_from_json(const nlohmann::json& j) {
    check_keys(j, {"seed", "image_size", "solver_mode", "alphas", "weights", "synth", "solve", "train"},
               "top level");
    RunConfig rc;
    read(j, "seed", rc.seed);
    read(j, "image_size", rc.image_size);
    read(j, "solver_mode", rc.solver_mode);
    if (rc.solver_mode != "direct" && rc.solver_mode != "predictor")
        throw ConfigError("config: solver_mode must be \"direct\" or \"predictor\"");
    if (j.contains("alphas")) {
        rc.alphas.clear();
        for (const auto& a : j.at("alphas")) {
            const double v = a.get<double>();
            if (v <= 0.0) throw ConfigError("config: alphas must be positive");
            rc.alphas.push_back(v);
        }
        if (rc.alphas.empty()) throw ConfigError("config: alphas must not be empty");
    }
    if (rc.image_size < 8) throw ConfigError("config: image_size must be >= 8");
    if (j.contains("weights")) parse_weights(j.at("weights"), rc.weights);
    if (j.contains("synth")) parse_synth(j.at("synth"), rc);
    if (j.contains("solve")) parse_solve(j.at("solve"), rc);
    if (j.contains("train")) parse_train(j.at("train"), rc);
    rc.solve.weights = rc.weights;
    rc.finalize();
    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json config_to_json(const RunConfig& config) {
    nlohmann::json j;
    j["seed"] = config.seed;
    j["image_size"] = config.image_size;
    j["solver_mode"] = config.solver_mode;
    j["alphas"] = config.alphas;
    j["weights"] = {{"dense", config.weights.dense},
                    {"sparse", config.weights.sparse},
                    {"reconstruction", config.weights.reconstruction},
                    {"matching", config.weights.matching},
                    {"smooth", config.weights.smooth},
                    {"uncertainty", config.weights.uncertainty},
                    {"lambda_conf", config.weights.lambda_conf},
                    {"learning_rate", config.weights.learning_rate}};
    j["synth"] = {{"count", config.synth_count},
                  {"texture", texture_name(config.synth.texture)},
                  {"occlusion_fraction", config.synth.occlusion_fraction},
                  {"rotation_max_deg", config.synth.rotation_max_deg},
                  {"scale_min", config.synth.scale_min},
                  {"scale_max", config.synth.scale_max},
                  {"translation_max", config.synth.translation_max},
                  {"nonrigid_points", config.synth.nonrigid_points},
                  {"nonrigid_magnitude", config.synth.nonrigid_magnitude},
                  {"keypoints", config.synth.keypoints}};
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& b : config.solve.schedule)
        sched.push_back({{"stage", stage_name(b.stage)}, {"iterations", b.iterations}});
    j["solve"] = {{"levels", config.solve.levels},
                  {"learning_rate", config.solve.learning_rate},
                  {"confidence_init_logit", config.solve.confidence_init_logit},
                  {"joint_confidence_updates", config.solve.joint_confidence_updates},
                  {"feature", FeatureExtractor::name_of(config.solve.feature)},
                  {"feature_seed", config.solve.feature_seed},
                  {"schedule", sched}};
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& b : config.train.stages)
        stages.push_back({{"stage", stage_name(b.stage)}, {"steps", b.steps}});
    j["train"] = {{"stages", stages},
                  {"synthetic_ratio", config.train.synthetic_ratio},
                  {"real_ratio", config.train.real_ratio},
                  {"eval_every", config.train.eval_every},
                  {"base_channels", config.predictor_base_channels},
                  {"feature", FeatureExtractor::name_of(config.train.feature)},
                  {"feature_seed", config.train.feature_seed},
                  {"joint_confidence_updates", !config.train.options.confidence_from_uncertainty_only}};
    return j;
}

}  // namespace warpgrid
