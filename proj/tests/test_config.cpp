#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "warpgrid/config.hpp"
#include "warpgrid/errors.hpp"

using namespace warpgrid;
using nlohmann::json;

TEST_CASE("empty document yields the fully defaulted config") {
    const RunConfig rc = config_from_json(json::object());
    CHECK(rc.seed == 7);
    CHECK(rc.image_size == 64);
    CHECK(rc.solver_mode == "direct");
    REQUIRE(rc.alphas.size() == 3);
    CHECK(rc.alphas[0] == 0.1);
    CHECK(rc.alphas[1] == 0.05);
    CHECK(rc.alphas[2] == 0.01);
    CHECK(rc.weights.dense == 10000.0);
    CHECK(rc.weights.lambda_conf == 0.1);
    CHECK(rc.weights.learning_rate == 0.0001);
    CHECK(rc.synth.image_size == 64);
    CHECK(rc.synth.seed == 7);
    REQUIRE(rc.train.stages.size() == 4);
    CHECK(rc.train.stages[0].stage == Stage::dense_pretrain);
    CHECK(rc.train.synthetic_ratio == 1);
    CHECK(rc.train.real_ratio == 3);
    // Joint confidence updates are the default on the predictor path.
    CHECK(!rc.train.options.confidence_from_uncertainty_only);
    // The per-pair solver drives confidence from the uncertainty loss only.
    CHECK(!rc.solve.joint_confidence_updates);
}

TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"sneed": 1})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"weights": {"densee": 1}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"synth": {"texture_kind": "blobs"}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"solve": {"lr": 0.1}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"train": {"stagez": []}})")), ConfigError);
}

TEST_CASE("values are validated") {
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"solver_mode": "magic"})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"alphas": []})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"alphas": [-0.1]})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"weights": {"dense": -5}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"image_size": 4})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"solve": {"schedule": [{"stage": "nope",
        "iterations": 5}]}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"solve": {"schedule": [{"stage":
        "matching_refine", "iterations": -1}]}})")), ConfigError);
}

TEST_CASE("overrides flow into nested configs") {
    const json doc = json::parse(R"({
        "seed": 123,
        "image_size": 32,
        "weights": {"smooth": 0, "learning_rate": 0.002},
        "synth": {"count": 5, "texture": "checker", "occlusion_fraction": 0.25},
        "solve": {"levels": 4, "learning_rate": 0.05,
                   "schedule": [{"stage": "matching_refine", "iterations": 10}]},
        "train": {"stages": [{"stage": "dense_pretrain", "steps": 3}], "base_channels": 8}
    })");
    const RunConfig rc = config_from_json(doc);
    CHECK(rc.seed == 123);
    CHECK(rc.synth.seed == 123);
    CHECK(rc.synth.image_size == 32);
    CHECK(rc.synth_count == 5);
    CHECK(rc.synth.texture == TextureKind::checker);
    CHECK(rc.synth.occlusion_fraction == doctest::Approx(0.25f));
    CHECK(rc.weights.smooth == 0.0);
    CHECK(rc.solve.weights.smooth == 0.0);  // weights propagate into the solver
    CHECK(rc.solve.levels == 4);
    CHECK(rc.solve.learning_rate == 0.05);
    REQUIRE(rc.solve.schedule.size() == 1);
    CHECK(rc.solve.schedule[0].iterations == 10);
    REQUIRE(rc.train.stages.size() == 1);
    CHECK(rc.train.stages[0].steps == 3);
    CHECK(rc.predictor_base_channels == 8);
    CHECK(rc.train.seed == 123);
}

TEST_CASE("config round-trips through its JSON form") {
    const json doc = json::parse(R"({
        "seed": 9, "image_size": 48,
        "weights": {"matching": 1500},
        "solve": {"feature": "identity"}
    })");
    const RunConfig rc = config_from_json(doc);
    const RunConfig back = config_from_json(config_to_json(rc));
    CHECK(back.seed == rc.seed);
    CHECK(back.image_size == rc.image_size);
    CHECK(back.weights.matching == 1500.0);
    CHECK(back.solve.feature == FeatureExtractor::Kind::identity);
    CHECK(back.train.stages.size() == rc.train.stages.size());
}

TEST_CASE("stage names round-trip") {
    for (Stage s : {Stage::dense_pretrain, Stage::sparse_adapt, Stage::matching_refine,
                    Stage::uncertainty_learning})
        CHECK(stage_from_name(stage_name(s)) == s);
    CHECK_THROWS_AS(stage_from_name("stage_v"), ConfigError);
}
