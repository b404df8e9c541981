#include "warpgrid/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "warpgrid/adam.hpp"
#include "warpgrid/errors.hpp"
#include "warpgrid/metrics.hpp"
#include "warpgrid/rng.hpp"
#include "warpgrid/synth.hpp"

namespace fs = std::filesystem;

namespace warpgrid {

namespace {

std::vector<LoadedPair> load_all(const std::string& manifest_path) {
    const DatasetManifest m = load_manifest(manifest_path);
    const std::string dir = fs::path(manifest_path).parent_path().string();
    std::vector<LoadedPair> pairs;
    pairs.reserve(m.pairs.size());
    for (const PairFiles& pf : m.pairs) pairs.push_back(load_pair(dir, pf.id));
    return pairs;
}

// One optimization step on one pair: both shared-weight passes on a single
// tape, loss gradients seeded at the output nodes, Adam on each buffer.
LossReport train_step(TinyPredictor& model, std::vector<AdamState>& states, const LoadedPair& pair,
                      bool use_dense_labels, Stage stage, const LossWeights& weights,
                      const FeatureExtractor& extractor, const ObjectiveOptions& options) {
    Tape tape;
    const auto params = model.make_param_nodes(tape);
    const auto dir_st = model.build(tape, params, pair.image_t, pair.image_s);
    const auto dir_ts = model.build(tape, params, pair.image_s, pair.image_t);

    const SamplingGrid id = identity_grid(pair.image_s.height, pair.image_s.width);
    GridPrediction pred;
    pred.g_st = id;
    pred.g_ts = id;
    for (size_t i = 0; i < id.coords.size(); ++i) {
        pred.g_st.coords[i] += tape.value(dir_st.displacement).data[i];
        pred.g_ts.coords[i] += tape.value(dir_ts.displacement).data[i];
    }
    pred.conf_t = ConfidenceMap(id.height, id.width);
    pred.conf_s = ConfidenceMap(id.height, id.width);
    pred.conf_t.data = tape.value(dir_st.confidence).data;
    pred.conf_s.data = tape.value(dir_ts.confidence).data;

    PairSample sample;
    sample.image_s = &pair.image_s;
    sample.image_t = &pair.image_t;
    sample.mask_s = &pair.mask_s;
    sample.mask_t = &pair.mask_t;
    if (use_dense_labels) {
        sample.gt_g_st = &pair.gt_g_st;
        sample.gt_g_ts = &pair.gt_g_ts;
        sample.vis_s = &pair.vis_s;
        sample.vis_t = &pair.vis_t;
    } else {
        sample.keypoints = &pair.keypoints;
    }

    const LossReport rep = total_objective(stage, pred, sample, weights, extractor, options);

    tape.seed_gradient(dir_st.displacement, rep.d_grid_st.coords);
    tape.seed_gradient(dir_ts.displacement, rep.d_grid_ts.coords);
    tape.seed_gradient(dir_st.confidence, rep.d_conf_t);
    tape.seed_gradient(dir_ts.confidence, rep.d_conf_s);
    tape.backward();

    auto& buffers = model.buffers();
    for (size_t i = 0; i < buffers.size(); ++i) {
        const std::vector<float>& g = tape.gradient(params[i]);
        if (g.empty()) continue;
        adam_step(states[i], buffers[i], g);
    }
    return rep;
}

}  // namespace

double heldout_dense_of(const TinyPredictor& model, const std::string& manifest_path) {
    const std::vector<LoadedPair> pairs = load_all(manifest_path);
    if (pairs.empty()) throw ConfigError("heldout_dense_of: empty dataset " + manifest_path);
    double total = 0.0;
    for (const LoadedPair& p : pairs) {
        const GridPrediction pred = model.predict(p.image_s, p.image_t);
        total += synthetic_dense(pred.g_st, pred.g_ts, p.gt_g_st, p.gt_g_ts, p.image_s, p.image_t,
                                 p.vis_s, p.vis_t);
    }
    return total / pairs.size();
}

TrainResult train_predictor(const std::string& dense_manifest, const std::string& real_manifest,
                            const std::string& heldout_manifest, const PredictorSpec& spec,
                            const TrainConfig& config, const LossWeights& weights,
                            const std::string& out_dir) {
    const std::vector<LoadedPair> dense_pairs = load_all(dense_manifest);
    const std::vector<LoadedPair> real_pairs = load_all(real_manifest);
    const std::vector<LoadedPair> heldout_pairs = load_all(heldout_manifest);
    if (dense_pairs.empty()) throw ConfigError("train_predictor: dense dataset is empty");
    if (real_pairs.empty()) throw ConfigError("train_predictor: keypoint (real-proxy) dataset is empty");
    if (heldout_pairs.empty()) throw ConfigError("train_predictor: held-out dataset is empty");

    fs::create_directories(out_dir);
    const std::string log_path = (fs::path(out_dir) / "metrics.jsonl").string();
    std::ofstream log(log_path);
    if (!log) throw IoError("cannot write metrics log: " + log_path);

    TrainResult result{TinyPredictor(spec), {}, log_path, 0.0};
    std::vector<AdamState> states(result.predictor.buffers().size(), AdamState(weights.learning_rate));
    const FeatureExtractor extractor(config.feature, config.feature_seed);
    Rng pick(Rng::derive(config.seed, 0x77a1u));

    auto heldout_dense = [&]() {
        double total = 0.0;
        for (const LoadedPair& p : heldout_pairs) {
            const GridPrediction pred = result.predictor.predict(p.image_s, p.image_t);
            total += synthetic_dense(pred.g_st, pred.g_ts, p.gt_g_st, p.gt_g_ts, p.image_s, p.image_t,
                                     p.vis_s, p.vis_t);
        }
        return total / heldout_pairs.size();
    };

    auto log_record = [&](Stage stage, int step, const LossReport* rep, double heldout,
                          const char* source) {
        nlohmann::json j;
        j["stage"] = stage_name(stage);
        j["step"] = step;
        j["pair_source"] = source;  // "synthetic" or "real_proxy" (keypoint-only synthetic split)
        if (rep) {
            for (const auto& [name, v] : rep->terms) j["loss"][name] = v;
            j["total"] = rep->value;
        }
        j["heldout_dense"] = heldout;
        log << j.dump() << "\n";
        log.flush();
    };

    const int period = std::max(1, config.synthetic_ratio + config.real_ratio);
    int global_step = 0;

    for (const TrainStageBudget& budget : config.stages) {
        for (int step = 0; step < budget.steps; ++step, ++global_step) {
            const bool interleave = static_cast<int>(budget.stage) >= 2;
            // 1:3 synthetic:real within each period once real data enters.
            const bool synthetic = !interleave || (global_step % period) < config.synthetic_ratio;
            const std::vector<LoadedPair>& pool = synthetic ? dense_pairs : real_pairs;
            const LoadedPair& pair = pool[pick.uniform_int(static_cast<int>(pool.size()))];

            LossReport rep;
            try {
                rep = train_step(result.predictor, states, pair, synthetic, budget.stage, weights,
                                 extractor, config.options);
            } catch (const NumericError& e) {
                std::ostringstream msg;
                msg << "train_predictor: NaN/non-finite loss at stage " << stage_name(budget.stage)
                    << " step " << step << ": " << e.what();
                throw NumericError(msg.str());
            }

            if (config.eval_every > 0 && (step + 1) % config.eval_every == 0)
                log_record(budget.stage, step + 1, &rep, heldout_dense(),
                           synthetic ? "synthetic" : "real_proxy");
        }

        if (budget.steps == 0) continue;  // untouched stage: nothing to log or checkpoint
        const double heldout = heldout_dense();
        log_record(budget.stage, budget.steps, nullptr, heldout, "stage_end");
        const std::string ckpt =
            (fs::path(out_dir) / ("stage_" + stage_name(budget.stage) + ".wckp")).string();
        result.predictor.save_checkpoint(ckpt);
        result.checkpoints.push_back(ckpt);
        result.final_heldout_dense = heldout;
    }
    return result;
}

}  // namespace warpgrid
