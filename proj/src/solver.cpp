#include "warpgrid/solver.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "warpgrid/adam.hpp"
#include "warpgrid/errors.hpp"
#include "warpgrid/warp.hpp"

namespace warpgrid {

namespace {

float sigmoidf(float v) { return 1.0f / (1.0f + std::exp(-v)); }

GridPrediction assemble(const SamplingGrid& id, const std::vector<float>& disp_st,
                        const std::vector<float>& disp_ts, const std::vector<float>& logit_s,
                        const std::vector<float>& logit_t) {
    GridPrediction p;
    p.g_st = id;
    p.g_ts = id;
    for (size_t i = 0; i < id.coords.size(); ++i) {
        p.g_st.coords[i] += disp_st[i];
        p.g_ts.coords[i] += disp_ts[i];
    }
    p.conf_s = ConfidenceMap(id.height, id.width);
    p.conf_t = ConfidenceMap(id.height, id.width);
    for (size_t i = 0; i < p.conf_s.data.size(); ++i) {
        p.conf_s.data[i] = sigmoidf(logit_s[i]);
        p.conf_t.data[i] = sigmoidf(logit_t[i]);
    }
    return p;
}

}  // namespace

SolveResult direct_solve(const ImageBuffer& image_s, const ImageBuffer& image_t, const Mask& mask_s,
                         const Mask& mask_t, const DirectSolveConfig& config) {
    if (!image_s.same_shape(image_t))
        throw std::invalid_argument("direct_solve: image dims differ");
    if (mask_s.height != image_s.height || mask_s.width != image_s.width || !mask_s.same_shape(mask_t))
        throw std::invalid_argument("direct_solve: mask dims differ from images");
    if (config.levels < 1) throw ConfigError("direct_solve: levels must be >= 1");
    for (const StageBudget& b : config.schedule) {
        if (b.stage != Stage::matching_refine && b.stage != Stage::uncertainty_learning)
            throw ConfigError("direct_solve: schedule stages must be matching_refine or uncertainty_learning");
        if (b.iterations < 0) throw ConfigError("direct_solve: negative iteration budget");
    }

    const FeatureExtractor extractor(config.feature, config.feature_seed);

    SolveResult result;
    std::vector<float> disp_st, disp_ts, logit_s, logit_t;

    for (int level = 0; level < config.levels; ++level) {
        const int shift = config.levels - 1 - level;
        const int lh = std::max(4, image_s.height >> shift);
        const int lw = std::max(4, image_s.width >> shift);

        const ImageBuffer im_s = resize_image(image_s, lh, lw);
        const ImageBuffer im_t = resize_image(image_t, lh, lw);
        const Mask mk_s = resize_mask(mask_s, lh, lw);
        const Mask mk_t = resize_mask(mask_t, lh, lw);
        const SamplingGrid id = identity_grid(lh, lw);
        const size_t n2 = id.coords.size(), n1 = id.pixel_count();

        if (level == 0) {
            disp_st.assign(n2, 0.0f);
            disp_ts.assign(n2, 0.0f);
            logit_s.assign(n1, static_cast<float>(config.confidence_init_logit));
            logit_t.assign(n1, static_cast<float>(config.confidence_init_logit));
        } else {
            // Displacements are normalized units, so upsampling is value-preserving.
            const int ph = image_s.height >> (shift + 1), pw = image_s.width >> (shift + 1);
            const int prev_h = std::max(4, ph), prev_w = std::max(4, pw);
            SamplingGrid f(prev_h, prev_w);
            f.coords = disp_st;
            disp_st = resize_field(f, lh, lw).coords;
            f.coords = disp_ts;
            disp_ts = resize_field(f, lh, lw).coords;
            ImageBuffer lg(1, prev_h, prev_w);
            lg.data = logit_s;
            logit_s = resize_image(lg, lh, lw).data;
            lg.data = logit_t;
            logit_t = resize_image(lg, lh, lw).data;
        }

        AdamState st_state(config.learning_rate), ts_state(config.learning_rate);
        AdamState ls_state(config.confidence_learning_rate), lt_state(config.confidence_learning_rate);

        PairSample pair;
        pair.image_s = &im_s;
        pair.image_t = &im_t;
        pair.mask_s = &mk_s;
        pair.mask_t = &mk_t;

        int level_total = 0;
        for (const StageBudget& budget : config.schedule) level_total += budget.iterations;
        int level_done = 0;
        auto lr_scale = [&]() {
            if (level_total <= 1) return 1.0;
            const double t = static_cast<double>(level_done) / (level_total - 1);
            const double floor = std::clamp(config.lr_floor, 0.0, 1.0);
            return floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(t * 3.14159265358979));
        };

        for (const StageBudget& budget : config.schedule) {
            // Confidence calibration only makes sense against full-resolution
            // cycle errors, so coarse levels refine grids only.
            const bool finest = level == config.levels - 1;
            const Stage stage = finest ? budget.stage : Stage::matching_refine;

            ObjectiveOptions opts;
            opts.confidence_from_uncertainty_only = !config.joint_confidence_updates;

            for (int it = 0; it < budget.iterations; ++it, ++level_done) {
                const double scale = lr_scale();
                st_state.learning_rate = config.learning_rate * scale;
                ts_state.learning_rate = config.learning_rate * scale;
                ls_state.learning_rate = config.confidence_learning_rate * scale;
                lt_state.learning_rate = config.confidence_learning_rate * scale;

                const GridPrediction pred = assemble(id, disp_st, disp_ts, logit_s, logit_t);
                LossReport rep;
                try {
                    rep = total_objective(stage, pred, pair, config.weights, extractor, opts);
                } catch (const NumericError&) {
                    std::ostringstream msg;
                    msg << "direct_solve: non-finite loss at level " << level << " stage "
                        << stage_name(stage) << " iteration " << it;
                    throw NumericError(msg.str());
                }

                SolveIteration ti;
                ti.level = level;
                ti.stage = stage;
                ti.iteration = it;
                ti.total = rep.value;
                ti.terms = rep.terms;
                result.trace.push_back(std::move(ti));

                adam_step(st_state, disp_st, rep.d_grid_st.coords);
                adam_step(ts_state, disp_ts, rep.d_grid_ts.coords);

                if (stage == Stage::uncertainty_learning) {
                    // Chain through the sigmoid into logit space.
                    std::vector<float> gs(n1), gt(n1);
                    for (size_t i = 0; i < n1; ++i) {
                        const float cs = pred.conf_s.data[i], ct = pred.conf_t.data[i];
                        gs[i] = rep.d_conf_s[i] * cs * (1.0f - cs);
                        gt[i] = rep.d_conf_t[i] * ct * (1.0f - ct);
                    }
                    adam_step(ls_state, logit_s, gs);
                    adam_step(lt_state, logit_t, gt);
                }
            }
        }

        // A zero-iteration budget falls through here with the untouched
        // initialization, i.e. identity grids.
        if (level == config.levels - 1)
            result.prediction = assemble(id, disp_st, disp_ts, logit_s, logit_t);
    }
    return result;
}

}  // namespace warpgrid
