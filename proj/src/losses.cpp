#include "warpgrid/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "warpgrid/errors.hpp"
#include "warpgrid/warp.hpp"

namespace warpgrid {

namespace {

constexpr double kNormEps = 1e-12;  // below this, the L2 subgradient is 0

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Per-pixel L2 distance across channels.
ErrorMap pixel_l2(const ImageBuffer& a, const ImageBuffer& b) {
    ErrorMap e(a.height, a.width);
    for (int r = 0; r < a.height; ++r)
        for (int c = 0; c < a.width; ++c) {
            double s = 0.0;
            for (int ch = 0; ch < a.channels; ++ch) {
                const double d = static_cast<double>(a.at(ch, r, c)) - b.at(ch, r, c);
                s += d * d;
            }
            e.at(r, c) = static_cast<float>(std::sqrt(s));
        }
    return e;
}

void add_grid(SamplingGrid& into, const SamplingGrid& from) {
    if (into.coords.empty()) {
        into = from;
        return;
    }
    for (size_t i = 0; i < into.coords.size(); ++i) into.coords[i] += from.coords[i];
}

void add_conf(std::vector<float>& into, const std::vector<float>& from) {
    if (into.empty()) {
        into = from;
        return;
    }
    for (size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

// One confidence-weighted masked-mean side of the matching loss:
//   mean_p mask * || E(ref) - E(W(src, grid)) ||_2 * conf
// Accumulates d(grid) and writes d(conf); returns the side's value.
double matching_side(const ImageBuffer& ref, const ImageBuffer& src, const SamplingGrid& grid,
                     const ConfidenceMap& conf, const Mask& mask, const FeatureExtractor& extractor,
                     SamplingGrid& d_grid, std::vector<float>& d_conf) {
    const size_t n = mask.count();
    d_conf.assign(mask.pixel_count(), 0.0f);
    if (n == 0) {
        add_grid(d_grid, SamplingGrid(grid.height, grid.width));
        return 0.0;
    }

    const ImageBuffer warped = bilinear_sample(src, grid);
    const ImageBuffer feat_ref = extractor.forward(ref);
    const ImageBuffer feat_warp = extractor.forward(warped);

    double value = 0.0;
    ImageBuffer d_feat(feat_warp.channels, feat_warp.height, feat_warp.width);
    for (int r = 0; r < ref.height; ++r) {
        for (int c = 0; c < ref.width; ++c) {
            if (!mask.at(r, c)) continue;
            double s = 0.0;
            for (int ch = 0; ch < feat_ref.channels; ++ch) {
                const double d = static_cast<double>(feat_ref.at(ch, r, c)) - feat_warp.at(ch, r, c);
                s += d * d;
            }
            const double err = std::sqrt(s);
            value += err * conf.at(r, c);
            d_conf[static_cast<size_t>(r) * mask.width + c] = static_cast<float>(err / n);
            if (err > kNormEps) {
                const double scale = conf.at(r, c) / (err * n);
                for (int ch = 0; ch < feat_ref.channels; ++ch) {
                    const double d = static_cast<double>(feat_ref.at(ch, r, c)) - feat_warp.at(ch, r, c);
                    d_feat.at(ch, r, c) = static_cast<float>(-d * scale);
                }
            }
        }
    }
    const ImageBuffer d_warped = extractor.backward(warped, d_feat);
    add_grid(d_grid, bilinear_sample_backward(src, grid, d_warped).d_grid);
    return value / n;
}

}  // namespace

LossReport loss_matching(const ImageBuffer& image_s, const ImageBuffer& image_t,
                         const SamplingGrid& g_st, const SamplingGrid& g_ts,
                         const ConfidenceMap& conf_s, const ConfidenceMap& conf_t,
                         const Mask& mask_s, const Mask& mask_t, const FeatureExtractor& extractor) {
    require(image_s.same_shape(image_t), "loss_matching: image dims differ");
    require(g_st.height == image_s.height && g_st.width == image_s.width &&
                g_st.same_shape(g_ts),
            "loss_matching: grid dims differ from images");
    require(mask_s.height == image_s.height && mask_s.width == image_s.width &&
                mask_s.same_shape(mask_t),
            "loss_matching: mask dims differ");
    require(conf_s.height == image_s.height && conf_s.width == image_s.width &&
                conf_t.height == image_s.height && conf_t.width == image_s.width,
            "loss_matching: confidence dims differ");

    LossReport rep;
    const double side_t =
        matching_side(image_t, image_s, g_st, conf_t, mask_t, extractor, rep.d_grid_st, rep.d_conf_t);
    const double side_s =
        matching_side(image_s, image_t, g_ts, conf_s, mask_s, extractor, rep.d_grid_ts, rep.d_conf_s);
    rep.value = side_t + side_s;
    rep.degenerate = mask_s.count() == 0 && mask_t.count() == 0;
    return rep;
}

namespace {

// One side of the reconstruction loss: warp src by g_out (into the other
// frame), warp the result back by g_back, compare to src. Gradients reach
// both grids: g_back through the outer warp, g_out through the inner one.
double reconstruction_side(const ImageBuffer& src, const SamplingGrid& g_out, const SamplingGrid& g_back,
                           const ConfidenceMap& conf, const Mask& mask, SamplingGrid& d_g_out,
                           SamplingGrid& d_g_back, std::vector<float>& d_conf) {
    const size_t n = mask.count();
    d_conf.assign(mask.pixel_count(), 0.0f);
    if (n == 0) {
        add_grid(d_g_out, SamplingGrid(g_out.height, g_out.width));
        add_grid(d_g_back, SamplingGrid(g_back.height, g_back.width));
        return 0.0;
    }

    const ImageBuffer warped = bilinear_sample(src, g_out);
    const ImageBuffer cycle = bilinear_sample(warped, g_back);

    double value = 0.0;
    ImageBuffer d_cycle(cycle.channels, cycle.height, cycle.width);
    for (int r = 0; r < src.height; ++r) {
        for (int c = 0; c < src.width; ++c) {
            if (!mask.at(r, c)) continue;
            double s = 0.0;
            for (int ch = 0; ch < src.channels; ++ch) {
                const double d = static_cast<double>(src.at(ch, r, c)) - cycle.at(ch, r, c);
                s += d * d;
            }
            const double err = std::sqrt(s);
            value += err * conf.at(r, c);
            d_conf[static_cast<size_t>(r) * mask.width + c] = static_cast<float>(err / n);
            if (err > kNormEps) {
                const double scale = conf.at(r, c) / (err * n);
                for (int ch = 0; ch < src.channels; ++ch) {
                    const double d = static_cast<double>(src.at(ch, r, c)) - cycle.at(ch, r, c);
                    d_cycle.at(ch, r, c) = static_cast<float>(-d * scale);
                }
            }
        }
    }
    const WarpGradients outer = bilinear_sample_backward(warped, g_back, d_cycle);
    add_grid(d_g_back, outer.d_grid);
    add_grid(d_g_out, bilinear_sample_backward(src, g_out, outer.d_image).d_grid);
    return value / n;
}

}  // namespace

LossReport loss_reconstruction(const ImageBuffer& image_s, const ImageBuffer& image_t,
                               const SamplingGrid& g_st, const SamplingGrid& g_ts,
                               const ConfidenceMap& conf_s, const ConfidenceMap& conf_t,
                               const Mask& mask_s, const Mask& mask_t) {
    require(image_s.same_shape(image_t), "loss_reconstruction: image dims differ");
    require(g_st.height == image_s.height && g_st.width == image_s.width && g_st.same_shape(g_ts),
            "loss_reconstruction: grid dims differ from images");
    require(mask_s.height == image_s.height && mask_s.width == image_s.width &&
                mask_s.same_shape(mask_t),
            "loss_reconstruction: mask dims differ");

    LossReport rep;
    // Source cycle: s -> t frame (g_st) -> back to s frame (g_ts).
    const double side_s = reconstruction_side(image_s, g_st, g_ts, conf_s, mask_s, rep.d_grid_st,
                                              rep.d_grid_ts, rep.d_conf_s);
    const double side_t = reconstruction_side(image_t, g_ts, g_st, conf_t, mask_t, rep.d_grid_ts,
                                              rep.d_grid_st, rep.d_conf_t);
    rep.value = side_s + side_t;
    rep.degenerate = mask_s.count() == 0 && mask_t.count() == 0;
    return rep;
}

ReferenceConfidence reference_confidence(const ImageBuffer& image, const ImageBuffer& image_cycle,
                                         const Mask& mask) {
    require(image.same_shape(image_cycle), "reference_confidence: image dims differ");
    require(mask.height == image.height && mask.width == image.width,
            "reference_confidence: mask dims differ");
    if (mask.count() == 0) throw std::invalid_argument("reference_confidence: empty mask");

    ReferenceConfidence out;
    out.error = pixel_l2(image, image_cycle);
    out.normalized = ErrorMap(image.height, image.width);
    out.confidence = ConfidenceMap(image.height, image.width);

    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c) {
            if (!mask.at(r, c)) continue;
            const double e = out.error.at(r, c);
            if (first) {
                lo = hi = e;
                first = false;
            } else {
                lo = std::min(lo, e);
                hi = std::max(hi, e);
            }
        }

    const double span = hi - lo;
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c) {
            double ns = span > kNormEps ? (out.error.at(r, c) - lo) / span : 0.0;
            ns = std::clamp(ns, 0.0, 1.0);
            out.normalized.at(r, c) = static_cast<float>(ns);
            out.confidence.at(r, c) = static_cast<float>(1.0 - ns);
        }
    return out;
}

namespace {

double uncertainty_side(const ConfidenceMap& ref, const ConfidenceMap& conf, const Mask& mask,
                        double lambda_conf, std::vector<float>& d_conf) {
    const size_t n = mask.count();
    d_conf.assign(mask.pixel_count(), 0.0f);
    if (n == 0) return 0.0;
    double value = 0.0;
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            const double diff = static_cast<double>(conf.at(r, c)) - ref.at(r, c);
            value += std::abs(diff) - lambda_conf * conf.at(r, c);
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            d_conf[static_cast<size_t>(r) * mask.width + c] =
                static_cast<float>((sgn - lambda_conf) / n);
        }
    return value / n;
}

}  // namespace

LossReport loss_uncertainty(const ConfidenceMap& ref_s, const ConfidenceMap& ref_t,
                            const ConfidenceMap& conf_s, const ConfidenceMap& conf_t,
                            const Mask& mask_s, const Mask& mask_t, double lambda_conf) {
    require(ref_s.height == conf_s.height && ref_s.width == conf_s.width &&
                ref_t.height == conf_t.height && ref_t.width == conf_t.width,
            "loss_uncertainty: confidence dims differ");
    require(mask_s.height == ref_s.height && mask_s.width == ref_s.width &&
                mask_t.height == ref_t.height && mask_t.width == ref_t.width,
            "loss_uncertainty: mask dims differ");

    LossReport rep;
    rep.value = uncertainty_side(ref_s, conf_s, mask_s, lambda_conf, rep.d_conf_s) +
                uncertainty_side(ref_t, conf_t, mask_t, lambda_conf, rep.d_conf_t);
    rep.degenerate = mask_s.count() == 0 && mask_t.count() == 0;
    return rep;
}

LossReport loss_smoothness(const SamplingGrid& grid, SmoothnessMode mode) {
    require(grid.height >= 2 && grid.width >= 2, "loss_smoothness: grid must be at least 2x2");

    // In displacement mode, first differences of D = grid - identity; the
    // identity offset cancels in the gradient either way.
    const SamplingGrid id = identity_grid(grid.height, grid.width);
    const bool displacement = mode == SmoothnessMode::displacement;

    const int h = grid.height, w = grid.width;
    const double denom = 2.0 * (static_cast<double>(h) * (w - 1) + static_cast<double>(h - 1) * w);

    LossReport rep;
    rep.d_grid_st = SamplingGrid(h, w);
    double total = 0.0;
    for (int plane = 0; plane < 2; ++plane) {
        const size_t off = static_cast<size_t>(plane) * grid.pixel_count();
        auto field = [&](int r, int c) -> double {
            const size_t i = off + static_cast<size_t>(r) * w + c;
            return displacement ? static_cast<double>(grid.coords[i]) - id.coords[i]
                                : static_cast<double>(grid.coords[i]);
        };
        auto grad = [&](int r, int c) -> float& {
            return rep.d_grid_st.coords[off + static_cast<size_t>(r) * w + c];
        };
        for (int r = 0; r < h; ++r)
            for (int c = 0; c + 1 < w; ++c) {
                const double d = field(r, c + 1) - field(r, c);
                total += d * d;
                grad(r, c + 1) += static_cast<float>(2.0 * d / denom);
                grad(r, c) -= static_cast<float>(2.0 * d / denom);
            }
        for (int r = 0; r + 1 < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double d = field(r + 1, c) - field(r, c);
                total += d * d;
                grad(r + 1, c) += static_cast<float>(2.0 * d / denom);
                grad(r, c) -= static_cast<float>(2.0 * d / denom);
            }
    }
    rep.value = total / denom;
    return rep;
}

LossReport loss_dense_supervised(const SamplingGrid& predicted, const SamplingGrid& ground_truth,
                                 const Mask& visibility) {
    require(predicted.same_shape(ground_truth), "loss_dense_supervised: grid dims differ");
    require(visibility.height == predicted.height && visibility.width == predicted.width,
            "loss_dense_supervised: visibility dims differ");

    LossReport rep;
    rep.d_grid_st = SamplingGrid(predicted.height, predicted.width);
    const size_t n = visibility.count();
    if (n == 0) {
        rep.degenerate = true;
        return rep;
    }
    double total = 0.0;
    const double denom = 2.0 * n;  // both coordinate planes
    for (int r = 0; r < predicted.height; ++r)
        for (int c = 0; c < predicted.width; ++c) {
            if (!visibility.at(r, c)) continue;
            const double dx = static_cast<double>(predicted.x(r, c)) - ground_truth.x(r, c);
            const double dy = static_cast<double>(predicted.y(r, c)) - ground_truth.y(r, c);
            total += dx * dx + dy * dy;
            rep.d_grid_st.x(r, c) = static_cast<float>(2.0 * dx / denom);
            rep.d_grid_st.y(r, c) = static_cast<float>(2.0 * dy / denom);
        }
    rep.value = total / denom;
    return rep;
}

LossReport loss_sparse_keypoints(const SamplingGrid& g_st, const SamplingGrid& g_ts,
                                 const KeypointSet& keypoints) {
    require(g_st.same_shape(g_ts), "loss_sparse_keypoints: grid dims differ");

    LossReport rep;
    rep.d_grid_st = SamplingGrid(g_st.height, g_st.width);
    rep.d_grid_ts = SamplingGrid(g_ts.height, g_ts.width);

    size_t n = 0;
    for (const Keypoint& k : keypoints) n += k.visible ? 1 : 0;
    if (n == 0) {
        rep.degenerate = true;
        return rep;
    }

    const int h = g_st.height, w = g_st.width;
    auto to_norm_x = [&](float px) { return 2.0f * px / static_cast<float>(w - 1) - 1.0f; };
    auto to_norm_y = [&](float py) { return 2.0f * py / static_cast<float>(h - 1) - 1.0f; };

    // Read one grid at one normalized location through the warp machinery so
    // taps, padding and gradients stay consistent with bilinear_sample.
    auto one_direction = [&](const SamplingGrid& grid, SamplingGrid& d_grid, float at_x, float at_y,
                             float want_x, float want_y) -> double {
        ImageBuffer planes(2, h, w);
        planes.data = grid.coords;
        SamplingGrid probe(1, 1);
        probe.x(0, 0) = at_x;
        probe.y(0, 0) = at_y;
        const ImageBuffer got = bilinear_sample(planes, probe);
        const double ex = static_cast<double>(got.at(0, 0, 0)) - want_x;
        const double ey = static_cast<double>(got.at(1, 0, 0)) - want_y;
        ImageBuffer up(2, 1, 1);
        up.at(0, 0, 0) = static_cast<float>(ex / n);  // d of (ex^2+ey^2)/2 wrt pred, / n points
        up.at(1, 0, 0) = static_cast<float>(ey / n);
        const WarpGradients wg = bilinear_sample_backward(planes, probe, up);
        for (size_t i = 0; i < d_grid.coords.size(); ++i) d_grid.coords[i] += wg.d_image.data[i];
        return (ex * ex + ey * ey) / 2.0;
    };

    double sum_ts = 0.0, sum_st = 0.0;
    for (const Keypoint& k : keypoints) {
        if (!k.visible) continue;
        // Predicted target coordinate: sample g_ts at the source keypoint.
        sum_ts += one_direction(g_ts, rep.d_grid_ts, to_norm_x(k.x_src), to_norm_y(k.y_src),
                                to_norm_x(k.x_tgt), to_norm_y(k.y_tgt));
        // Predicted source coordinate: sample g_st at the target keypoint.
        sum_st += one_direction(g_st, rep.d_grid_st, to_norm_x(k.x_tgt), to_norm_y(k.y_tgt),
                                to_norm_x(k.x_src), to_norm_y(k.y_src));
    }
    rep.value = sum_ts / n + sum_st / n;
    return rep;
}

Stage stage_from_name(const std::string& name) {
    if (name == "dense_pretrain") return Stage::dense_pretrain;
    if (name == "sparse_adapt") return Stage::sparse_adapt;
    if (name == "matching_refine") return Stage::matching_refine;
    if (name == "uncertainty_learning") return Stage::uncertainty_learning;
    throw ConfigError("unknown stage: " + name);
}

std::string stage_name(Stage stage) {
    switch (stage) {
        case Stage::dense_pretrain: return "dense_pretrain";
        case Stage::sparse_adapt: return "sparse_adapt";
        case Stage::matching_refine: return "matching_refine";
        case Stage::uncertainty_learning: return "uncertainty_learning";
    }
    return "dense_pretrain";
}

namespace {

void accumulate(LossReport& total, const char* name, double weight, const LossReport& term) {
    total.terms[name] = term.value;
    total.weights[name] = weight;
    total.value += weight * term.value;
    total.degenerate = total.degenerate || term.degenerate;
    const float wf = static_cast<float>(weight);
    if (!term.d_grid_st.coords.empty()) {
        if (total.d_grid_st.coords.empty()) total.d_grid_st = SamplingGrid(term.d_grid_st.height, term.d_grid_st.width);
        for (size_t i = 0; i < term.d_grid_st.coords.size(); ++i)
            total.d_grid_st.coords[i] += wf * term.d_grid_st.coords[i];
    }
    if (!term.d_grid_ts.coords.empty()) {
        if (total.d_grid_ts.coords.empty()) total.d_grid_ts = SamplingGrid(term.d_grid_ts.height, term.d_grid_ts.width);
        for (size_t i = 0; i < term.d_grid_ts.coords.size(); ++i)
            total.d_grid_ts.coords[i] += wf * term.d_grid_ts.coords[i];
    }
    if (!term.d_conf_s.empty()) {
        if (total.d_conf_s.empty()) total.d_conf_s.assign(term.d_conf_s.size(), 0.0f);
        for (size_t i = 0; i < term.d_conf_s.size(); ++i) total.d_conf_s[i] += wf * term.d_conf_s[i];
    }
    if (!term.d_conf_t.empty()) {
        if (total.d_conf_t.empty()) total.d_conf_t.assign(term.d_conf_t.size(), 0.0f);
        for (size_t i = 0; i < term.d_conf_t.size(); ++i) total.d_conf_t[i] += wf * term.d_conf_t[i];
    }
}

}  // namespace

LossReport total_objective(Stage stage, const GridPrediction& prediction, const PairSample& pair,
                           const LossWeights& weights, const FeatureExtractor& extractor,
                           const ObjectiveOptions& options) {
    require(pair.image_s && pair.image_t && pair.mask_s && pair.mask_t,
            "total_objective: pair images and masks are required");
    const int level = static_cast<int>(stage);

    LossReport total;
    total.d_grid_st = SamplingGrid(prediction.g_st.height, prediction.g_st.width);
    total.d_grid_ts = SamplingGrid(prediction.g_ts.height, prediction.g_ts.width);
    total.d_conf_s.assign(prediction.conf_s.pixel_count(), 0.0f);
    total.d_conf_t.assign(prediction.conf_t.pixel_count(), 0.0f);

    if (pair.gt_g_st && pair.gt_g_ts && pair.vis_s && pair.vis_t) {
        // g_st is indexed by target pixels, so its visibility lives on the
        // target side, and symmetrically for g_ts.
        LossReport dense_st = loss_dense_supervised(prediction.g_st, *pair.gt_g_st, *pair.vis_t);
        LossReport dense_ts = loss_dense_supervised(prediction.g_ts, *pair.gt_g_ts, *pair.vis_s);
        LossReport dense;
        dense.value = dense_st.value + dense_ts.value;
        dense.degenerate = dense_st.degenerate || dense_ts.degenerate;
        dense.d_grid_st = std::move(dense_st.d_grid_st);
        dense.d_grid_ts = std::move(dense_ts.d_grid_st);
        accumulate(total, "dense", weights.dense, dense);
    }

    if (level >= 2 && pair.keypoints) {
        accumulate(total, "sparse", weights.sparse,
                   loss_sparse_keypoints(prediction.g_st, prediction.g_ts, *pair.keypoints));
    }

    {
        LossReport smooth_st = loss_smoothness(prediction.g_st);
        LossReport smooth_ts = loss_smoothness(prediction.g_ts);
        LossReport smooth;
        smooth.value = smooth_st.value + smooth_ts.value;
        smooth.d_grid_st = std::move(smooth_st.d_grid_st);
        smooth.d_grid_ts = std::move(smooth_ts.d_grid_st);
        accumulate(total, "smooth", weights.smooth, smooth);
    }

    if (level >= 3) {
        LossReport matching =
            loss_matching(*pair.image_s, *pair.image_t, prediction.g_st, prediction.g_ts,
                          prediction.conf_s, prediction.conf_t, *pair.mask_s, *pair.mask_t, extractor);
        LossReport recon =
            loss_reconstruction(*pair.image_s, *pair.image_t, prediction.g_st, prediction.g_ts,
                                prediction.conf_s, prediction.conf_t, *pair.mask_s, *pair.mask_t);
        if (options.confidence_from_uncertainty_only) {
            matching.d_conf_s.clear();
            matching.d_conf_t.clear();
            recon.d_conf_s.clear();
            recon.d_conf_t.clear();
        }
        accumulate(total, "matching", weights.matching, matching);
        accumulate(total, "reconstruction", weights.reconstruction, recon);
    }

    if (level >= 4) {
        // Reference confidences from the current cycle errors, stop-gradient.
        // An empty mask side contributes nothing, so a placeholder reference
        // keeps loss_uncertainty callable.
        auto side_reference = [](const ImageBuffer& image, const SamplingGrid& out,
                                 const SamplingGrid& back, const Mask& mask) {
            if (mask.count() == 0) return ConfidenceMap(mask.height, mask.width, 1.0f);
            const ImageBuffer cyc = bilinear_sample(bilinear_sample(image, out), back);
            return reference_confidence(image, cyc, mask).confidence;
        };
        const ConfidenceMap ref_s =
            side_reference(*pair.image_s, prediction.g_st, prediction.g_ts, *pair.mask_s);
        const ConfidenceMap ref_t =
            side_reference(*pair.image_t, prediction.g_ts, prediction.g_st, *pair.mask_t);
        accumulate(total, "uncertainty", weights.uncertainty,
                   loss_uncertainty(ref_s, ref_t, prediction.conf_s, prediction.conf_t, *pair.mask_s,
                                    *pair.mask_t, weights.lambda_conf));
    }

    if (!std::isfinite(total.value)) throw NumericError("total_objective: non-finite loss value");
    return total;
}

}  // namespace warpgrid
