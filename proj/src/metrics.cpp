#include "warpgrid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "warpgrid/warp.hpp"

namespace warpgrid {

std::optional<double> pck(const std::vector<Point2>& predicted, const std::vector<Point2>& ground_truth,
                          const std::vector<bool>& gt_visible, double alpha, int height, int width) {
    if (predicted.size() != ground_truth.size() || predicted.size() != gt_visible.size())
        throw std::invalid_argument("pck: point list lengths differ");
    if (alpha <= 0.0) throw std::invalid_argument("pck: alpha must be positive");

    const double radius = alpha * std::max(height, width);
    size_t visible = 0, correct = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (!gt_visible[i]) continue;
        ++visible;
        const double dx = static_cast<double>(predicted[i].x) - ground_truth[i].x;
        const double dy = static_cast<double>(predicted[i].y) - ground_truth[i].y;
        if (std::sqrt(dx * dx + dy * dy) <= radius) ++correct;
    }
    if (visible == 0) return std::nullopt;
    return static_cast<double>(correct) / visible;
}

namespace {

// MSE between two warps of the same image over a visibility mask, mean over
// pixels and channels; nullopt when the mask is empty.
std::optional<double> warped_mse(const ImageBuffer& source, const SamplingGrid& pred,
                                 const SamplingGrid& gt, const Mask& vis) {
    const size_t n = vis.count();
    if (n == 0) return std::nullopt;
    const ImageBuffer a = bilinear_sample(source, pred);
    const ImageBuffer b = bilinear_sample(source, gt);
    double total = 0.0;
    for (int r = 0; r < vis.height; ++r)
        for (int c = 0; c < vis.width; ++c) {
            if (!vis.at(r, c)) continue;
            for (int ch = 0; ch < a.channels; ++ch) {
                const double d = static_cast<double>(a.at(ch, r, c)) - b.at(ch, r, c);
                total += d * d;
            }
        }
    return total / (static_cast<double>(n) * source.channels);
}

}  // namespace

double synthetic_dense(const SamplingGrid& pred_g_st, const SamplingGrid& pred_g_ts,
                       const SamplingGrid& gt_g_st, const SamplingGrid& gt_g_ts,
                       const ImageBuffer& image_s, const ImageBuffer& image_t, const Mask& vis_s,
                       const Mask& vis_t) {
    if (!pred_g_st.same_shape(gt_g_st) || !pred_g_ts.same_shape(gt_g_ts))
        throw std::invalid_argument("synthetic_dense: grid dims differ");
    const auto dir_t = warped_mse(image_s, pred_g_st, gt_g_st, vis_t);
    const auto dir_s = warped_mse(image_t, pred_g_ts, gt_g_ts, vis_s);
    double total = 0.0;
    int dirs = 0;
    if (dir_t) { total += *dir_t; ++dirs; }
    if (dir_s) { total += *dir_s; ++dirs; }
    return dirs > 0 ? total / dirs : 0.0;
}

std::optional<double> end_point_error(const SamplingGrid& predicted, const SamplingGrid& ground_truth,
                                      const Mask& visibility, int height, int width) {
    if (!predicted.same_shape(ground_truth))
        throw std::invalid_argument("end_point_error: grid dims differ");
    if (visibility.height != predicted.height || visibility.width != predicted.width)
        throw std::invalid_argument("end_point_error: visibility dims differ");

    const double sx = 0.5 * (width - 1), sy = 0.5 * (height - 1);
    double total = 0.0;
    size_t n = 0;
    for (int r = 0; r < predicted.height; ++r)
        for (int c = 0; c < predicted.width; ++c) {
            if (!visibility.at(r, c)) continue;
            const double dx = (static_cast<double>(predicted.x(r, c)) - ground_truth.x(r, c)) * sx;
            const double dy = (static_cast<double>(predicted.y(r, c)) - ground_truth.y(r, c)) * sy;
            total += std::sqrt(dx * dx + dy * dy);
            ++n;
        }
    if (n == 0) return std::nullopt;
    return total / n;
}

namespace {

// Average-tie ranks.
std::vector<double> ranks_of(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double mid = 0.5 * (i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman: lengths differ");
    const size_t n = a.size();
    if (n < 2) return std::nullopt;
    const std::vector<double> ra = ranks_of(a), rb = ranks_of(b);
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double da = ra[i] - ma, db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) return std::nullopt;  // constant input
    return cov / std::sqrt(va * vb);
}

std::optional<double> calibration(const ConfidenceMap& confidence, const ErrorMap& cycle_error,
                                  const Mask& mask) {
    if (confidence.height != mask.height || confidence.width != mask.width ||
        cycle_error.height != mask.height || cycle_error.width != mask.width)
        throw std::invalid_argument("calibration: dims differ");
    std::vector<double> c, e;
    for (int r = 0; r < mask.height; ++r)
        for (int col = 0; col < mask.width; ++col) {
            if (!mask.at(r, col)) continue;
            c.push_back(confidence.at(r, col));
            e.push_back(cycle_error.at(r, col));
        }
    if (c.size() < 10) return std::nullopt;
    return spearman(c, e);
}

EvalReport evaluate_pair(const LoadedPair& pair, const GridPrediction& pred,
                         const std::vector<double>& alphas) {
    EvalReport rep;
    rep.id = pair.id;
    const int h = pair.image_s.height, w = pair.image_s.width;

    // Keypoint predictions: sample the source-frame grid at source keypoints.
    std::vector<Point2> predicted, truth;
    std::vector<bool> visible;
    if (!pair.keypoints.empty()) {
        ImageBuffer planes(2, h, w);
        planes.data = pred.g_ts.coords;
        SamplingGrid probes(1, static_cast<int>(pair.keypoints.size()));
        for (size_t i = 0; i < pair.keypoints.size(); ++i) {
            probes.x(0, static_cast<int>(i)) = 2.0f * pair.keypoints[i].x_src / (w - 1) - 1.0f;
            probes.y(0, static_cast<int>(i)) = 2.0f * pair.keypoints[i].y_src / (h - 1) - 1.0f;
        }
        const ImageBuffer got = bilinear_sample(planes, probes);
        for (size_t i = 0; i < pair.keypoints.size(); ++i) {
            Point2 p;
            p.x = (got.at(0, 0, static_cast<int>(i)) + 1.0f) * 0.5f * (w - 1);
            p.y = (got.at(1, 0, static_cast<int>(i)) + 1.0f) * 0.5f * (h - 1);
            predicted.push_back(p);
            truth.push_back({pair.keypoints[i].x_tgt, pair.keypoints[i].y_tgt});
            visible.push_back(pair.keypoints[i].visible);
            rep.keypoints_evaluated += pair.keypoints[i].visible ? 1 : 0;
        }
        for (double a : alphas) {
            const auto frac = pck(predicted, truth, visible, a, h, w);
            if (frac) rep.pck_at[a] = *frac;
        }
    }

    rep.synthetic_dense = synthetic_dense(pred.g_st, pred.g_ts, pair.gt_g_st, pair.gt_g_ts,
                                          pair.image_s, pair.image_t, pair.vis_s, pair.vis_t);

    const auto epe_t = end_point_error(pred.g_st, pair.gt_g_st, pair.vis_t, h, w);
    const auto epe_s = end_point_error(pred.g_ts, pair.gt_g_ts, pair.vis_s, h, w);
    if (epe_t && epe_s) rep.epe = 0.5 * (*epe_t + *epe_s);
    else if (epe_t) rep.epe = epe_t;
    else if (epe_s) rep.epe = epe_s;

    rep.pixels_evaluated = pair.vis_s.count() + pair.vis_t.count();

    // Calibration against the cycle errors of the predicted grids.
    if (!pred.conf_s.data.empty() && !pred.conf_t.data.empty()) {
        const ImageBuffer cyc_s = bilinear_sample(bilinear_sample(pair.image_s, pred.g_st), pred.g_ts);
        const ImageBuffer cyc_t = bilinear_sample(bilinear_sample(pair.image_t, pred.g_ts), pred.g_st);
        if (pair.mask_s.count() > 0 && pair.mask_t.count() > 0) {
            const ErrorMap e_s = reference_confidence(pair.image_s, cyc_s, pair.mask_s).error;
            const ErrorMap e_t = reference_confidence(pair.image_t, cyc_t, pair.mask_t).error;
            const auto rho_s = calibration(pred.conf_s, e_s, pair.mask_s);
            const auto rho_t = calibration(pred.conf_t, e_t, pair.mask_t);
            if (rho_s && rho_t) rep.calibration = 0.5 * (*rho_s + *rho_t);
            else if (rho_s) rep.calibration = rho_s;
            else if (rho_t) rep.calibration = rho_t;
        }
    }
    return rep;
}

}  // namespace warpgrid
