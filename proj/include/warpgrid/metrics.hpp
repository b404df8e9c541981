#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "warpgrid/losses.hpp"
#include "warpgrid/synth.hpp"
#include "warpgrid/types.hpp"

namespace warpgrid {

struct Point2 {
    float x = 0, y = 0;
};

// Fraction of points within R = alpha * max(H, W) pixels of ground truth
// (inclusive boundary). Points whose ground truth is invisible are excluded
// from numerator and denominator; absent when nothing is visible.
std::optional<double> pck(const std::vector<Point2>& predicted, const std::vector<Point2>& ground_truth,
                          const std::vector<bool>& gt_visible, double alpha, int height, int width);

// Warp each image by predicted and by ground-truth grids and compare in
// intensity space over visible pixels; the two direction means are averaged.
double synthetic_dense(const SamplingGrid& pred_g_st, const SamplingGrid& pred_g_ts,
                       const SamplingGrid& gt_g_st, const SamplingGrid& gt_g_ts,
                       const ImageBuffer& image_s, const ImageBuffer& image_t, const Mask& vis_s,
                       const Mask& vis_t);

// Mean Euclidean distance between predicted and ground-truth coordinates over
// visible pixels, converted to pixel units per axis. Absent when the
// visibility mask is empty.
std::optional<double> end_point_error(const SamplingGrid& predicted, const SamplingGrid& ground_truth,
                                      const Mask& visibility, int height, int width);

// Spearman rank correlation with mid-ranked ties; absent for fewer than two
// samples or zero variance on either side.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

// Spearman between predicted confidence and cycle error over masked pixels;
// absent for < 10 masked pixels or constant inputs.
std::optional<double> calibration(const ConfidenceMap& confidence, const ErrorMap& cycle_error,
                                  const Mask& mask);

struct EvalReport {
    std::string id;
    std::map<double, double> pck_at;  // alpha -> fraction (only defined alphas)
    double synthetic_dense = 0.0;
    std::optional<double> epe;
    std::optional<double> calibration;
    size_t pixels_evaluated = 0;
    size_t keypoints_evaluated = 0;
};

// Full per-pair evaluation of a prediction against ground truth. Keypoint
// predictions are read from pred.g_ts at the source keypoints; EPE and the
// dense metric average both directions; calibration averages the sides whose
// correlation is defined (it needs nonempty confidence maps).
EvalReport evaluate_pair(const LoadedPair& pair, const GridPrediction& pred,
                         const std::vector<double>& alphas);

}  // namespace warpgrid
