#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stereobox/estimator.hpp"

namespace stereobox {

/// Estimate transported by the cube symmetry that minimizes 3D corner RMSE
/// against the truth; metrics must be read off the aligned state.
struct SymmetryAlignment {
  int group_index = 0;
  BoxState aligned;
  double corner_rmse = 0.0;
};

SymmetryAlignment align_to_truth(const BoxState& estimate, const BoxState& truth);

struct FrameErrors {
  std::string frame_id;
  double position_error = 0.0;  // meters
  double rotation_error = 0.0;  // radians, after alignment
  double shape_error = 0.0;     // meters, after alignment
};

struct CdfSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (threshold px, fraction)
};

struct EvalSummary {
  double ape = 0.0;
  double are = 0.0;
  double ase = 0.0;
  std::vector<FrameErrors> frames;
  std::vector<CdfSeries> cdfs;
};

/// Aggregates APE/ARE/ASE over matched frame ids; throws MissingTruth when an
/// estimate has no ground truth. Keypoint-error CDFs are attached by the
/// caller via make_cdf (the pipeline knows which error populations exist).
EvalSummary evaluate(const std::vector<std::pair<std::string, BoxState>>& estimates,
                     const std::map<std::string, BoxState>& truths);

/// Empirical CDF of |errors| at thresholds {0, step, 2*step, ..., max}.
CdfSeries make_cdf(std::string label, std::vector<double> errors_px,
                   double max_px = 60.0, double step_px = 1.0);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant or sizes mismatch.
double spearman_rank_correlation(std::span<const double> x,
                                 std::span<const double> y);

}  // namespace stereobox
