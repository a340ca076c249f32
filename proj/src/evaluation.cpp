#include "stereobox/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stereobox {

SymmetryAlignment align_to_truth(const BoxState& estimate, const BoxState& truth) {
  const CanonicalCube cube = canonical_cube_corners();
  std::array<Vec3, 8> truth_corners;
  for (int c = 0; c < 8; ++c) {
    truth_corners[c] = transform_corner(truth.pose, truth.shape, cube.corners[c]);
  }

  const auto& group = cube_rotation_group();
  SymmetryAlignment best;
  best.corner_rmse = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < group.size(); ++g) {
    const Mat3 rot = estimate.pose.rotation.matrix() * group[g].rotation;
    const Vec3 dims = group[g].permute_dims(estimate.shape.dims);
    const BoxState candidate{Pose{project_to_so3(rot), estimate.pose.translation},
                             Shape{dims}};
    double sq = 0.0;
    for (int c = 0; c < 8; ++c) {
      const Vec3 p = transform_corner(candidate.pose, candidate.shape, cube.corners[c]);
      sq += (p - truth_corners[c]).squaredNorm();
    }
    const double rmse = std::sqrt(sq / 8.0);
    if (rmse < best.corner_rmse) {
      best.corner_rmse = rmse;
      best.group_index = static_cast<int>(g);
      best.aligned = candidate;
    }
  }
  return best;
}

EvalSummary evaluate(const std::vector<std::pair<std::string, BoxState>>& estimates,
                     const std::map<std::string, BoxState>& truths) {
  EvalSummary summary;
  summary.frames.reserve(estimates.size());
  for (const auto& [frame_id, estimate] : estimates) {
    const auto it = truths.find(frame_id);
    if (it == truths.end()) {
      throw MissingTruth("no ground truth for frame " + frame_id);
    }
    const BoxState& truth = it->second;
    const SymmetryAlignment aligned = align_to_truth(estimate, truth);

    FrameErrors fe;
    fe.frame_id = frame_id;
    fe.position_error =
        (aligned.aligned.pose.translation - truth.pose.translation).norm();
    fe.rotation_error =
        geodesic_distance(aligned.aligned.pose.rotation, truth.pose.rotation);
    fe.shape_error = (aligned.aligned.shape.dims - truth.shape.dims).norm();
    summary.frames.push_back(fe);

    summary.ape += fe.position_error;
    summary.are += fe.rotation_error;
    summary.ase += fe.shape_error;
  }
  if (!summary.frames.empty()) {
    const double n = static_cast<double>(summary.frames.size());
    summary.ape /= n;
    summary.are /= n;
    summary.ase /= n;
  }
  return summary;
}

CdfSeries make_cdf(std::string label, std::vector<double> errors_px,
                   double max_px, double step_px) {
  CdfSeries series;
  series.label = std::move(label);
  std::sort(errors_px.begin(), errors_px.end());
  const double n = static_cast<double>(errors_px.size());
  for (double t = 0.0; t <= max_px + 1e-12; t += step_px) {
    const auto le = std::upper_bound(errors_px.begin(), errors_px.end(), t);
    const double fraction =
        errors_px.empty()
            ? 0.0
            : static_cast<double>(le - errors_px.begin()) / n;
    series.points.emplace_back(t, fraction);
  }
  return series;
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rank_correlation(std::span<const double> x,
                                 std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace stereobox
