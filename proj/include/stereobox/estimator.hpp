#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stereobox/geometry.hpp"

namespace stereobox {

struct KeypointObservation {
  int corner_index = 0;  // 0-7, canonical cube ordering
  Vec2 pixel = Vec2::Zero();
  double confidence = 1.0;
};

struct FrameObservation {
  std::string frame_id;
  std::vector<KeypointObservation> left;
  std::vector<KeypointObservation> right;

  std::size_t total() const { return left.size() + right.size(); }
};

/// Throws DuplicateCorner / Error on malformed observation lists.
void validate_observations(const FrameObservation& obs);

/// Pose (object to left camera) plus cuboid dimensions.
struct BoxState {
  Pose pose;
  Shape shape;
};

enum class LossKind { squared, geman_mcclure };

struct RobustLossConfig {
  LossKind kind = LossKind::squared;
  double scale_c = 10.0;  // pixels
};

struct SolverConfig {
  int max_iters = 2000;
  double step_size = 1e-2;  // first trial step; backtracking from there
  double grad_tol = 1e-8;
  double shape_floor = 1e-3;  // meters
  RobustLossConfig loss;
  double depth_min = kDefaultDepthMin;
};

/// Reprojection residuals aligned one-to-one with the observation lists.
struct ResidualSet {
  std::vector<Vec2> left;
  std::vector<Vec2> right;
};

struct SolveResult {
  BoxState state;
  ResidualSet residuals;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // value after each accepted step
};

/// delta = project(camera, reprojected corner) - observed pixel, per view.
ResidualSet residuals(const BoxState& state, const FrameObservation& obs,
                      const StereoRig& rig,
                      double depth_min = kDefaultDepthMin);

/// rho(r) = c^2 r^2 / (r^2 + c^2): quadratic near 0, saturates at c^2.
double geman_mcclure(double r, double c);

double objective(const BoxState& state, const FrameObservation& obs,
                 const StereoRig& rig, const RobustLossConfig& loss,
                 double depth_min = kDefaultDepthMin);

/// Objective over the relaxed parameters the solver iterates on; `rot` is an
/// arbitrary 3x3 matrix, not constrained to SO(3).
double objective_relaxed(const Mat3& rot, const Vec3& translation,
                         const Vec3& dims, const FrameObservation& obs,
                         const StereoRig& rig, const RobustLossConfig& loss,
                         double depth_min = kDefaultDepthMin);

struct ObjectiveGradient {
  double value = 0.0;
  Mat3 rotation = Mat3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec3 dims = Vec3::Zero();
};

/// Analytic gradient of objective_relaxed at the given point.
ObjectiveGradient objective_gradient(const Mat3& rot, const Vec3& translation,
                                     const Vec3& dims,
                                     const FrameObservation& obs,
                                     const StereoRig& rig,
                                     const RobustLossConfig& loss,
                                     double depth_min = kDefaultDepthMin);

/// Midpoint-triangulates stereo-matched corners, then picks the best of the
/// 24 cube-group rotations by squared objective. Throws
/// InsufficientObservations when no corner is seen in both views.
BoxState initialize(const FrameObservation& obs, const StereoRig& rig,
                    double shape_floor = 1e-3,
                    double depth_min = kDefaultDepthMin);

/// Projected gradient descent on (relaxed rotation, translation, dims) with
/// per-step SVD projection to SO(3), dims clamped at shape_floor, and a
/// monotone backtracking line search.
SolveResult solve(const FrameObservation& obs, const StereoRig& rig,
                  const SolverConfig& cfg,
                  const std::optional<BoxState>& init = std::nullopt);

/// One rotational symmetry of the cube: permuted_dims[i] = dims[dims_perm[i]]
/// makes (R * rotation, t, permuted_dims) reproject identically to (R, t, dims).
struct CubeSymmetry {
  Mat3 rotation;
  std::array<int, 3> dims_perm;

  Vec3 permute_dims(const Vec3& dims) const {
    return Vec3(dims[dims_perm[0]], dims[dims_perm[1]], dims[dims_perm[2]]);
  }
};

/// All 24 proper rotations of the cube (signed permutations, det +1).
const std::vector<CubeSymmetry>& cube_rotation_group();

}  // namespace stereobox
