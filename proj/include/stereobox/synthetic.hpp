#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "stereobox/estimator.hpp"
#include "stereobox/mask.hpp"

namespace stereobox {

struct SceneConfig {
  Vec3 dims_min = Vec3(0.1, 0.1, 0.1);  // meters, per axis
  Vec3 dims_max = Vec3(0.4, 0.4, 0.4);
  double depth_near = 1.5;  // box center depth range, meters
  double depth_far = 3.0;
  // Empty: rotation uniform over SO(3); otherwise a uniform-axis rotation
  // with angle drawn from [0, rotation_max_angle].
  std::optional<double> rotation_max_angle;
  double baseline = 0.12;  // meters, right camera along +x
  PinholeCamera intrinsics{1400.0, 1400.0, 819.5, 615.5, 1640, 1232};
  double noise_sigma = 0.0;      // px
  double outlier_rate = 0.0;     // fraction of keypoints
  double outlier_magnitude = 50.0;  // px
  double dropout_rate = 0.0;     // per-keypoint visibility dropout
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  std::string frame_id;
  std::uint64_t index = 0;
  BoxState truth;
  StereoRig rig;
  std::array<Vec2, 8> clean_left;
  std::array<Vec2, 8> clean_right;
  BitMask mask_left;
  BitMask mask_right;
};

/// Identical left/right cameras separated by cfg.baseline along +x.
StereoRig make_rig(const SceneConfig& cfg);

/// Deterministic in (cfg.seed, index); rejection-samples until all 16 corner
/// projections land in-image in front of both cameras (max 1000 attempts,
/// then SamplingExhausted).
SyntheticScene generate_scene(const SceneConfig& cfg, std::uint64_t index);

/// Applies dropout, Gaussian noise, and fixed-magnitude outliers to the
/// clean projections; confidence = exp(-|perturbation| / 20).
FrameObservation corrupt_observations(const SyntheticScene& scene,
                                      const SceneConfig& cfg);

/// Silhouettes of the true state in both views.
std::pair<BitMask, BitMask> render_gt_masks(const SyntheticScene& scene);

}  // namespace stereobox
