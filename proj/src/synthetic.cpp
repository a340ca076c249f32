#include "stereobox/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "stereobox/certificates.hpp"
#include "stereobox/rng.hpp"

namespace stereobox {

namespace {

std::string frame_name(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06llu",
                static_cast<unsigned long long>(index));
  return buf;
}

Rotation3 random_rotation(rng::SplitMix64& gen,
                          const std::optional<double>& max_angle) {
  if (max_angle) {
    // Uniform axis, angle uniform in [0, max].
    const double z = gen.next_uniform(-1.0, 1.0);
    const double phi = gen.next_uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 axis(r * std::cos(phi), r * std::sin(phi), z);
    return Rotation3::axis_angle(axis, gen.next_uniform(0.0, *max_angle));
  }
  // Shoemake's uniform quaternion construction.
  const double u1 = gen.next_double();
  const double u2 = gen.next_double();
  const double u3 = gen.next_double();
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const double qx = a * std::sin(2.0 * std::numbers::pi * u2);
  const double qy = a * std::cos(2.0 * std::numbers::pi * u2);
  const double qz = b * std::sin(2.0 * std::numbers::pi * u3);
  const double qw = b * std::cos(2.0 * std::numbers::pi * u3);
  Eigen::Quaterniond q(qw, qx, qy, qz);
  return Rotation3::from_matrix(q.normalized().toRotationMatrix(), 1e-6);
}

bool in_image(const PinholeCamera& cam, const Vec2& px) {
  return px.x() >= 0.0 && px.x() <= cam.width - 1 && px.y() >= 0.0 &&
         px.y() <= cam.height - 1;
}

}  // namespace

StereoRig make_rig(const SceneConfig& cfg) {
  StereoRig rig;
  rig.left = cfg.intrinsics;
  rig.right = cfg.intrinsics;
  // p_right = p_left - (baseline, 0, 0)
  rig.t_right_from_left = Pose{Rotation3(), Vec3(-cfg.baseline, 0.0, 0.0)};
  return rig;
}

SyntheticScene generate_scene(const SceneConfig& cfg, std::uint64_t index) {
  const StereoRig rig = make_rig(cfg);
  const std::uint64_t scene_seed = rng::derive_stream(cfg.seed, index);
  rng::SplitMix64 gen(rng::derive_stream(scene_seed, 0));
  const CanonicalCube cube = canonical_cube_corners();

  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vec3 dims;
    for (int i = 0; i < 3; ++i) {
      dims(i) = gen.next_uniform(cfg.dims_min(i), cfg.dims_max(i));
    }
    const Rotation3 rotation = random_rotation(gen, cfg.rotation_max_angle);
    const double depth = gen.next_uniform(cfg.depth_near, cfg.depth_far);
    // Aim the box center at a pixel in the central part of the left image.
    const double u = gen.next_uniform(0.3 * (cfg.intrinsics.width - 1),
                                      0.7 * (cfg.intrinsics.width - 1));
    const double v = gen.next_uniform(0.3 * (cfg.intrinsics.height - 1),
                                      0.7 * (cfg.intrinsics.height - 1));
    const Vec3 center = depth * unproject(cfg.intrinsics, Vec2(u, v));

    const BoxState truth{Pose{rotation, center}, Shape{dims}};
    const Pose right_pose = rig.t_right_from_left * truth.pose;

    std::array<Vec2, 8> left_px, right_px;
    bool visible = true;
    for (int c = 0; c < 8 && visible; ++c) {
      const Vec3 pl = transform_corner(truth.pose, truth.shape, cube.corners[c]);
      const Vec3 pr = transform_corner(right_pose, truth.shape, cube.corners[c]);
      if (pl.z() <= kDefaultDepthMin || pr.z() <= kDefaultDepthMin) {
        visible = false;
        break;
      }
      left_px[c] = project(rig.left, pl);
      right_px[c] = project(rig.right, pr);
      visible = in_image(rig.left, left_px[c]) && in_image(rig.right, right_px[c]);
    }
    if (!visible) continue;

    SyntheticScene scene{frame_name(index),
                         index,
                         truth,
                         rig,
                         left_px,
                         right_px,
                         silhouette_mask(rig.left, truth.pose, truth.shape),
                         silhouette_mask(rig.right, right_pose, truth.shape)};
    return scene;
  }
  throw SamplingExhausted("no visible box pose found in 1000 attempts (seed " +
                          std::to_string(cfg.seed) + ", index " +
                          std::to_string(index) + ")");
}

FrameObservation corrupt_observations(const SyntheticScene& scene,
                                      const SceneConfig& cfg) {
  const std::uint64_t scene_seed = rng::derive_stream(cfg.seed, scene.index);
  rng::SplitMix64 gen(rng::derive_stream(scene_seed, 1));

  FrameObservation obs;
  obs.frame_id = scene.frame_id;
  for (int view = 0; view < 2; ++view) {
    const auto& clean = view == 0 ? scene.clean_left : scene.clean_right;
    auto& list = view == 0 ? obs.left : obs.right;
    for (int c = 0; c < 8; ++c) {
      if (gen.next_double() < cfg.dropout_rate) continue;
      Vec2 perturbation = Vec2::Zero();
      if (gen.next_double() < cfg.outlier_rate) {
        const double angle = gen.next_uniform(0.0, 2.0 * std::numbers::pi);
        perturbation = cfg.outlier_magnitude * Vec2(std::cos(angle), std::sin(angle));
      } else if (cfg.noise_sigma > 0.0) {
        perturbation =
            cfg.noise_sigma * Vec2(gen.next_gaussian(), gen.next_gaussian());
      }
      KeypointObservation kp;
      kp.corner_index = c;
      kp.pixel = clean[c] + perturbation;
      kp.confidence = std::exp(-perturbation.norm() / 20.0);
      list.push_back(kp);
    }
  }
  return obs;
}

std::pair<BitMask, BitMask> render_gt_masks(const SyntheticScene& scene) {
  const Pose right_pose = scene.rig.t_right_from_left * scene.truth.pose;
  return {silhouette_mask(scene.rig.left, scene.truth.pose, scene.truth.shape),
          silhouette_mask(scene.rig.right, right_pose, scene.truth.shape)};
}

}  // namespace stereobox
