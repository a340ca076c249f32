#pragma once

#include <Eigen/Core>
#include <array>
#include <utility>

#include "stereobox/errors.hpp"

namespace stereobox {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

constexpr double kDefaultDepthMin = 1e-6;  // meters

/// Proper rotation matrix; validated to R*R^T = I, det R = +1 within 1e-9.
class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}

  static Rotation3 from_matrix(const Mat3& m, double tol = 1e-9);
  static Rotation3 axis_angle(const Vec3& axis, double angle);

  const Mat3& matrix() const { return m_; }
  Rotation3 transposed() const { return Rotation3(m_.transpose(), Unchecked{}); }

  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation3 operator*(const Rotation3& o) const {
    return Rotation3(m_ * o.m_, Unchecked{});
  }

 private:
  struct Unchecked {};
  Rotation3(const Mat3& m, Unchecked) : m_(m) {}
  friend Rotation3 project_to_so3(const Mat3&);

  Mat3 m_;
};

struct Pose {
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const {
    Rotation3 rt = rotation.transposed();
    return Pose{rt, -(rt * translation)};
  }
};

/// a ∘ b: apply b first, then a.
inline Pose operator*(const Pose& a, const Pose& b) {
  return Pose{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

/// Per-axis cuboid dimensions (a,b,c) in meters, all > 0.
struct Shape {
  Vec3 dims = Vec3::Ones();

  static Shape from_dims(const Vec3& dims);
};

struct PinholeCamera {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
};

struct StereoRig {
  PinholeCamera left;
  PinholeCamera right;
  Pose t_right_from_left;  // maps left-camera coordinates to right-camera
};

/// The 8 unit-cube corners in {-0.5,+0.5}^3, index i = 4*z_bit + 2*y_bit + x_bit.
struct CanonicalCube {
  std::array<Vec3, 8> corners;
};

CanonicalCube canonical_cube_corners();

/// R * (dims ⊙ u) + t
Vec3 transform_corner(const Pose& pose, const Shape& shape, const Vec3& u);

/// Pixel-center convention: (0,0) is the center of the top-left pixel.
/// Throws PointBehindCamera when p.z() <= depth_min.
Vec2 project(const PinholeCamera& camera, const Vec3& p,
             double depth_min = kDefaultDepthMin);

/// Ray direction (z = 1) through a pixel.
Vec3 unproject(const PinholeCamera& camera, const Vec2& px);

/// Nearest rotation in Frobenius norm via SVD; throws DegenerateMatrix when
/// the two smallest singular values are both below 1e-12.
Rotation3 project_to_so3(const Mat3& m);

/// arccos((trace(r1^T r2) - 1) / 2), clamped to [0, pi].
double geodesic_distance(const Rotation3& r1, const Rotation3& r2);

/// Maps a stereo keypoint pair into a common rectified frame in which
/// correspondences share y. New x-axis along the baseline, y orthogonal to
/// the baseline and the mean optical axis; shared intrinsics = left camera.
std::pair<Vec2, Vec2> rectify(const StereoRig& rig, const Vec2& kp_left,
                              const Vec2& kp_right);

}  // namespace stereobox
