#include "stereobox/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace stereobox {

Rotation3 Rotation3::from_matrix(const Mat3& m, double tol) {
  const double ortho = (m * m.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = m.determinant();
  if (!m.allFinite() || ortho > tol || std::abs(det - 1.0) > tol) {
    throw DegenerateMatrix("matrix is not a rotation: |R R^T - I| = " +
                           std::to_string(ortho) + ", det = " + std::to_string(det));
  }
  return Rotation3(m, Unchecked{});
}

Rotation3 Rotation3::axis_angle(const Vec3& axis, double angle) {
  Mat3 m = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return Rotation3(m, Unchecked{});
}

Shape Shape::from_dims(const Vec3& dims) {
  if (!dims.allFinite() || (dims.array() <= 0.0).any()) {
    throw Error("shape dims must be positive and finite");
  }
  return Shape{dims};
}

CanonicalCube canonical_cube_corners() {
  CanonicalCube cube;
  for (int i = 0; i < 8; ++i) {
    cube.corners[i] = Vec3((i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5,
                           (i & 4) ? 0.5 : -0.5);
  }
  return cube;
}

Vec3 transform_corner(const Pose& pose, const Shape& shape, const Vec3& u) {
  return pose.apply(shape.dims.cwiseProduct(u));
}

Vec2 project(const PinholeCamera& camera, const Vec3& p, double depth_min) {
  if (!(p.z() > depth_min)) throw PointBehindCamera(p.z());
  return Vec2(camera.fx * p.x() / p.z() + camera.cx,
              camera.fy * p.y() / p.z() + camera.cy);
}

Rotation3 project_to_so3(const Mat3& m) {
  if (!m.allFinite()) throw DegenerateMatrix("non-finite matrix");
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3& sv = svd.singularValues();  // descending
  if (sv(1) < 1e-12) {
    throw DegenerateMatrix("rank-deficient matrix: singular values " +
                           std::to_string(sv(0)) + ", " + std::to_string(sv(1)) +
                           ", " + std::to_string(sv(2)));
  }
  Mat3 uvt = svd.matrixU() * svd.matrixV().transpose();
  Vec3 d(1.0, 1.0, uvt.determinant() < 0 ? -1.0 : 1.0);
  Mat3 r = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  return Rotation3(r, Rotation3::Unchecked{});
}

double geodesic_distance(const Rotation3& r1, const Rotation3& r2) {
  // trace(r1^T r2) as sum of elementwise products keeps the metric exactly
  // symmetric in its arguments.
  const Mat3& a = r1.matrix();
  const Mat3& b = r2.matrix();
  double trace = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) trace += a(i, j) * b(i, j);
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

Vec3 unproject(const PinholeCamera& camera, const Vec2& px) {
  return Vec3((px.x() - camera.cx) / camera.fx, (px.y() - camera.cy) / camera.fy,
              1.0);
}

namespace {

Vec2 project_dir(const PinholeCamera& camera, const Vec3& d) {
  return Vec2(camera.fx * d.x() / d.z() + camera.cx,
              camera.fy * d.y() / d.z() + camera.cy);
}

}  // namespace

std::pair<Vec2, Vec2> rectify(const StereoRig& rig, const Vec2& kp_left,
                              const Vec2& kp_right) {
  const Mat3& r_rl = rig.t_right_from_left.rotation.matrix();
  // Right camera center expressed in the left frame.
  const Vec3 baseline = -(r_rl.transpose() * rig.t_right_from_left.translation);
  const double b = baseline.norm();
  if (b < 1e-9) throw DegenerateBaseline("baseline norm " + std::to_string(b));

  const Vec3 e1 = baseline / b;
  const Vec3 z_left(0, 0, 1);
  const Vec3 z_mean = (z_left + r_rl.transpose() * z_left).normalized();
  const Vec3 e2 = z_mean.cross(e1).normalized();
  const Vec3 e3 = e1.cross(e2);
  Mat3 r_rect;
  r_rect.row(0) = e1.transpose();
  r_rect.row(1) = e2.transpose();
  r_rect.row(2) = e3.transpose();

  const Vec3 dl = r_rect * unproject(rig.left, kp_left);
  const Vec3 dr = r_rect * (r_rl.transpose() * unproject(rig.right, kp_right));
  return {project_dir(rig.left, dl), project_dir(rig.left, dr)};
}

}  // namespace stereobox
