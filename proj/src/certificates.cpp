#include "stereobox/certificates.hpp"

#include <algorithm>
#include <array>

namespace stereobox {

std::string to_string(ViewSide v) {
  return v == ViewSide::left ? "left" : "right";
}

std::string to_string(LabelSource s) {
  return s == LabelSource::predicted ? "predicted" : "reprojected";
}

BitMask silhouette_mask(const PinholeCamera& camera, const Pose& pose,
                        const Shape& shape, double depth_min) {
  const CanonicalCube cube = canonical_cube_corners();
  std::array<Vec2, 8> projected;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p = transform_corner(pose, shape, cube.corners[c]);
    if (!(p.z() > depth_min)) throw PointBehindCamera(p.z());
    projected[c] = project(camera, p, depth_min);
  }
  const std::vector<Vec2> hull = convex_hull(projected);
  return rasterize_convex_polygon(hull, camera.width, camera.height);
}

Cert2dResult cert_2d(const BoxState& est, const StereoRig& rig,
                     const BitMask& mask_left, const BitMask& mask_right,
                     double eps_2d) {
  const Pose right_pose = rig.t_right_from_left * est.pose;
  const BitMask est_left = silhouette_mask(rig.left, est.pose, est.shape);
  const BitMask est_right = silhouette_mask(rig.right, right_pose, est.shape);
  Cert2dResult out;
  out.iou_left = iou(est_left, mask_left);
  out.iou_right = iou(est_right, mask_right);
  out.pass = std::min(out.iou_left, out.iou_right) > 1.0 - eps_2d;
  return out;
}

CertResidualResult cert_residual(const Vec2& residual, double eps_res) {
  const bool pass = residual.norm() < eps_res;
  return {pass, pass ? LabelSource::predicted : LabelSource::reprojected};
}

CertEpipolarResult cert_epipolar(const Vec2& kp_left, const Vec2& kp_right,
                                 const StereoRig& rig, double eps_epi) {
  const auto [rect_left, rect_right] = rectify(rig, kp_left, kp_right);
  const double ydiff = std::abs(rect_left.y() - rect_right.y());
  return {ydiff < eps_epi, ydiff};
}

namespace {

bool pixel_in_bounds(const PinholeCamera& cam, const Vec2& px) {
  return px.x() >= 0.0 && px.x() <= cam.width - 1 && px.y() >= 0.0 &&
         px.y() <= cam.height - 1;
}

}  // namespace

CertificateReport select_pseudo_labels(const SolveResult& est,
                                       const FrameObservation& obs,
                                       const StereoRig& rig,
                                       const BitMask& mask_left,
                                       const BitMask& mask_right,
                                       const CertificateThresholds& thresholds) {
  CertificateReport report;
  report.frame_id = obs.frame_id;

  const Cert2dResult c2d =
      cert_2d(est.state, rig, mask_left, mask_right, thresholds.eps_2d);
  report.iou_left = c2d.iou_left;
  report.iou_right = c2d.iou_right;
  report.pass_2d = c2d.pass;
  report.accepted = c2d.pass;

  // Residual decision per observed keypoint. The reprojected pixel is the
  // observation plus its residual (delta = reprojection - observation).
  report.keypoints.reserve(obs.total());
  std::array<int, 8> left_slot, right_slot;
  left_slot.fill(-1);
  right_slot.fill(-1);
  for (std::size_t i = 0; i < obs.left.size(); ++i) {
    const auto& kp = obs.left[i];
    KeypointCertificate cert;
    cert.view = ViewSide::left;
    cert.corner_index = kp.corner_index;
    cert.predicted = kp.pixel;
    cert.reprojected = kp.pixel + est.residuals.left[i];
    cert.residual_norm = est.residuals.left[i].norm();
    const CertResidualResult r = cert_residual(est.residuals.left[i], thresholds.eps_res);
    cert.pass_res = r.pass;
    cert.source = r.source;
    left_slot[kp.corner_index] = static_cast<int>(report.keypoints.size());
    report.keypoints.push_back(cert);
  }
  for (std::size_t i = 0; i < obs.right.size(); ++i) {
    const auto& kp = obs.right[i];
    KeypointCertificate cert;
    cert.view = ViewSide::right;
    cert.corner_index = kp.corner_index;
    cert.predicted = kp.pixel;
    cert.reprojected = kp.pixel + est.residuals.right[i];
    cert.residual_norm = est.residuals.right[i].norm();
    const CertResidualResult r = cert_residual(est.residuals.right[i], thresholds.eps_res);
    cert.pass_res = r.pass;
    cert.source = r.source;
    right_slot[kp.corner_index] = static_cast<int>(report.keypoints.size());
    report.keypoints.push_back(cert);
  }

  // Epipolar check on the chosen pixels of stereo-paired corners.
  for (int c = 0; c < 8; ++c) {
    if (left_slot[c] < 0 || right_slot[c] < 0) continue;
    KeypointCertificate& kl = report.keypoints[left_slot[c]];
    KeypointCertificate& kr = report.keypoints[right_slot[c]];
    const Vec2 chosen_l = kl.pass_res ? kl.predicted : kl.reprojected;
    const Vec2 chosen_r = kr.pass_res ? kr.predicted : kr.reprojected;
    const CertEpipolarResult epi =
        cert_epipolar(chosen_l, chosen_r, rig, thresholds.eps_epi);
    kl.has_stereo_pair = kr.has_stereo_pair = true;
    kl.epi_vacuous = kr.epi_vacuous = false;
    kl.ydiff = kr.ydiff = epi.ydiff;
    kl.pass_epi = kr.pass_epi = epi.pass;
  }

  for (KeypointCertificate& kc : report.keypoints) {
    const Vec2 chosen = kc.pass_res ? kc.predicted : kc.reprojected;
    const PinholeCamera& cam = kc.view == ViewSide::left ? rig.left : rig.right;
    kc.emitted = report.accepted && kc.pass_epi && pixel_in_bounds(cam, chosen);
    if (kc.emitted) {
      report.labels.push_back({kc.view, kc.corner_index, chosen, kc.source});
    }
  }
  return report;
}

}  // namespace stereobox
