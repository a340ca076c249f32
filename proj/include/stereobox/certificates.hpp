#pragma once

#include <string>
#include <vector>

#include "stereobox/estimator.hpp"
#include "stereobox/mask.hpp"

namespace stereobox {

struct CertificateThresholds {
  double eps_2d = 0.05;   // pass needs IoU > 1 - eps_2d in both views
  double eps_res = 42.0;  // px
  double eps_epi = 20.0;  // px
};

enum class ViewSide { left, right };
enum class LabelSource { predicted, reprojected };

std::string to_string(ViewSide v);
std::string to_string(LabelSource s);

struct PseudoLabel {
  ViewSide view;
  int corner_index;
  Vec2 pixel;
  LabelSource source;
};

/// Per observed keypoint: the residual decision, the epipolar check on the
/// chosen pixel pair, and whether a label was emitted.
struct KeypointCertificate {
  ViewSide view = ViewSide::left;
  int corner_index = 0;
  Vec2 predicted = Vec2::Zero();    // detector output
  Vec2 reprojected = Vec2::Zero();  // projection of the estimated box corner
  double residual_norm = 0.0;
  bool pass_res = false;
  LabelSource source = LabelSource::predicted;
  bool has_stereo_pair = false;
  double ydiff = 0.0;  // rectified |y_l - y_r| of the chosen pair
  bool pass_epi = true;
  bool epi_vacuous = true;  // corner seen in one view: check skipped
  bool emitted = false;
};

struct CertificateReport {
  std::string frame_id;
  double iou_left = 0.0;
  double iou_right = 0.0;
  bool pass_2d = false;
  bool accepted = false;
  std::vector<KeypointCertificate> keypoints;
  std::vector<PseudoLabel> labels;  // empty unless accepted
};

/// Scanline rasterization of the convex hull of the 8 projected corners.
/// Throws PointBehindCamera when a corner is at or behind depth_min.
BitMask silhouette_mask(const PinholeCamera& camera, const Pose& pose,
                        const Shape& shape,
                        double depth_min = kDefaultDepthMin);

struct Cert2dResult {
  bool pass = false;
  double iou_left = 0.0;
  double iou_right = 0.0;
};

/// Renders the estimate's silhouettes (right view via T^r_l * pose) and
/// gates on min(iou_left, iou_right) > 1 - eps_2d.
Cert2dResult cert_2d(const BoxState& est, const StereoRig& rig,
                     const BitMask& mask_left, const BitMask& mask_right,
                     double eps_2d);

struct CertResidualResult {
  bool pass = false;
  LabelSource source = LabelSource::reprojected;
};

/// pass: |residual| < eps_res, keep the predicted pixel; fail: fall back to
/// the reprojected one.
CertResidualResult cert_residual(const Vec2& residual, double eps_res);

struct CertEpipolarResult {
  bool pass = false;
  double ydiff = 0.0;
};

CertEpipolarResult cert_epipolar(const Vec2& kp_left, const Vec2& kp_right,
                                 const StereoRig& rig, double eps_epi);

/// Full selection rule: frame gate on the 2D certificate, per-keypoint
/// predicted/reprojected choice by the residual certificate, epipolar check
/// on the chosen stereo pairs.
CertificateReport select_pseudo_labels(const SolveResult& est,
                                       const FrameObservation& obs,
                                       const StereoRig& rig,
                                       const BitMask& mask_left,
                                       const BitMask& mask_right,
                                       const CertificateThresholds& thresholds);

}  // namespace stereobox
