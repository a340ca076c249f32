#include "stereobox/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stereobox {

void validate_observations(const FrameObservation& obs) {
  for (const auto* list : {&obs.left, &obs.right}) {
    std::array<bool, 8> seen{};
    for (const KeypointObservation& kp : *list) {
      if (kp.corner_index < 0 || kp.corner_index > 7) {
        throw Error("frame " + obs.frame_id + ": corner_index " +
                    std::to_string(kp.corner_index) + " out of range");
      }
      if (seen[kp.corner_index]) {
        throw DuplicateCorner("frame " + obs.frame_id + ": corner " +
                              std::to_string(kp.corner_index) +
                              " observed twice in one view");
      }
      seen[kp.corner_index] = true;
      if (!kp.pixel.allFinite()) {
        throw Error("frame " + obs.frame_id + ": non-finite pixel");
      }
    }
  }
}

double geman_mcclure(double r, double c) {
  const double r2 = r * r;
  const double c2 = c * c;
  return c2 * r2 / (r2 + c2);
}

namespace {

// Loss as a function of s = |delta|^2.
inline double loss_of_s(double s, const RobustLossConfig& loss) {
  if (loss.kind == LossKind::squared) return s;
  const double c2 = loss.scale_c * loss.scale_c;
  return c2 * s / (s + c2);
}

inline double dloss_ds(double s, const RobustLossConfig& loss) {
  if (loss.kind == LossKind::squared) return 1.0;
  const double c2 = loss.scale_c * loss.scale_c;
  const double den = s + c2;
  return c2 * c2 / (den * den);
}

struct ObsItem {
  bool right_view;
  int corner_index;
  Vec3 u;       // canonical corner
  Vec2 pixel;   // observed
};

std::vector<ObsItem> flatten(const FrameObservation& obs) {
  const CanonicalCube cube = canonical_cube_corners();
  std::vector<ObsItem> items;
  items.reserve(obs.total());
  for (const auto& kp : obs.left)
    items.push_back({false, kp.corner_index, cube.corners[kp.corner_index], kp.pixel});
  for (const auto& kp : obs.right)
    items.push_back({true, kp.corner_index, cube.corners[kp.corner_index], kp.pixel});
  return items;
}

// Returns false when any observed corner falls behind its camera. The
// gradient pointers may be null for objective-only evaluation.
bool evaluate(const std::vector<ObsItem>& items, const StereoRig& rig,
              const RobustLossConfig& loss, double depth_min, const Mat3& rot,
              const Vec3& t, const Vec3& dims, double* value, Mat3* g_rot,
              Vec3* g_t, Vec3* g_dims, const ObsItem** offender = nullptr) {
  const Mat3& r_rl = rig.t_right_from_left.rotation.matrix();
  const Vec3& t_rl = rig.t_right_from_left.translation;

  double total = 0.0;
  if (g_rot) {
    g_rot->setZero();
    g_t->setZero();
    g_dims->setZero();
  }

  for (const ObsItem& item : items) {
    const Vec3 p_obj = dims.cwiseProduct(item.u);
    const Vec3 p_left = rot * p_obj + t;
    const Vec3 p = item.right_view ? Vec3(r_rl * p_left + t_rl) : p_left;
    if (!(p.z() > depth_min)) {
      if (offender) *offender = &item;
      return false;
    }
    const PinholeCamera& cam = item.right_view ? rig.right : rig.left;
    const double inv_z = 1.0 / p.z();
    const Vec2 delta(cam.fx * p.x() * inv_z + cam.cx - item.pixel.x(),
                     cam.fy * p.y() * inv_z + cam.cy - item.pixel.y());
    const double s = delta.squaredNorm();
    total += loss_of_s(s, loss);

    if (g_rot) {
      const double w = 2.0 * dloss_ds(s, loss);
      const double a = w * delta.x() * cam.fx * inv_z;
      const double b = w * delta.y() * cam.fy * inv_z;
      Vec3 g_p(a, b, -(a * p.x() + b * p.y()) * inv_z);
      const Vec3 g_pl = item.right_view ? Vec3(r_rl.transpose() * g_p) : g_p;
      *g_t += g_pl;
      *g_rot += g_pl * p_obj.transpose();
      *g_dims += (rot.transpose() * g_pl).cwiseProduct(item.u);
    }
  }
  *value = total;
  return true;
}

}  // namespace

ResidualSet residuals(const BoxState& state, const FrameObservation& obs,
                      const StereoRig& rig, double depth_min) {
  const CanonicalCube cube = canonical_cube_corners();
  const Pose right_pose = rig.t_right_from_left * state.pose;

  ResidualSet out;
  out.left.reserve(obs.left.size());
  out.right.reserve(obs.right.size());
  for (const auto& kp : obs.left) {
    const Vec3 p = transform_corner(state.pose, state.shape, cube.corners[kp.corner_index]);
    if (!(p.z() > depth_min)) throw PointBehindCamera(p.z(), "left", kp.corner_index);
    out.left.push_back(project(rig.left, p, depth_min) - kp.pixel);
  }
  for (const auto& kp : obs.right) {
    const Vec3 p = transform_corner(right_pose, state.shape, cube.corners[kp.corner_index]);
    if (!(p.z() > depth_min)) throw PointBehindCamera(p.z(), "right", kp.corner_index);
    out.right.push_back(project(rig.right, p, depth_min) - kp.pixel);
  }
  return out;
}

double objective(const BoxState& state, const FrameObservation& obs,
                 const StereoRig& rig, const RobustLossConfig& loss,
                 double depth_min) {
  return objective_relaxed(state.pose.rotation.matrix(), state.pose.translation,
                           state.shape.dims, obs, rig, loss, depth_min);
}

double objective_relaxed(const Mat3& rot, const Vec3& translation,
                         const Vec3& dims, const FrameObservation& obs,
                         const StereoRig& rig, const RobustLossConfig& loss,
                         double depth_min) {
  const auto items = flatten(obs);
  double value = 0.0;
  const ObsItem* offender = nullptr;
  if (!evaluate(items, rig, loss, depth_min, rot, translation, dims, &value,
                nullptr, nullptr, nullptr, &offender)) {
    throw PointBehindCamera(0.0, offender->right_view ? "right" : "left",
                            offender->corner_index);
  }
  return value;
}

ObjectiveGradient objective_gradient(const Mat3& rot, const Vec3& translation,
                                     const Vec3& dims,
                                     const FrameObservation& obs,
                                     const StereoRig& rig,
                                     const RobustLossConfig& loss,
                                     double depth_min) {
  const auto items = flatten(obs);
  ObjectiveGradient g;
  const ObsItem* offender = nullptr;
  if (!evaluate(items, rig, loss, depth_min, rot, translation, dims, &g.value,
                &g.rotation, &g.translation, &g.dims, &offender)) {
    throw PointBehindCamera(0.0, offender->right_view ? "right" : "left",
                            offender->corner_index);
  }
  return g;
}

const std::vector<CubeSymmetry>& cube_rotation_group() {
  static const std::vector<CubeSymmetry> group = [] {
    std::vector<CubeSymmetry> out;
    constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                 {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) {
      for (int sx : {-1, 1}) {
        for (int sy : {-1, 1}) {
          for (int sz : {-1, 1}) {
            const int sign[3] = {sx, sy, sz};
            Mat3 m = Mat3::Zero();
            for (int col = 0; col < 3; ++col) m(p[col], col) = sign[col];
            if (m.determinant() > 0.5) {
              out.push_back({m, {p[0], p[1], p[2]}});
            }
          }
        }
      }
    }
    return out;
  }();
  return group;
}

namespace {

// Midpoint of the closest points between the two viewing rays.
std::optional<Vec3> triangulate_midpoint(const StereoRig& rig, const Vec2& px_l,
                                         const Vec2& px_r) {
  const Mat3& r_rl = rig.t_right_from_left.rotation.matrix();
  const Vec3 c_r = -(r_rl.transpose() * rig.t_right_from_left.translation);
  const Vec3 d1 = unproject(rig.left, px_l).normalized();
  const Vec3 d2 = (r_rl.transpose() * unproject(rig.right, px_r)).normalized();
  const Vec3 w0 = -c_r;
  const double b = d1.dot(d2);
  const double d = d1.dot(w0);
  const double e = d2.dot(w0);
  const double denom = 1.0 - b * b;
  if (denom < 1e-12) return std::nullopt;  // near-parallel rays
  const double s1 = (b * e - d) / denom;
  const double s2 = (e - b * d) / denom;
  return 0.5 * (s1 * d1 + c_r + s2 * d2);
}

}  // namespace

BoxState initialize(const FrameObservation& obs, const StereoRig& rig,
                    double shape_floor, double depth_min) {
  std::array<const KeypointObservation*, 8> left{}, right{};
  for (const auto& kp : obs.left) left[kp.corner_index] = &kp;
  for (const auto& kp : obs.right) right[kp.corner_index] = &kp;

  std::vector<Vec3> corners;
  for (int c = 0; c < 8; ++c) {
    if (!left[c] || !right[c]) continue;
    if (auto p = triangulate_midpoint(rig, left[c]->pixel, right[c]->pixel)) {
      corners.push_back(*p);
    }
  }
  if (corners.empty()) {
    throw InsufficientObservations("frame " + obs.frame_id +
                                   ": no stereo-matched corner to triangulate");
  }

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : corners) centroid += p;
  centroid /= static_cast<double>(corners.size());

  Vec3 dims(0.2, 0.2, 0.2);
  if (corners.size() >= 4) {
    Vec3 lo = corners.front(), hi = corners.front();
    for (const Vec3& p : corners) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    dims = (hi - lo).cwiseMax(shape_floor);
  }

  // Rotation restarts over the cube group; extents were measured with the
  // identity orientation, so permute dims along with each candidate.
  const auto items = flatten(obs);
  const RobustLossConfig squared{LossKind::squared, 10.0};
  Mat3 best_rot = Mat3::Identity();
  Vec3 best_dims = dims;
  double best_obj = std::numeric_limits<double>::infinity();
  for (const CubeSymmetry& sym : cube_rotation_group()) {
    const Vec3 cand_dims = sym.permute_dims(dims);
    double value;
    if (!evaluate(items, rig, squared, depth_min, sym.rotation, centroid,
                  cand_dims, &value, nullptr, nullptr, nullptr)) {
      continue;
    }
    if (value < best_obj) {
      best_obj = value;
      best_rot = sym.rotation;
      best_dims = cand_dims;
    }
  }

  return BoxState{Pose{project_to_so3(best_rot), centroid},
                  Shape{best_dims}};
}

SolveResult solve(const FrameObservation& obs, const StereoRig& rig,
                  const SolverConfig& cfg,
                  const std::optional<BoxState>& init) {
  validate_observations(obs);
  if (obs.total() < 6) {
    throw InsufficientObservations("frame " + obs.frame_id + ": " +
                                   std::to_string(obs.total()) +
                                   " observations, need at least 6");
  }

  const BoxState start =
      init ? *init : initialize(obs, rig, cfg.shape_floor, cfg.depth_min);
  const auto items = flatten(obs);

  Mat3 rot = start.pose.rotation.matrix();
  Vec3 t = start.pose.translation;
  Vec3 dims = start.shape.dims.cwiseMax(cfg.shape_floor);

  double f;
  if (!evaluate(items, rig, cfg.loss, cfg.depth_min, rot, t, dims, &f, nullptr,
                nullptr, nullptr) ||
      !std::isfinite(f)) {
    throw NonFiniteObjective("frame " + obs.frame_id +
                             ": objective not finite at the initial state");
  }

  Mat3 g_rot;
  Vec3 g_t, g_dims;
  Mat3 prev_rot;
  Vec3 prev_t, prev_dims;
  Mat3 prev_g_rot;
  Vec3 prev_g_t, prev_g_dims;
  bool have_prev = false;

  int iter = 0;
  bool converged = false;
  std::vector<double> trace;
  trace.push_back(f);
  for (; iter < cfg.max_iters; ++iter) {
    evaluate(items, rig, cfg.loss, cfg.depth_min, rot, t, dims, &f, &g_rot,
             &g_t, &g_dims);

    // Projected gradient: rotation part restricted to the tangent space of
    // SO(3), dims components inactive when pinned at the floor.
    const Mat3 skew = 0.5 * (rot.transpose() * g_rot - g_rot.transpose() * rot);
    Vec3 g_dims_proj = g_dims;
    for (int i = 0; i < 3; ++i) {
      if (dims(i) <= cfg.shape_floor && g_dims(i) > 0) g_dims_proj(i) = 0;
    }
    const double pg_norm = std::sqrt(skew.squaredNorm() + g_t.squaredNorm() +
                                     g_dims_proj.squaredNorm());
    if (pg_norm <= cfg.grad_tol) {
      converged = true;
      break;
    }

    // Spectral (Barzilai-Borwein) trial step, safeguarded by the monotone
    // backtracking below.
    double trial = cfg.step_size;
    if (have_prev) {
      const Mat3 dx_rot = rot - prev_rot;
      const Vec3 dx_t = t - prev_t;
      const Vec3 dx_d = dims - prev_dims;
      const Mat3 dg_rot = g_rot - prev_g_rot;
      const Vec3 dg_t = g_t - prev_g_t;
      const Vec3 dg_d = g_dims - prev_g_dims;
      const double xg = dx_rot.cwiseProduct(dg_rot).sum() + dx_t.dot(dg_t) +
                        dx_d.dot(dg_d);
      const double gg =
          dg_rot.squaredNorm() + dg_t.squaredNorm() + dg_d.squaredNorm();
      if (xg > 0 && gg > 0) trial = std::clamp(xg / gg, 1e-12, 1e8);
    }

    prev_rot = rot;
    prev_t = t;
    prev_dims = dims;
    prev_g_rot = g_rot;
    prev_g_t = g_t;
    prev_g_dims = g_dims;
    have_prev = true;

    // Backtracking by halving; sufficient decrease is measured against the
    // actual (post-projection) step, which stays meaningful on the manifold.
    bool accepted = false;
    double best_f = f;
    Mat3 best_rot;
    Vec3 best_t, best_dims_v;
    bool have_best = false;
    while (trial >= 1e-20) {
      Mat3 cand_rot_raw = rot - trial * g_rot;
      Vec3 cand_t = t - trial * g_t;
      Vec3 cand_dims = (dims - trial * g_dims).cwiseMax(cfg.shape_floor);
      Mat3 cand_rot;
      bool projectable = true;
      try {
        cand_rot = project_to_so3(cand_rot_raw).matrix();
      } catch (const DegenerateMatrix&) {
        projectable = false;
      }
      if (projectable) {
        double f_cand;
        if (evaluate(items, rig, cfg.loss, cfg.depth_min, cand_rot, cand_t,
                     cand_dims, &f_cand, nullptr, nullptr, nullptr) &&
            std::isfinite(f_cand)) {
          const double dist2 = (cand_rot - rot).squaredNorm() +
                               (cand_t - t).squaredNorm() +
                               (cand_dims - dims).squaredNorm();
          if (dist2 == 0.0) break;  // step too small to move the state
          if (f_cand <= f - 1e-4 * dist2 / trial) {
            rot = cand_rot;
            t = cand_t;
            dims = cand_dims;
            f = f_cand;
            accepted = true;
            break;
          }
          if (f_cand < best_f) {
            best_f = f_cand;
            best_rot = cand_rot;
            best_t = cand_t;
            best_dims_v = cand_dims;
            have_best = true;
          }
        }
      }
      trial *= 0.5;
    }

    if (!accepted) {
      if (have_best && best_f < f - 1e-14 * std::max(1.0, std::abs(f))) {
        rot = best_rot;
        t = best_t;
        dims = best_dims_v;
        f = best_f;
      } else {
        converged = true;  // no achievable decrease: numerically stationary
        ++iter;
        break;
      }
    }
    trace.push_back(f);
  }

  SolveResult result;
  result.state = BoxState{Pose{project_to_so3(rot), t}, Shape{dims}};
  result.residuals = residuals(result.state, obs, rig, cfg.depth_min);
  result.objective = f;
  result.iterations = iter;
  result.converged = converged;
  result.objective_trace = std::move(trace);
  return result;
}

}  // namespace stereobox
