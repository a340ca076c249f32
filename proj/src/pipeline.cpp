#include "stereobox/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace stereobox {

namespace {

using io::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Index-sharded worker pool; results land in pre-sized slots, so output
// order never depends on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = std::min<int>(workers, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int w = 0; w < spawn; ++w) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
}

}  // namespace

namespace {

Vec3 vec3_from_json(const json& j, const std::string& file,
                    const std::string& path) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError(file, path, "expected [x, y, z]");
  }
  return Vec3(io::as_number(j[0], file, path + "[0]"),
              io::as_number(j[1], file, path + "[1]"),
              io::as_number(j[2], file, path + "[2]"));
}

}  // namespace

io::json scene_config_to_json(const SceneConfig& cfg) {
  json j{{"dims_min", {cfg.dims_min.x(), cfg.dims_min.y(), cfg.dims_min.z()}},
         {"dims_max", {cfg.dims_max.x(), cfg.dims_max.y(), cfg.dims_max.z()}},
         {"depth_near", cfg.depth_near},
         {"depth_far", cfg.depth_far},
         {"baseline", cfg.baseline},
         {"intrinsics",
          {{"fx", cfg.intrinsics.fx},
           {"fy", cfg.intrinsics.fy},
           {"cx", cfg.intrinsics.cx},
           {"cy", cfg.intrinsics.cy},
           {"width", cfg.intrinsics.width},
           {"height", cfg.intrinsics.height}}},
         {"noise_sigma", cfg.noise_sigma},
         {"outlier_rate", cfg.outlier_rate},
         {"outlier_magnitude", cfg.outlier_magnitude},
         {"dropout_rate", cfg.dropout_rate},
         {"seed", cfg.seed}};
  if (cfg.rotation_max_angle) j["rotation_max_angle"] = *cfg.rotation_max_angle;
  return j;
}

SceneConfig scene_config_from_json(const io::json& j, const std::string& file) {
  SceneConfig cfg;
  if (j.contains("dims_min")) cfg.dims_min = vec3_from_json(j.at("dims_min"), file, "dims_min");
  if (j.contains("dims_max")) cfg.dims_max = vec3_from_json(j.at("dims_max"), file, "dims_max");
  if (j.contains("depth_near")) cfg.depth_near = io::get_number(j, "depth_near", file, "");
  if (j.contains("depth_far")) cfg.depth_far = io::get_number(j, "depth_far", file, "");
  if (j.contains("rotation_max_angle")) {
    cfg.rotation_max_angle = io::get_number(j, "rotation_max_angle", file, "");
  }
  if (j.contains("baseline")) cfg.baseline = io::get_number(j, "baseline", file, "");
  if (j.contains("intrinsics")) {
    const json& cam = j.at("intrinsics");
    cfg.intrinsics.fx = io::get_number(cam, "fx", file, "intrinsics");
    cfg.intrinsics.fy = io::get_number(cam, "fy", file, "intrinsics");
    cfg.intrinsics.cx = io::get_number(cam, "cx", file, "intrinsics");
    cfg.intrinsics.cy = io::get_number(cam, "cy", file, "intrinsics");
    cfg.intrinsics.width = io::get_int(cam, "width", file, "intrinsics");
    cfg.intrinsics.height = io::get_int(cam, "height", file, "intrinsics");
  }
  if (j.contains("noise_sigma")) cfg.noise_sigma = io::get_number(j, "noise_sigma", file, "");
  if (j.contains("outlier_rate")) cfg.outlier_rate = io::get_number(j, "outlier_rate", file, "");
  if (j.contains("outlier_magnitude")) {
    cfg.outlier_magnitude = io::get_number(j, "outlier_magnitude", file, "");
  }
  if (j.contains("dropout_rate")) cfg.dropout_rate = io::get_number(j, "dropout_rate", file, "");
  if (j.contains("seed")) {
    cfg.seed = static_cast<std::uint64_t>(
        io::require_field(j, "seed", file, "").get<std::int64_t>());
  }
  if ((cfg.dims_min.array() <= 0).any() ||
      (cfg.dims_max.array() < cfg.dims_min.array()).any() ||
      cfg.depth_near <= 0 || cfg.depth_far < cfg.depth_near ||
      cfg.baseline <= 0 || cfg.noise_sigma < 0 || cfg.outlier_rate < 0 ||
      cfg.outlier_rate > 1 || cfg.dropout_rate < 0 || cfg.dropout_rate > 1) {
    throw ParseError(file, "", "scene config ranges are inconsistent");
  }
  return cfg;
}

io::json solver_config_to_json(const SolverConfig& cfg) {
  return json{{"max_iters", cfg.max_iters},
              {"step_size", cfg.step_size},
              {"grad_tol", cfg.grad_tol},
              {"shape_floor", cfg.shape_floor},
              {"depth_min", cfg.depth_min},
              {"loss",
               {{"kind", cfg.loss.kind == LossKind::squared ? "squared"
                                                            : "geman_mcclure"},
                {"scale_c", cfg.loss.scale_c}}}};
}

SolverConfig solver_config_from_json(const io::json& j, const std::string& file) {
  SolverConfig cfg;
  if (j.contains("max_iters")) cfg.max_iters = io::get_int(j, "max_iters", file, "solver");
  if (j.contains("step_size")) cfg.step_size = io::get_number(j, "step_size", file, "solver");
  if (j.contains("grad_tol")) cfg.grad_tol = io::get_number(j, "grad_tol", file, "solver");
  if (j.contains("shape_floor")) cfg.shape_floor = io::get_number(j, "shape_floor", file, "solver");
  if (j.contains("depth_min")) cfg.depth_min = io::get_number(j, "depth_min", file, "solver");
  if (j.contains("loss")) {
    const json& loss = j.at("loss");
    const std::string kind = io::get_string(loss, "kind", file, "solver.loss");
    if (kind == "squared") {
      cfg.loss.kind = LossKind::squared;
    } else if (kind == "geman_mcclure") {
      cfg.loss.kind = LossKind::geman_mcclure;
    } else {
      throw ParseError(file, "solver.loss.kind", "unknown loss: " + kind);
    }
    if (loss.contains("scale_c")) {
      cfg.loss.scale_c = io::get_number(loss, "scale_c", file, "solver.loss");
    }
  }
  if (cfg.max_iters <= 0 || cfg.step_size <= 0 || cfg.shape_floor <= 0 ||
      cfg.loss.scale_c <= 0) {
    throw ParseError(file, "solver", "solver parameters must be positive");
  }
  return cfg;
}

io::json thresholds_to_json(const CertificateThresholds& t) {
  return json{{"eps_2d", t.eps_2d}, {"eps_res", t.eps_res}, {"eps_epi", t.eps_epi}};
}

CertificateThresholds thresholds_from_json(const io::json& j,
                                           const std::string& file) {
  CertificateThresholds t;
  if (j.contains("eps_2d")) t.eps_2d = io::get_number(j, "eps_2d", file, "thresholds");
  if (j.contains("eps_res")) t.eps_res = io::get_number(j, "eps_res", file, "thresholds");
  if (j.contains("eps_epi")) t.eps_epi = io::get_number(j, "eps_epi", file, "thresholds");
  if (t.eps_2d <= 0 || t.eps_2d >= 1 || t.eps_res <= 0 || t.eps_epi <= 0) {
    throw ParseError(file, "thresholds",
                     "need 0 < eps_2d < 1 and positive eps_res, eps_epi");
  }
  return t;
}

io::json run_config_to_json(const RunConfig& cfg) {
  return json{{"eps_conf", cfg.eps_conf},
              {"solver", solver_config_to_json(cfg.solver)},
              {"thresholds", thresholds_to_json(cfg.thresholds)},
              {"mask_source", cfg.mask_source == MaskSource::ground_truth
                                  ? "ground_truth"
                                  : "external_files"},
              {"parallelism", cfg.parallelism}};
}

RunConfig run_config_from_json(const io::json& j, const std::string& file) {
  RunConfig cfg;
  cfg.eps_conf = io::get_number(j, "eps_conf", file, "");  // no default
  if (!(cfg.eps_conf >= 0.0 && cfg.eps_conf <= 1.0)) {
    throw ParseError(file, "eps_conf", "must be in [0,1]");
  }
  if (j.contains("solver")) {
    cfg.solver = solver_config_from_json(j.at("solver"), file);
  }
  if (j.contains("thresholds")) {
    cfg.thresholds = thresholds_from_json(j.at("thresholds"), file);
  }
  if (j.contains("mask_source")) {
    const std::string src = io::get_string(j, "mask_source", file, "");
    if (src == "ground_truth") {
      cfg.mask_source = MaskSource::ground_truth;
    } else if (src == "external_files") {
      cfg.mask_source = MaskSource::external_files;
    } else {
      throw ParseError(file, "mask_source", "unknown mask source: " + src);
    }
  }
  if (j.contains("parallelism")) {
    cfg.parallelism = io::get_int(j, "parallelism", file, "");
    if (cfg.parallelism < 1) throw ParseError(file, "parallelism", "must be >= 1");
  }
  return cfg;
}

IngestResult ingest_detections(const std::filesystem::path& dir,
                               double eps_conf) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() != ".json" || p.filename() == "calib.json") continue;
    files.push_back(p);
  }
  std::sort(files.begin(), files.end());

  IngestResult out;
  for (const auto& file : files) {
    try {
      io::SceneFile scene = io::load_scene_file(file);
      FrameObservation obs;
      obs.frame_id = scene.detections.frame_id;
      for (const auto& kp : scene.detections.left) {
        if (kp.confidence > eps_conf) obs.left.push_back(kp);
      }
      for (const auto& kp : scene.detections.right) {
        if (kp.confidence > eps_conf) obs.right.push_back(kp);
      }
      out.frames.push_back(std::move(obs));
    } catch (const Error& e) {
      out.rejected.push_back({file.string(), e.what()});
    }
  }
  return out;
}

std::vector<EstimateRecord> solve_batch(
    const std::vector<FrameObservation>& frames, const StereoRig& rig,
    const SolverConfig& solver, int parallelism) {
  std::vector<EstimateRecord> records(frames.size());
  parallel_for(frames.size(), parallelism, [&](std::size_t i) {
    EstimateRecord& rec = records[i];
    rec.obs = frames[i];
    rec.solvable = frames[i].total() >= 6;
    if (!rec.solvable) {
      rec.error = "unsolvable: " + std::to_string(frames[i].total()) +
                  " observations after confidence filtering, need 6";
      return;
    }
    try {
      rec.result = solve(frames[i], rig, solver);
      rec.ok = true;
    } catch (const Error& e) {
      rec.error = e.what();
    }
  });
  return records;
}

MaskProvider directory_mask_provider(const std::filesystem::path& dir) {
  return [dir](const std::string& frame_id) {
    return std::make_pair(io::load_pgm(dir / (frame_id + "_left.pgm")),
                          io::load_pgm(dir / (frame_id + "_right.pgm")));
  };
}

std::vector<CertifyRecord> certify_batch(
    const std::vector<EstimateRecord>& estimates, const StereoRig& rig,
    const CertificateThresholds& thresholds, const MaskProvider& masks,
    int parallelism) {
  std::vector<CertifyRecord> records(estimates.size());
  parallel_for(estimates.size(), parallelism, [&](std::size_t i) {
    CertifyRecord& rec = records[i];
    rec.frame_id = estimates[i].obs.frame_id;
    if (!estimates[i].ok) {
      rec.error = estimates[i].error.empty() ? "estimate unavailable"
                                             : estimates[i].error;
      return;
    }
    try {
      const auto [mask_left, mask_right] = masks(rec.frame_id);
      rec.report = select_pseudo_labels(estimates[i].result, estimates[i].obs,
                                        rig, mask_left, mask_right, thresholds);
      rec.ok = true;
    } catch (const Error& e) {
      rec.error = e.what();
    }
  });
  return records;
}

std::vector<PipelineRecord> run_batch(
    const std::vector<FrameObservation>& frames, const StereoRig& rig,
    const RunConfig& cfg, const MaskProvider& masks) {
  std::vector<EstimateRecord> estimates =
      solve_batch(frames, rig, cfg.solver, cfg.parallelism);
  std::vector<CertifyRecord> reports =
      certify_batch(estimates, rig, cfg.thresholds, masks, cfg.parallelism);
  std::vector<PipelineRecord> out(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out[i] = PipelineRecord{std::move(estimates[i]), std::move(reports[i])};
  }
  return out;
}

namespace {

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from_json(const json& j, const std::string& file,
                    const std::string& path) {
  if (!j.is_array() || j.size() != 2) {
    throw ParseError(file, path, "expected [x, y]");
  }
  return Vec2(io::as_number(j[0], file, path + "[0]"),
              io::as_number(j[1], file, path + "[1]"));
}

json keypoint_list_json(const std::vector<KeypointObservation>& list) {
  json out = json::array();
  for (const auto& kp : list) {
    out.push_back(json{{"corner_index", kp.corner_index},
                       {"x", kp.pixel.x()},
                       {"y", kp.pixel.y()},
                       {"confidence", kp.confidence}});
  }
  return out;
}

std::vector<KeypointObservation> keypoint_list_from_json(
    const json& j, const std::string& file, const std::string& path) {
  std::vector<KeypointObservation> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    KeypointObservation kp;
    kp.corner_index = io::get_int(j[i], "corner_index", file, p);
    kp.pixel = Vec2(io::get_number(j[i], "x", file, p),
                    io::get_number(j[i], "y", file, p));
    kp.confidence = io::get_number(j[i], "confidence", file, p);
    out.push_back(kp);
  }
  return out;
}

json residual_list_json(const std::vector<Vec2>& list) {
  json out = json::array();
  for (const Vec2& r : list) out.push_back(vec2_json(r));
  return out;
}

std::vector<Vec2> residual_list_from_json(const json& j, const std::string& file,
                                          const std::string& path) {
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(vec2_from_json(j[i], file, path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace

void write_results_file(const std::filesystem::path& path, const StereoRig& rig,
                        const SolverConfig& solver,
                        const std::vector<EstimateRecord>& records) {
  json frames = json::array();
  for (const EstimateRecord& rec : records) {
    json f{{"frame_id", rec.obs.frame_id},
           {"observations",
            {{"left", keypoint_list_json(rec.obs.left)},
             {"right", keypoint_list_json(rec.obs.right)}}},
           {"solvable", rec.solvable},
           {"ok", rec.ok},
           {"error", rec.error}};
    if (rec.ok) {
      f["state"] = io::state_to_json(rec.result.state);
      f["objective"] = rec.result.objective;
      f["iterations"] = rec.result.iterations;
      f["converged"] = rec.result.converged;
      f["residuals"] = json{{"left", residual_list_json(rec.result.residuals.left)},
                            {"right", residual_list_json(rec.result.residuals.right)}};
    }
    frames.push_back(std::move(f));
  }
  const json doc{{"calib", io::rig_to_json(rig)},
                 {"solver", solver_config_to_json(solver)},
                 {"frames", frames}};
  io::write_text_file(path, doc.dump(2) + "\n");
}

ResultsFile load_results_file(const std::filesystem::path& path) {
  const json doc = io::load_json_file(path);
  const std::string file = path.string();
  ResultsFile out;
  out.rig = io::rig_from_json(io::require_field(doc, "calib", file, ""), file);
  out.solver =
      solver_config_from_json(io::require_field(doc, "solver", file, ""), file);
  const json& frames = io::require_field(doc, "frames", file, "");
  if (!frames.is_array()) throw ParseError(file, "frames", "expected an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string p = "frames[" + std::to_string(i) + "]";
    const json& f = frames[i];
    EstimateRecord rec;
    rec.obs.frame_id = io::get_string(f, "frame_id", file, p);
    const json& obs = io::require_field(f, "observations", file, p);
    rec.obs.left = keypoint_list_from_json(
        io::require_field(obs, "left", file, p + ".observations"), file,
        p + ".observations.left");
    rec.obs.right = keypoint_list_from_json(
        io::require_field(obs, "right", file, p + ".observations"), file,
        p + ".observations.right");
    rec.solvable = io::require_field(f, "solvable", file, p).get<bool>();
    rec.ok = io::require_field(f, "ok", file, p).get<bool>();
    rec.error = io::get_string(f, "error", file, p);
    if (rec.ok) {
      rec.result.state =
          io::state_from_json(io::require_field(f, "state", file, p), file,
                              p + ".state");
      rec.result.objective = io::get_number(f, "objective", file, p);
      rec.result.iterations = io::get_int(f, "iterations", file, p);
      rec.result.converged = io::require_field(f, "converged", file, p).get<bool>();
      const json& res = io::require_field(f, "residuals", file, p);
      rec.result.residuals.left = residual_list_from_json(
          io::require_field(res, "left", file, p + ".residuals"), file,
          p + ".residuals.left");
      rec.result.residuals.right = residual_list_from_json(
          io::require_field(res, "right", file, p + ".residuals"), file,
          p + ".residuals.right");
      if (rec.result.residuals.left.size() != rec.obs.left.size() ||
          rec.result.residuals.right.size() != rec.obs.right.size()) {
        throw ParseError(file, p + ".residuals",
                         "residual count does not match observations");
      }
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

namespace {

json keypoint_cert_json(const KeypointCertificate& kc) {
  return json{{"view", to_string(kc.view)},
              {"corner_index", kc.corner_index},
              {"predicted", vec2_json(kc.predicted)},
              {"reprojected", vec2_json(kc.reprojected)},
              {"residual_norm", kc.residual_norm},
              {"pass_res", kc.pass_res},
              {"source", to_string(kc.source)},
              {"has_stereo_pair", kc.has_stereo_pair},
              {"ydiff", kc.ydiff},
              {"pass_epi", kc.pass_epi},
              {"epi_vacuous", kc.epi_vacuous},
              {"emitted", kc.emitted}};
}

ViewSide view_from_string(const std::string& s, const std::string& file,
                          const std::string& path) {
  if (s == "left") return ViewSide::left;
  if (s == "right") return ViewSide::right;
  throw ParseError(file, path, "unknown view: " + s);
}

LabelSource source_from_string(const std::string& s, const std::string& file,
                               const std::string& path) {
  if (s == "predicted") return LabelSource::predicted;
  if (s == "reprojected") return LabelSource::reprojected;
  throw ParseError(file, path, "unknown label source: " + s);
}

KeypointCertificate keypoint_cert_from_json(const json& j,
                                            const std::string& file,
                                            const std::string& path) {
  KeypointCertificate kc;
  kc.view = view_from_string(io::get_string(j, "view", file, path), file,
                             path + ".view");
  kc.corner_index = io::get_int(j, "corner_index", file, path);
  kc.predicted = vec2_from_json(io::require_field(j, "predicted", file, path),
                                file, path + ".predicted");
  kc.reprojected =
      vec2_from_json(io::require_field(j, "reprojected", file, path), file,
                     path + ".reprojected");
  kc.residual_norm = io::get_number(j, "residual_norm", file, path);
  kc.pass_res = io::require_field(j, "pass_res", file, path).get<bool>();
  kc.source = source_from_string(io::get_string(j, "source", file, path), file,
                                 path + ".source");
  kc.has_stereo_pair =
      io::require_field(j, "has_stereo_pair", file, path).get<bool>();
  kc.ydiff = io::get_number(j, "ydiff", file, path);
  kc.pass_epi = io::require_field(j, "pass_epi", file, path).get<bool>();
  kc.epi_vacuous = io::require_field(j, "epi_vacuous", file, path).get<bool>();
  kc.emitted = io::require_field(j, "emitted", file, path).get<bool>();
  return kc;
}

json label_json(const PseudoLabel& label) {
  return json{{"view", to_string(label.view)},
              {"corner_index", label.corner_index},
              {"pixel", vec2_json(label.pixel)},
              {"source", to_string(label.source)}};
}

PseudoLabel label_from_json(const json& j, const std::string& file,
                            const std::string& path) {
  PseudoLabel label;
  label.view = view_from_string(io::get_string(j, "view", file, path), file,
                                path + ".view");
  label.corner_index = io::get_int(j, "corner_index", file, path);
  label.pixel = vec2_from_json(io::require_field(j, "pixel", file, path), file,
                               path + ".pixel");
  label.source = source_from_string(io::get_string(j, "source", file, path),
                                    file, path + ".source");
  return label;
}

}  // namespace

void write_reports_file(const std::filesystem::path& path, const StereoRig& rig,
                        const CertificateThresholds& thresholds,
                        const std::vector<CertifyRecord>& records) {
  json frames = json::array();
  for (const CertifyRecord& rec : records) {
    json f{{"frame_id", rec.frame_id}, {"ok", rec.ok}, {"error", rec.error}};
    if (rec.ok) {
      f["iou_left"] = rec.report.iou_left;
      f["iou_right"] = rec.report.iou_right;
      f["pass_2d"] = rec.report.pass_2d;
      f["accepted"] = rec.report.accepted;
      json kps = json::array();
      for (const auto& kc : rec.report.keypoints) kps.push_back(keypoint_cert_json(kc));
      f["keypoints"] = std::move(kps);
      json labels = json::array();
      for (const auto& label : rec.report.labels) labels.push_back(label_json(label));
      f["labels"] = std::move(labels);
    }
    frames.push_back(std::move(f));
  }
  const json doc{{"calib", io::rig_to_json(rig)},
                 {"thresholds", thresholds_to_json(thresholds)},
                 {"frames", frames}};
  io::write_text_file(path, doc.dump(2) + "\n");
}

ReportsFile load_reports_file(const std::filesystem::path& path) {
  const json doc = io::load_json_file(path);
  const std::string file = path.string();
  ReportsFile out;
  out.rig = io::rig_from_json(io::require_field(doc, "calib", file, ""), file);
  out.thresholds = thresholds_from_json(
      io::require_field(doc, "thresholds", file, ""), file);
  const json& frames = io::require_field(doc, "frames", file, "");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string p = "frames[" + std::to_string(i) + "]";
    const json& f = frames[i];
    CertifyRecord rec;
    rec.frame_id = io::get_string(f, "frame_id", file, p);
    rec.ok = io::require_field(f, "ok", file, p).get<bool>();
    rec.error = io::get_string(f, "error", file, p);
    if (rec.ok) {
      rec.report.frame_id = rec.frame_id;
      rec.report.iou_left = io::get_number(f, "iou_left", file, p);
      rec.report.iou_right = io::get_number(f, "iou_right", file, p);
      rec.report.pass_2d = io::require_field(f, "pass_2d", file, p).get<bool>();
      rec.report.accepted = io::require_field(f, "accepted", file, p).get<bool>();
      const json& kps = io::require_field(f, "keypoints", file, p);
      for (std::size_t k = 0; k < kps.size(); ++k) {
        rec.report.keypoints.push_back(keypoint_cert_from_json(
            kps[k], file, p + ".keypoints[" + std::to_string(k) + "]"));
      }
      const json& labels = io::require_field(f, "labels", file, p);
      for (std::size_t k = 0; k < labels.size(); ++k) {
        rec.report.labels.push_back(label_from_json(
            labels[k], file, p + ".labels[" + std::to_string(k) + "]"));
      }
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

void emit_pseudo_label_dataset(const std::vector<CertifyRecord>& records,
                               const CertificateThresholds& thresholds,
                               const std::filesystem::path& path) {
  json accepted = json::array();
  json rejected = json::array();
  for (const CertifyRecord& rec : records) {
    if (rec.ok && rec.report.accepted) {
      json labels = json::array();
      for (const auto& label : rec.report.labels) labels.push_back(label_json(label));
      accepted.push_back(json{{"frame_id", rec.frame_id},
                              {"scores",
                               {{"iou_left", rec.report.iou_left},
                                {"iou_right", rec.report.iou_right}}},
                              {"labels", std::move(labels)}});
    } else {
      std::string reason;
      if (!rec.ok) {
        reason = rec.error;
      } else {
        reason = "2d certificate failed: iou_left=" +
                 fmt_double(rec.report.iou_left) +
                 ", iou_right=" + fmt_double(rec.report.iou_right);
      }
      rejected.push_back(json{{"frame_id", rec.frame_id}, {"reason", reason}});
    }
  }
  const json doc{{"thresholds", thresholds_to_json(thresholds)},
                 {"accepted", accepted},
                 {"rejected", rejected}};
  io::write_text_file(path, doc.dump(2) + "\n");
}

std::map<std::string, SceneTruth> load_truth_dir(
    const std::filesystem::path& dir, const StereoRig* rig) {
  std::map<std::string, SceneTruth> out;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() != ".json" || p.filename() == "calib.json") continue;
    files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    io::SceneFile scene = io::load_scene_file(file);
    if (!scene.truth) continue;
    SceneTruth truth;
    truth.state = *scene.truth;
    if (scene.clean_left && scene.clean_right) {
      truth.clean_left = *scene.clean_left;
      truth.clean_right = *scene.clean_right;
    } else {
      if (!rig) {
        throw MissingTruth(file.string() +
                           ": no clean projections and no calibration to "
                           "recompute them");
      }
      const CanonicalCube cube = canonical_cube_corners();
      const Pose right_pose = rig->t_right_from_left * truth.state.pose;
      for (int c = 0; c < 8; ++c) {
        truth.clean_left[c] = project(
            rig->left, transform_corner(truth.state.pose, truth.state.shape,
                                        cube.corners[c]));
        truth.clean_right[c] = project(
            rig->right,
            transform_corner(right_pose, truth.state.shape, cube.corners[c]));
      }
    }
    out.emplace(scene.detections.frame_id, std::move(truth));
  }
  return out;
}

namespace {

const SceneTruth& truth_for(const std::map<std::string, SceneTruth>& truths,
                            const std::string& frame_id) {
  const auto it = truths.find(frame_id);
  if (it == truths.end()) throw MissingTruth("no ground truth for frame " + frame_id);
  return it->second;
}

double label_error(const SceneTruth& truth, ViewSide view, int corner,
                   const Vec2& pixel) {
  const auto& clean = view == ViewSide::left ? truth.clean_left : truth.clean_right;
  return (pixel - clean[corner]).norm();
}

}  // namespace

LabelErrorPopulations label_error_populations(
    const std::vector<CertifyRecord>& records,
    const std::map<std::string, SceneTruth>& truths) {
  LabelErrorPopulations out;
  for (const CertifyRecord& rec : records) {
    if (!rec.ok) continue;
    const SceneTruth& truth = truth_for(truths, rec.frame_id);
    for (const KeypointCertificate& kc : rec.report.keypoints) {
      if (!kc.pass_epi) continue;  // would not be emitted either way
      const Vec2 chosen = kc.pass_res ? kc.predicted : kc.reprojected;
      const double err = label_error(truth, kc.view, kc.corner_index, chosen);
      if (rec.report.accepted) {
        out.accepted.push_back(err);
      } else {
        out.rejected_would_be.push_back(err);
      }
    }
  }
  return out;
}

std::vector<double> predicted_keypoint_errors(
    const std::vector<EstimateRecord>& records,
    const std::map<std::string, SceneTruth>& truths) {
  std::vector<double> out;
  for (const EstimateRecord& rec : records) {
    const auto it = truths.find(rec.obs.frame_id);
    if (it == truths.end()) continue;
    const SceneTruth& truth = it->second;
    for (const auto& kp : rec.obs.left) {
      out.push_back((kp.pixel - truth.clean_left[kp.corner_index]).norm());
    }
    for (const auto& kp : rec.obs.right) {
      out.push_back((kp.pixel - truth.clean_right[kp.corner_index]).norm());
    }
  }
  return out;
}

EvalSummary evaluate_results(const ResultsFile& results,
                             const std::map<std::string, SceneTruth>& truths,
                             const ReportsFile* reports) {
  std::vector<std::pair<std::string, BoxState>> estimates;
  for (const EstimateRecord& rec : results.records) {
    if (rec.ok) estimates.emplace_back(rec.obs.frame_id, rec.result.state);
  }
  std::map<std::string, BoxState> truth_states;
  for (const auto& [id, truth] : truths) truth_states.emplace(id, truth.state);

  EvalSummary summary = evaluate(estimates, truth_states);
  summary.cdfs.push_back(make_cdf(
      "predicted_keypoints", predicted_keypoint_errors(results.records, truths)));
  if (reports) {
    std::vector<double> label_errors;
    for (const CertifyRecord& rec : reports->records) {
      if (!rec.ok || !rec.report.accepted) continue;
      const SceneTruth& truth = truth_for(truths, rec.frame_id);
      for (const PseudoLabel& label : rec.report.labels) {
        label_errors.push_back(
            label_error(truth, label.view, label.corner_index, label.pixel));
      }
    }
    summary.cdfs.push_back(make_cdf("pseudo_labels", std::move(label_errors)));
  }
  return summary;
}

std::string summary_to_csv(const EvalSummary& summary) {
  std::string csv;
  csv += "metric,value\n";
  csv += "ape_m," + fmt_double(summary.ape) + "\n";
  csv += "are_rad," + fmt_double(summary.are) + "\n";
  csv += "ase_m," + fmt_double(summary.ase) + "\n";
  csv += "frames," + std::to_string(summary.frames.size()) + "\n";
  csv += "\nseries,threshold_px,fraction\n";
  for (const CdfSeries& series : summary.cdfs) {
    for (const auto& [threshold, fraction] : series.points) {
      csv += series.label + "," + fmt_double(threshold) + "," +
             fmt_double(fraction) + "\n";
    }
  }
  return csv;
}

CorrelationTables certificate_correlation_report(
    const std::vector<CertifyRecord>& records,
    const std::map<std::string, SceneTruth>& truths,
    const BinningConfig& binning) {
  // Per-frame IoU score with the per-frame RMSE of its would-be labels, and
  // flat per-keypoint populations for the other two tables.
  struct FrameSample {
    double iou;
    double rmse;
  };
  std::vector<FrameSample> frame_samples;
  struct KeypointSample {
    double residual;
    bool predicted_better;
  };
  std::vector<KeypointSample> keypoint_samples;
  struct EpiSample {
    double ydiff;
    double sq_error_sum;  // both views of the paired corner
    int count;
  };
  std::vector<EpiSample> epi_samples;

  for (const CertifyRecord& rec : records) {
    if (!rec.ok) continue;
    const SceneTruth& truth = truth_for(truths, rec.frame_id);

    double sq = 0.0;
    int n = 0;
    for (const KeypointCertificate& kc : rec.report.keypoints) {
      const Vec2 chosen = kc.pass_res ? kc.predicted : kc.reprojected;
      const double err = label_error(truth, kc.view, kc.corner_index, chosen);
      sq += err * err;
      ++n;

      const double err_pred =
          label_error(truth, kc.view, kc.corner_index, kc.predicted);
      const double err_repr =
          label_error(truth, kc.view, kc.corner_index, kc.reprojected);
      keypoint_samples.push_back({kc.residual_norm, err_pred < err_repr});
    }
    if (n > 0) {
      frame_samples.push_back({std::min(rec.report.iou_left, rec.report.iou_right),
                               std::sqrt(sq / n)});
    }

    // One epipolar sample per stereo-paired corner (left record carries it).
    for (const KeypointCertificate& kc : rec.report.keypoints) {
      if (kc.view != ViewSide::left || !kc.has_stereo_pair) continue;
      const Vec2 chosen_l = kc.pass_res ? kc.predicted : kc.reprojected;
      double sq_pair = std::pow(
          label_error(truth, ViewSide::left, kc.corner_index, chosen_l), 2);
      int pair_count = 1;
      for (const KeypointCertificate& other : rec.report.keypoints) {
        if (other.view == ViewSide::right &&
            other.corner_index == kc.corner_index) {
          const Vec2 chosen_r = other.pass_res ? other.predicted : other.reprojected;
          sq_pair += std::pow(
              label_error(truth, ViewSide::right, kc.corner_index, chosen_r), 2);
          ++pair_count;
          break;
        }
      }
      epi_samples.push_back({kc.ydiff, sq_pair, pair_count});
    }
  }

  CorrelationTables tables;

  if (!frame_samples.empty()) {
    double lo = frame_samples[0].iou, hi = frame_samples[0].iou;
    for (const auto& s : frame_samples) {
      lo = std::min(lo, s.iou);
      hi = std::max(hi, s.iou);
    }
    const int nbins = std::max(1, binning.iou_bins);
    const double width = std::max(1e-9, (hi - lo) / nbins);
    std::vector<BinRow> rows(static_cast<std::size_t>(nbins));
    std::vector<double> rmse_sums(static_cast<std::size_t>(nbins), 0.0);
    for (int b = 0; b < nbins; ++b) {
      rows[b].lo = lo + b * width;
      rows[b].hi = lo + (b + 1) * width;
      rows[b].center = 0.5 * (rows[b].lo + rows[b].hi);
    }
    for (const auto& s : frame_samples) {
      int b = std::min(nbins - 1, static_cast<int>((s.iou - lo) / width));
      rows[b].count += 1;
      rmse_sums[b] += s.rmse;
    }
    for (int b = 0; b < nbins; ++b) {
      if (rows[b].count > 0) {
        rows[b].mean_rmse = rmse_sums[b] / static_cast<double>(rows[b].count);
        tables.iou_vs_rmse.push_back(rows[b]);
      }
    }
  }

  if (!keypoint_samples.empty()) {
    double max_res = 0.0;
    for (const auto& s : keypoint_samples) max_res = std::max(max_res, s.residual);
    const double width = std::max(1e-9, binning.residual_bin_px);
    const int nbins = static_cast<int>(max_res / width) + 1;
    std::vector<ResidualBinRow> rows(static_cast<std::size_t>(nbins));
    for (int b = 0; b < nbins; ++b) {
      rows[b].lo = b * width;
      rows[b].hi = (b + 1) * width;
      rows[b].center = 0.5 * (rows[b].lo + rows[b].hi);
    }
    for (const auto& s : keypoint_samples) {
      int b = std::min(nbins - 1, static_cast<int>(s.residual / width));
      if (s.predicted_better) {
        rows[b].predicted_better += 1;
      } else {
        rows[b].reprojected_better += 1;
      }
    }
    for (const auto& row : rows) {
      if (row.predicted_better + row.reprojected_better > 0) {
        tables.residual_selection.push_back(row);
      }
    }
  }

  if (!epi_samples.empty()) {
    double max_y = 0.0;
    for (const auto& s : epi_samples) max_y = std::max(max_y, s.ydiff);
    const double width = std::max(1e-9, binning.epipolar_bin_px);
    const int nbins = static_cast<int>(max_y / width) + 1;
    std::vector<BinRow> rows(static_cast<std::size_t>(nbins));
    std::vector<double> sq_sums(static_cast<std::size_t>(nbins), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(nbins), 0);
    for (int b = 0; b < nbins; ++b) {
      rows[b].lo = b * width;
      rows[b].hi = (b + 1) * width;
      rows[b].center = 0.5 * (rows[b].lo + rows[b].hi);
    }
    for (const auto& s : epi_samples) {
      int b = std::min(nbins - 1, static_cast<int>(s.ydiff / width));
      rows[b].count += 1;
      sq_sums[b] += s.sq_error_sum;
      counts[b] += s.count;
    }
    for (int b = 0; b < nbins; ++b) {
      if (rows[b].count > 0) {
        rows[b].mean_rmse = std::sqrt(sq_sums[b] / counts[b]);
        tables.epipolar_vs_rmse.push_back(rows[b]);
      }
    }
  }

  return tables;
}

std::string iou_table_csv(const std::vector<BinRow>& rows) {
  std::string csv = "iou_lo,iou_hi,iou_center,frames,mean_rmse_px\n";
  for (const BinRow& r : rows) {
    csv += fmt_double(r.lo) + "," + fmt_double(r.hi) + "," +
           fmt_double(r.center) + "," + std::to_string(r.count) + "," +
           fmt_double(r.mean_rmse) + "\n";
  }
  return csv;
}

std::string residual_table_csv(const std::vector<ResidualBinRow>& rows) {
  std::string csv =
      "residual_lo_px,residual_hi_px,residual_center_px,predicted_better,"
      "reprojected_better\n";
  for (const ResidualBinRow& r : rows) {
    csv += fmt_double(r.lo) + "," + fmt_double(r.hi) + "," +
           fmt_double(r.center) + "," + std::to_string(r.predicted_better) +
           "," + std::to_string(r.reprojected_better) + "\n";
  }
  return csv;
}

std::string epipolar_table_csv(const std::vector<BinRow>& rows) {
  std::string csv = "ydiff_lo_px,ydiff_hi_px,ydiff_center_px,corners,mean_rmse_px\n";
  for (const BinRow& r : rows) {
    csv += fmt_double(r.lo) + "," + fmt_double(r.hi) + "," +
           fmt_double(r.center) + "," + std::to_string(r.count) + "," +
           fmt_double(r.mean_rmse) + "\n";
  }
  return csv;
}

void emit_prompt_files(const ResultsFile& results, SamplingStrategy strategy,
                       int n, std::uint64_t seed,
                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const CanonicalCube cube = canonical_cube_corners();
  for (const EstimateRecord& rec : results.records) {
    if (!rec.ok) continue;
    for (int view = 0; view < 2; ++view) {
      const PinholeCamera& cam = view == 0 ? results.rig.left : results.rig.right;
      const Pose pose = view == 0
                            ? rec.result.state.pose
                            : results.rig.t_right_from_left * rec.result.state.pose;
      std::array<Vec2, 8> projected;
      bool visible = true;
      for (int c = 0; c < 8 && visible; ++c) {
        const Vec3 p = transform_corner(pose, rec.result.state.shape, cube.corners[c]);
        if (p.z() <= kDefaultDepthMin) {
          visible = false;
          break;
        }
        projected[c] = project(cam, p);
      }
      if (!visible) continue;
      const std::vector<Vec2> hull = convex_hull(projected);
      if (hull.size() < 3) continue;

      ConvexPolygon poly = ConvexPolygon::from_vertices(hull);
      SampleBatch batch;
      if (strategy == SamplingStrategy::axis_aligned) {
        batch = sample_axis_aligned(poly, n, seed);
      } else if (strategy == SamplingStrategy::uniform_simplex) {
        batch = sample_uniform_simplex(poly, n, seed);
      } else {
        batch = sample_adaptive_simplex(poly, n / poly.area(), seed);
      }

      json points = json::array();
      for (const Vec2& p : batch.points) points.push_back(vec2_json(p));
      const std::string view_name = view == 0 ? "left" : "right";
      const json doc{{"frame_id", rec.obs.frame_id},
                     {"view", view_name},
                     {"strategy", to_string(strategy)},
                     {"seed", seed},
                     {"points", points}};
      io::write_text_file(
          out_dir / (rec.obs.frame_id + "_" + view_name + ".json"),
          doc.dump(2) + "\n");
    }
  }
}

}  // namespace stereobox
