#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stereobox/certificates.hpp"
#include "stereobox/evaluation.hpp"
#include "stereobox/io.hpp"
#include "stereobox/sampling.hpp"
#include "stereobox/synthetic.hpp"

namespace stereobox {

SceneConfig scene_config_from_json(const io::json& j, const std::string& file);
io::json scene_config_to_json(const SceneConfig& cfg);

enum class MaskSource { ground_truth, external_files };

struct RunConfig {
  double eps_conf = 0.0;  // required in config files; no default there
  SolverConfig solver;
  CertificateThresholds thresholds;
  MaskSource mask_source = MaskSource::ground_truth;
  int parallelism = 1;
};

RunConfig run_config_from_json(const io::json& j, const std::string& file);
io::json run_config_to_json(const RunConfig& cfg);
io::json solver_config_to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const io::json& j, const std::string& file);
io::json thresholds_to_json(const CertificateThresholds& t);
CertificateThresholds thresholds_from_json(const io::json& j,
                                           const std::string& file);

struct EstimateRecord {
  FrameObservation obs;   // post confidence-filter
  bool solvable = false;  // enough observations for a well-posed solve
  bool ok = false;
  std::string error;      // set when !ok
  SolveResult result;     // valid when ok
};

struct CertifyRecord {
  std::string frame_id;
  bool ok = false;
  std::string error;
  CertificateReport report;  // valid when ok
};

struct PipelineRecord {
  EstimateRecord estimate;
  CertifyRecord certificate;
};

struct IngestError {
  std::string file;
  std::string message;
};

struct IngestResult {
  std::vector<FrameObservation> frames;  // sorted by file name
  std::vector<IngestError> rejected;     // malformed files, batch not aborted
};

/// Loads every frame JSON in a directory (calib.json is skipped), dropping
/// keypoints with confidence <= eps_conf. Frames left with fewer than 6
/// observations stay in the list and are flagged unsolvable downstream.
IngestResult ingest_detections(const std::filesystem::path& dir,
                               double eps_conf);

std::vector<EstimateRecord> solve_batch(
    const std::vector<FrameObservation>& frames, const StereoRig& rig,
    const SolverConfig& solver, int parallelism);

using MaskProvider =
    std::function<std::pair<BitMask, BitMask>(const std::string& frame_id)>;

/// Reads <frame_id>_left.pgm / <frame_id>_right.pgm from a directory.
MaskProvider directory_mask_provider(const std::filesystem::path& dir);

std::vector<CertifyRecord> certify_batch(
    const std::vector<EstimateRecord>& estimates, const StereoRig& rig,
    const CertificateThresholds& thresholds, const MaskProvider& masks,
    int parallelism);

/// initialize + solve + certify + select over a batch; per-frame failures are
/// captured in the records, output order matches input order at any
/// parallelism.
std::vector<PipelineRecord> run_batch(
    const std::vector<FrameObservation>& frames, const StereoRig& rig,
    const RunConfig& cfg, const MaskProvider& masks);

// ---------- result / report files ----------

struct ResultsFile {
  StereoRig rig;
  SolverConfig solver;
  std::vector<EstimateRecord> records;
};

void write_results_file(const std::filesystem::path& path, const StereoRig& rig,
                        const SolverConfig& solver,
                        const std::vector<EstimateRecord>& records);
ResultsFile load_results_file(const std::filesystem::path& path);

struct ReportsFile {
  StereoRig rig;
  CertificateThresholds thresholds;
  std::vector<CertifyRecord> records;
};

void write_reports_file(const std::filesystem::path& path, const StereoRig& rig,
                        const CertificateThresholds& thresholds,
                        const std::vector<CertifyRecord>& records);
ReportsFile load_reports_file(const std::filesystem::path& path);

/// One record per accepted frame (labels + certificate scores), plus the
/// rejected frames with their failure reasons.
void emit_pseudo_label_dataset(const std::vector<CertifyRecord>& records,
                               const CertificateThresholds& thresholds,
                               const std::filesystem::path& path);

// ---------- ground truth ----------

struct SceneTruth {
  BoxState state;
  std::array<Vec2, 8> clean_left;
  std::array<Vec2, 8> clean_right;
};

/// Loads truth states from a synth output directory. Clean projections are
/// recomputed from the truth state when absent from the file (requires rig).
std::map<std::string, SceneTruth> load_truth_dir(
    const std::filesystem::path& dir, const StereoRig* rig = nullptr);

// ---------- evaluation over files ----------

/// Pixel error of every emitted pseudo-label against the ground-truth
/// projection, split by frame acceptance; rejected frames contribute the
/// labels they would have emitted.
struct LabelErrorPopulations {
  std::vector<double> accepted;
  std::vector<double> rejected_would_be;
};

LabelErrorPopulations label_error_populations(
    const std::vector<CertifyRecord>& records,
    const std::map<std::string, SceneTruth>& truths);

std::vector<double> predicted_keypoint_errors(
    const std::vector<EstimateRecord>& records,
    const std::map<std::string, SceneTruth>& truths);

/// APE/ARE/ASE over solved frames plus keypoint-error CDFs: one series over
/// raw predicted keypoints, and one over emitted pseudo-labels when reports
/// are supplied.
EvalSummary evaluate_results(const ResultsFile& results,
                             const std::map<std::string, SceneTruth>& truths,
                             const ReportsFile* reports = nullptr);

std::string summary_to_csv(const EvalSummary& summary);

// ---------- certificate correlation tables ----------

struct BinRow {
  double lo = 0, hi = 0, center = 0;
  std::size_t count = 0;
  double mean_rmse = 0;
};

struct ResidualBinRow {
  double lo = 0, hi = 0, center = 0;
  std::size_t predicted_better = 0;
  std::size_t reprojected_better = 0;
};

struct BinningConfig {
  int iou_bins = 12;
  double residual_bin_px = 4.0;
  double epipolar_bin_px = 2.0;
};

struct CorrelationTables {
  std::vector<BinRow> iou_vs_rmse;                 // per frame, IoU = min of views
  std::vector<ResidualBinRow> residual_selection;  // per keypoint
  std::vector<BinRow> epipolar_vs_rmse;            // per stereo-paired corner
};

CorrelationTables certificate_correlation_report(
    const std::vector<CertifyRecord>& records,
    const std::map<std::string, SceneTruth>& truths,
    const BinningConfig& binning = {});

std::string iou_table_csv(const std::vector<BinRow>& rows);
std::string residual_table_csv(const std::vector<ResidualBinRow>& rows);
std::string epipolar_table_csv(const std::vector<BinRow>& rows);

// ---------- segmentation prompts ----------

/// For each solved frame and view, samples prompt points inside the convex
/// hull of the projected box corners and writes
/// <frame_id>_<view>.json. For adaptive_simplex, n is mapped to a density of
/// n / polygon area so the expected total stays n.
void emit_prompt_files(const ResultsFile& results, SamplingStrategy strategy,
                       int n, std::uint64_t seed,
                       const std::filesystem::path& out_dir);

}  // namespace stereobox
