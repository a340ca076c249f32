// stereobox: batch CLI for stereo box pose/shape estimation, certificate
// checks, pseudo-label emission, prompt sampling, and evaluation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stereobox/pipeline.hpp"

namespace fs = std::filesystem;
using namespace stereobox;

namespace {

int cmd_synth(const std::string& config_path, int count, const std::string& out) {
  SceneConfig cfg;
  if (!config_path.empty()) {
    cfg = scene_config_from_json(io::load_json_file(config_path), config_path);
  }
  fs::create_directories(out);
  const StereoRig rig = make_rig(cfg);
  io::save_calibration(fs::path(out) / "calib.json", rig);
  for (int i = 0; i < count; ++i) {
    const SyntheticScene scene = generate_scene(cfg, static_cast<std::uint64_t>(i));
    const FrameObservation obs = corrupt_observations(scene, cfg);
    io::SceneFile record;
    record.detections = obs;
    record.truth = scene.truth;
    record.clean_left = scene.clean_left;
    record.clean_right = scene.clean_right;
    io::save_scene_file(fs::path(out) / (scene.frame_id + ".json"), record);
    io::save_pgm(fs::path(out) / (scene.frame_id + "_left.pgm"), scene.mask_left);
    io::save_pgm(fs::path(out) / (scene.frame_id + "_right.pgm"), scene.mask_right);
  }
  std::cout << "wrote " << count << " frames to " << out << "\n";
  return 0;
}

int cmd_estimate(const std::string& detections, const std::string& calib,
                 const std::string& config_path, const std::string& out,
                 int workers_override) {
  const RunConfig cfg =
      run_config_from_json(io::load_json_file(config_path), config_path);
  const StereoRig rig = io::load_calibration(calib);
  const int workers = workers_override > 0 ? workers_override : cfg.parallelism;

  IngestResult ingest = ingest_detections(detections, cfg.eps_conf);
  std::vector<EstimateRecord> records =
      solve_batch(ingest.frames, rig, cfg.solver, workers);
  for (const IngestError& err : ingest.rejected) {
    EstimateRecord rec;
    rec.obs.frame_id = fs::path(err.file).filename().string();
    rec.error = err.message;
    records.push_back(std::move(rec));
  }
  write_results_file(out, rig, cfg.solver, records);

  std::size_t solved = 0;
  for (const auto& rec : records) solved += rec.ok ? 1 : 0;
  std::cout << "solved " << solved << "/" << records.size() << " frames -> "
            << out << "\n";
  return 0;
}

int cmd_certify(const std::string& results_path, const std::string& masks,
                const std::string& thresholds_path, const std::string& out,
                int workers) {
  const ResultsFile results = load_results_file(results_path);
  CertificateThresholds thresholds;
  if (!thresholds_path.empty()) {
    thresholds = thresholds_from_json(io::load_json_file(thresholds_path),
                                      thresholds_path);
  }
  const std::vector<CertifyRecord> records =
      certify_batch(results.records, results.rig, thresholds,
                    directory_mask_provider(masks), std::max(1, workers));
  write_reports_file(out, results.rig, thresholds, records);

  std::size_t accepted = 0;
  for (const auto& rec : records) accepted += (rec.ok && rec.report.accepted) ? 1 : 0;
  std::cout << "accepted " << accepted << "/" << records.size() << " frames -> "
            << out << "\n";
  return 0;
}

int cmd_pseudo_label(const std::string& reports_path, const std::string& out) {
  const ReportsFile reports = load_reports_file(reports_path);
  emit_pseudo_label_dataset(reports.records, reports.thresholds, out);
  std::cout << "wrote pseudo-label dataset -> " << out << "\n";
  return 0;
}

int cmd_sample_prompts(const std::string& results_path, const std::string& strategy,
                       int n, std::uint64_t seed, const std::string& out) {
  const ResultsFile results = load_results_file(results_path);
  emit_prompt_files(results, strategy_from_string(strategy), n, seed, out);
  std::cout << "wrote prompt files -> " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& results_path, const std::string& truth_dir,
             const std::string& reports_path, const std::string& out) {
  const ResultsFile results = load_results_file(results_path);
  const auto truths = load_truth_dir(truth_dir, &results.rig);
  EvalSummary summary;
  if (reports_path.empty()) {
    summary = evaluate_results(results, truths);
  } else {
    const ReportsFile reports = load_reports_file(reports_path);
    summary = evaluate_results(results, truths, &reports);
  }
  io::write_text_file(out, summary_to_csv(summary));
  std::cout << "ape_m=" << summary.ape << " are_rad=" << summary.are
            << " ase_m=" << summary.ase << " frames=" << summary.frames.size()
            << " -> " << out << "\n";
  return 0;
}

int cmd_cert_analysis(const std::string& reports_path, const std::string& truth_dir,
                      const std::string& out) {
  const ReportsFile reports = load_reports_file(reports_path);
  const auto truths = load_truth_dir(truth_dir, &reports.rig);
  const CorrelationTables tables =
      certificate_correlation_report(reports.records, truths);
  fs::create_directories(out);
  io::write_text_file(fs::path(out) / "iou_vs_rmse.csv",
                      iou_table_csv(tables.iou_vs_rmse));
  io::write_text_file(fs::path(out) / "residual_selection.csv",
                      residual_table_csv(tables.residual_selection));
  io::write_text_file(fs::path(out) / "epipolar_vs_rmse.csv",
                      epipolar_table_csv(tables.epipolar_vs_rmse));
  std::cout << "wrote certificate analysis tables -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereo box pose and shape estimation pipeline"};
  app.require_subcommand(1);

  std::string config_path, detections, calib, out, results_path, masks,
      thresholds_path, reports_path, truth_dir, strategy;
  int count = 0, n = 0, workers = 0;
  std::uint64_t seed = 0;

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic scenes");
  synth->add_option("--config", config_path, "scene config JSON");
  synth->add_option("--count", count, "number of frames")->required();
  synth->add_option("--out", out, "output directory")->required();

  CLI::App* estimate = app.add_subcommand("estimate", "solve box states");
  estimate->add_option("--detections", detections, "detection directory")->required();
  estimate->add_option("--calib", calib, "calibration JSON")->required();
  estimate->add_option("--config", config_path, "run config JSON")->required();
  estimate->add_option("--out", out, "results JSON path")->required();
  estimate->add_option("--workers", workers, "override worker count");

  CLI::App* certify = app.add_subcommand("certify", "run certificate checks");
  certify->add_option("--results", results_path, "results JSON")->required();
  certify->add_option("--masks", masks, "mask directory")->required();
  certify->add_option("--thresholds", thresholds_path, "thresholds JSON");
  certify->add_option("--out", out, "reports JSON path")->required();
  certify->add_option("--workers", workers, "worker count");

  CLI::App* pseudo = app.add_subcommand("pseudo-label", "emit pseudo-label dataset");
  pseudo->add_option("--reports", reports_path, "reports JSON")->required();
  pseudo->add_option("--out", out, "dataset JSON path")->required();

  CLI::App* prompts = app.add_subcommand("sample-prompts", "emit prompt points");
  prompts->add_option("--results", results_path, "results JSON")->required();
  prompts
      ->add_option("--strategy", strategy,
                   "axis_aligned | uniform_simplex | adaptive_simplex")
      ->required();
  prompts->add_option("--n", n, "samples per polygon")->required();
  prompts->add_option("--seed", seed, "sampling seed")->required();
  prompts->add_option("--out", out, "output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "pose/shape metrics and CDFs");
  eval->add_option("--results", results_path, "results JSON")->required();
  eval->add_option("--truth", truth_dir, "ground-truth directory")->required();
  eval->add_option("--reports", reports_path, "reports JSON for label CDF");
  eval->add_option("--out", out, "summary CSV path")->required();

  CLI::App* analysis = app.add_subcommand("cert-analysis", "certificate tables");
  analysis->add_option("--reports", reports_path, "reports JSON")->required();
  analysis->add_option("--truth", truth_dir, "ground-truth directory")->required();
  analysis->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(config_path, count, out);
    if (estimate->parsed())
      return cmd_estimate(detections, calib, config_path, out, workers);
    if (certify->parsed())
      return cmd_certify(results_path, masks, thresholds_path, out, workers);
    if (pseudo->parsed()) return cmd_pseudo_label(reports_path, out);
    if (prompts->parsed())
      return cmd_sample_prompts(results_path, strategy, n, seed, out);
    if (eval->parsed()) return cmd_eval(results_path, truth_dir, reports_path, out);
    if (analysis->parsed())
      return cmd_cert_analysis(reports_path, truth_dir, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
