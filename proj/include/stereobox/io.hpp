#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "stereobox/estimator.hpp"
#include "stereobox/mask.hpp"

namespace stereobox::io {

using nlohmann::json;

// Checked JSON access; all throw ParseError carrying file and field path.
const json& require_field(const json& j, const std::string& key,
                          const std::string& file, const std::string& path);
double as_number(const json& j, const std::string& file, const std::string& path);
double get_number(const json& j, const std::string& key, const std::string& file,
                  const std::string& path);
int get_int(const json& j, const std::string& key, const std::string& file,
            const std::string& path);
std::string get_string(const json& j, const std::string& key,
                       const std::string& file, const std::string& path);

json load_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// Calibration file: {"left": {fx,fy,cx,cy,width,height}, "right": {...},
// "t_right_from_left": [16 numbers, row-major 4x4]}.
StereoRig load_calibration(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const StereoRig& rig);
json rig_to_json(const StereoRig& rig);
StereoRig rig_from_json(const json& j, const std::string& file);

json state_to_json(const BoxState& state);
BoxState state_from_json(const json& j, const std::string& file,
                         const std::string& path);

// Per-frame detection JSON; ground-truth fields are optional so the same
// format serves synthetic dumps and external detector output.
struct SceneFile {
  FrameObservation detections;
  std::optional<BoxState> truth;
  std::optional<std::array<Vec2, 8>> clean_left;
  std::optional<std::array<Vec2, 8>> clean_right;
};

SceneFile load_scene_file(const std::filesystem::path& path);
void save_scene_file(const std::filesystem::path& path, const SceneFile& scene);

// Binary 8-bit PGM (P5); foreground = value >= 128.
BitMask load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const BitMask& mask);

}  // namespace stereobox::io
