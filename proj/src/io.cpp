#include "stereobox/io.hpp"

#include <fstream>
#include <sstream>

namespace stereobox::io {

const json& require_field(const json& j, const std::string& key,
                          const std::string& file, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(file, path.empty() ? key : path + "." + key,
                     "missing field");
  }
  return j.at(key);
}

double as_number(const json& j, const std::string& file, const std::string& path) {
  if (!j.is_number()) throw ParseError(file, path, "expected a number");
  return j.get<double>();
}

double get_number(const json& j, const std::string& key, const std::string& file,
                  const std::string& path) {
  return as_number(require_field(j, key, file, path), file,
                   path.empty() ? key : path + "." + key);
}

int get_int(const json& j, const std::string& key, const std::string& file,
            const std::string& path) {
  const json& v = require_field(j, key, file, path);
  const std::string full = path.empty() ? key : path + "." + key;
  if (!v.is_number_integer()) throw ParseError(file, full, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& j, const std::string& key,
                       const std::string& file, const std::string& path) {
  const json& v = require_field(j, key, file, path);
  const std::string full = path.empty() ? key : path + "." + key;
  if (!v.is_string()) throw ParseError(file, full, "expected a string");
  return v.get<std::string>();
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "", "cannot open file");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string(), "", "invalid JSON");
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json camera_to_json(const PinholeCamera& cam) {
  return json{{"fx", cam.fx},        {"fy", cam.fy},      {"cx", cam.cx},
              {"cy", cam.cy},        {"width", cam.width}, {"height", cam.height}};
}

PinholeCamera camera_from_json(const json& j, const std::string& file,
                               const std::string& path) {
  PinholeCamera cam;
  cam.fx = get_number(j, "fx", file, path);
  cam.fy = get_number(j, "fy", file, path);
  cam.cx = get_number(j, "cx", file, path);
  cam.cy = get_number(j, "cy", file, path);
  cam.width = get_int(j, "width", file, path);
  cam.height = get_int(j, "height", file, path);
  if (cam.fx <= 0 || cam.fy <= 0 || cam.width <= 0 || cam.height <= 0) {
    throw ParseError(file, path, "focal lengths and image size must be positive");
  }
  return cam;
}

std::vector<double> number_array(const json& j, std::size_t expected,
                                 const std::string& file, const std::string& path) {
  if (!j.is_array() || j.size() != expected) {
    throw ParseError(file, path,
                     "expected an array of " + std::to_string(expected) +
                         " numbers");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    out.push_back(as_number(j[i], file, path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace

json rig_to_json(const StereoRig& rig) {
  const Mat3& r = rig.t_right_from_left.rotation.matrix();
  const Vec3& t = rig.t_right_from_left.translation;
  json m4 = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m4.push_back(r(i, j));
    m4.push_back(t(i));
  }
  for (double v : {0.0, 0.0, 0.0, 1.0}) m4.push_back(v);
  return json{{"left", camera_to_json(rig.left)},
              {"right", camera_to_json(rig.right)},
              {"t_right_from_left", m4}};
}

StereoRig rig_from_json(const json& j, const std::string& file) {
  StereoRig rig;
  rig.left = camera_from_json(require_field(j, "left", file, ""), file, "left");
  rig.right = camera_from_json(require_field(j, "right", file, ""), file, "right");
  const auto m = number_array(require_field(j, "t_right_from_left", file, ""), 16,
                              file, "t_right_from_left");
  Mat3 r;
  Vec3 t;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) r(row, col) = m[4 * row + col];
    t(row) = m[4 * row + 3];
  }
  Rotation3 rot;
  try {
    rot = Rotation3::from_matrix(r, 1e-6);
  } catch (const DegenerateMatrix& e) {
    throw ParseError(file, "t_right_from_left", e.what());
  }
  rig.t_right_from_left = Pose{rot, t};
  if (rig.t_right_from_left.translation.norm() < 1e-9) {
    throw ParseError(file, "t_right_from_left", "baseline must be nonzero");
  }
  return rig;
}

StereoRig load_calibration(const std::filesystem::path& path) {
  return rig_from_json(load_json_file(path), path.string());
}

void save_calibration(const std::filesystem::path& path, const StereoRig& rig) {
  write_text_file(path, rig_to_json(rig).dump(2) + "\n");
}

json state_to_json(const BoxState& state) {
  const Mat3& r = state.pose.rotation.matrix();
  json rot = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rot.push_back(r(i, j));
  return json{{"rotation", rot},
              {"translation", {state.pose.translation.x(),
                               state.pose.translation.y(),
                               state.pose.translation.z()}},
              {"dims", {state.shape.dims.x(), state.shape.dims.y(),
                        state.shape.dims.z()}}};
}

BoxState state_from_json(const json& j, const std::string& file,
                         const std::string& path) {
  const auto rot = number_array(require_field(j, "rotation", file, path), 9, file,
                                path + ".rotation");
  const auto tr = number_array(require_field(j, "translation", file, path), 3,
                               file, path + ".translation");
  const auto dims = number_array(require_field(j, "dims", file, path), 3, file,
                                 path + ".dims");
  Mat3 r;
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r(row, col) = rot[3 * row + col];
  Rotation3 rotation;
  try {
    rotation = Rotation3::from_matrix(r, 1e-6);
  } catch (const DegenerateMatrix& e) {
    throw ParseError(file, path + ".rotation", e.what());
  }
  const Vec3 d(dims[0], dims[1], dims[2]);
  if ((d.array() <= 0).any()) {
    throw ParseError(file, path + ".dims", "dims must be positive");
  }
  return BoxState{Pose{rotation, Vec3(tr[0], tr[1], tr[2])}, Shape{d}};
}

namespace {

json keypoints_to_json(const std::vector<KeypointObservation>& list) {
  json out = json::array();
  for (const auto& kp : list) {
    out.push_back(json{{"corner_index", kp.corner_index},
                       {"x", kp.pixel.x()},
                       {"y", kp.pixel.y()},
                       {"confidence", kp.confidence}});
  }
  return out;
}

std::vector<KeypointObservation> keypoints_from_json(const json& j,
                                                     const std::string& file,
                                                     const std::string& path) {
  if (!j.is_array()) throw ParseError(file, path, "expected an array");
  std::vector<KeypointObservation> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    const json& item = j[i];
    KeypointObservation kp;
    kp.corner_index = get_int(item, "corner_index", file, p);
    if (kp.corner_index < 0 || kp.corner_index > 7) {
      throw ParseError(file, p + ".corner_index", "must be in 0..7");
    }
    kp.pixel = Vec2(get_number(item, "x", file, p), get_number(item, "y", file, p));
    kp.confidence = get_number(item, "confidence", file, p);
    if (!(kp.confidence >= 0.0 && kp.confidence <= 1.0)) {
      throw ParseError(file, p + ".confidence", "must be in [0,1]");
    }
    out.push_back(kp);
  }
  return out;
}

json points8_to_json(const std::array<Vec2, 8>& pts) {
  json out = json::array();
  for (const Vec2& p : pts) out.push_back(json::array({p.x(), p.y()}));
  return out;
}

std::array<Vec2, 8> points8_from_json(const json& j, const std::string& file,
                                      const std::string& path) {
  if (!j.is_array() || j.size() != 8) {
    throw ParseError(file, path, "expected 8 [x,y] pairs");
  }
  std::array<Vec2, 8> out;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto xy =
        number_array(j[i], 2, file, path + "[" + std::to_string(i) + "]");
    out[i] = Vec2(xy[0], xy[1]);
  }
  return out;
}

}  // namespace

SceneFile load_scene_file(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  const std::string file = path.string();
  SceneFile scene;
  scene.detections.frame_id = get_string(j, "frame_id", file, "");
  scene.detections.left =
      keypoints_from_json(require_field(j, "left", file, ""), file, "left");
  scene.detections.right =
      keypoints_from_json(require_field(j, "right", file, ""), file, "right");
  try {
    validate_observations(scene.detections);
  } catch (const DuplicateCorner& e) {
    throw ParseError(file, "left/right", e.what());
  }
  if (j.contains("truth")) {
    scene.truth = state_from_json(j.at("truth"), file, "truth");
  }
  if (j.contains("clean_left")) {
    scene.clean_left = points8_from_json(j.at("clean_left"), file, "clean_left");
  }
  if (j.contains("clean_right")) {
    scene.clean_right =
        points8_from_json(j.at("clean_right"), file, "clean_right");
  }
  return scene;
}

void save_scene_file(const std::filesystem::path& path, const SceneFile& scene) {
  json j{{"frame_id", scene.detections.frame_id},
         {"left", keypoints_to_json(scene.detections.left)},
         {"right", keypoints_to_json(scene.detections.right)}};
  if (scene.truth) j["truth"] = state_to_json(*scene.truth);
  if (scene.clean_left) j["clean_left"] = points8_to_json(*scene.clean_left);
  if (scene.clean_right) j["clean_right"] = points8_to_json(*scene.clean_right);
  write_text_file(path, j.dump(2) + "\n");
}

BitMask load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "", "cannot open file");

  // Header tokens may be separated by whitespace and '#' comments.
  const auto next_token = [&]() -> std::string {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
      if (ch == '#') {
        while ((ch = in.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    return tok;
  };

  if (next_token() != "P5") throw ParseError(path.string(), "magic", "expected P5");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw ParseError(path.string(), "header", "malformed dimensions");
  }
  if (width <= 0 || height <= 0) {
    throw ParseError(path.string(), "header", "non-positive dimensions");
  }
  if (maxval <= 0 || maxval > 255) {
    throw ParseError(path.string(), "maxval", "only 8-bit PGM supported");
  }

  std::vector<char> data(static_cast<std::size_t>(width) * height);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    throw ParseError(path.string(), "pixels", "truncated pixel data");
  }
  BitMask mask(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto value = static_cast<unsigned char>(
          data[static_cast<std::size_t>(y) * width + x]);
      if (value >= 128) mask.set(x, y);
    }
  }
  return mask;
}

void save_pgm(const std::filesystem::path& path, const BitMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(mask.width()));
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      row[static_cast<std::size_t>(x)] = mask.test(x, y) ? '\xff' : '\0';
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace stereobox::io
