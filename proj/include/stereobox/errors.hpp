#pragma once

#include <stdexcept>
#include <string>

namespace stereobox {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A 3D point fell on or behind the camera plane (z <= depth_min).
struct PointBehindCamera : Error {
  std::string view;       // "left"/"right" when known, else empty
  int corner_index = -1;  // -1 when not keypoint-related

  explicit PointBehindCamera(double z)
      : Error("point behind camera: z = " + std::to_string(z)) {}
  PointBehindCamera(double z, std::string view_, int corner_)
      : Error("point behind camera in " + view_ + " view, corner " +
              std::to_string(corner_) + ": z = " + std::to_string(z)),
        view(std::move(view_)),
        corner_index(corner_) {}
};

struct DegenerateMatrix : Error {
  using Error::Error;
};

struct DegenerateBaseline : Error {
  using Error::Error;
};

struct DegeneratePolygon : Error {
  using Error::Error;
};

struct InsufficientObservations : Error {
  using Error::Error;
};

struct NonFiniteObjective : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct SamplingExhausted : Error {
  using Error::Error;
};

struct MissingTruth : Error {
  using Error::Error;
};

struct DuplicateCorner : Error {
  using Error::Error;
};

// Malformed input file; carries the file and the offending field.
struct ParseError : Error {
  std::string file;
  std::string field;

  ParseError(std::string file_, std::string field_, const std::string& what_)
      : Error(file_ + ": " + field_ + ": " + what_),
        file(std::move(file_)),
        field(std::move(field_)) {}
};

}  // namespace stereobox
