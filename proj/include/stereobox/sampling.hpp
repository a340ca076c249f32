#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stereobox/geometry.hpp"

namespace stereobox {

/// Strictly convex (up to 1e-9 collinearity) polygon, vertices
/// counter-clockwise by signed area, no repeats.
struct ConvexPolygon {
  std::vector<Vec2> vertices;

  static ConvexPolygon from_vertices(std::vector<Vec2> vertices);

  double area() const;
};

struct Triangle {
  Vec2 a, b, c;

  double area() const {
    return 0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) -
                          (b.y() - a.y()) * (c.x() - a.x()));
  }
};

/// Fan decomposition (v0, v_k, v_{k+1}); throws DegeneratePolygon when the
/// polygon area is below 1e-12.
std::vector<Triangle> fan_triangulate(const ConvexPolygon& poly);

enum class SamplingStrategy { axis_aligned, uniform_simplex, adaptive_simplex };

std::string to_string(SamplingStrategy s);
SamplingStrategy strategy_from_string(const std::string& name);

struct SampleBatch {
  std::vector<Vec2> points;
  SamplingStrategy strategy;
  std::uint64_t seed = 0;
};

/// Normalized-uniform-weight convex combinations of the vertices. Clusters
/// toward the centroid; kept for comparison against the simplex methods.
SampleBatch sample_axis_aligned(const ConvexPolygon& poly, int n,
                                std::uint64_t seed);

/// Area-weighted triangle selection + uniform barycentric draw per point;
/// uniform over the polygon.
SampleBatch sample_uniform_simplex(const ConvexPolygon& poly, int n,
                                   std::uint64_t seed);

/// round(density * area) samples per triangle (at least 1 for any triangle
/// with area > 1e-9), each uniform within its triangle.
SampleBatch sample_adaptive_simplex(const ConvexPolygon& poly, double density,
                                    std::uint64_t seed);

}  // namespace stereobox
