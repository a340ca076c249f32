#include "stereobox/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "stereobox/kernels.hpp"

namespace stereobox {

ConvexPolygon ConvexPolygon::from_vertices(std::vector<Vec2> vertices) {
  const std::size_t n = vertices.size();
  if (n < 3) throw DegeneratePolygon("polygon needs at least 3 vertices");
  for (const Vec2& v : vertices) {
    if (!v.allFinite()) throw DegeneratePolygon("non-finite vertex");
  }
  double signed_area = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    signed_area += 0.5 * (a.x() * b.y() - b.x() * a.y());
    if ((b - a).squaredNorm() < 1e-18) {
      throw DegeneratePolygon("repeated vertex");
    }
  }
  if (signed_area <= 0.0) {
    throw DegeneratePolygon("vertices must be counter-clockwise (area " +
                            std::to_string(signed_area) + ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    const Vec2& c = vertices[(i + 2) % n];
    const double turn =
        (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (turn < -1e-9) throw DegeneratePolygon("vertices are not convex");
  }
  return ConvexPolygon{std::move(vertices)};
}

double ConvexPolygon::area() const {
  double signed_area = 0.0;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    signed_area += 0.5 * (a.x() * b.y() - b.x() * a.y());
  }
  return signed_area;
}

std::vector<Triangle> fan_triangulate(const ConvexPolygon& poly) {
  if (poly.area() < 1e-12) {
    throw DegeneratePolygon("polygon area below 1e-12");
  }
  std::vector<Triangle> tris;
  tris.reserve(poly.vertices.size() - 2);
  for (std::size_t k = 1; k + 1 < poly.vertices.size(); ++k) {
    tris.push_back({poly.vertices[0], poly.vertices[k], poly.vertices[k + 1]});
  }
  return tris;
}

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::axis_aligned: return "axis_aligned";
    case SamplingStrategy::uniform_simplex: return "uniform_simplex";
    case SamplingStrategy::adaptive_simplex: return "adaptive_simplex";
  }
  return "unknown";
}

SamplingStrategy strategy_from_string(const std::string& name) {
  if (name == "axis_aligned") return SamplingStrategy::axis_aligned;
  if (name == "uniform_simplex") return SamplingStrategy::uniform_simplex;
  if (name == "adaptive_simplex") return SamplingStrategy::adaptive_simplex;
  throw Error("unknown sampling strategy: " + name);
}

namespace {

Vec2 barycentric_point(const Triangle& tri, double u1, double u2) {
  if (u1 + u2 > 1.0) {  // reflect into the lower-left half of the unit square
    u1 = 1.0 - u1;
    u2 = 1.0 - u2;
  }
  return tri.a + u1 * (tri.b - tri.a) + u2 * (tri.c - tri.a);
}

}  // namespace

SampleBatch sample_axis_aligned(const ConvexPolygon& poly, int n,
                                std::uint64_t seed) {
  const std::size_t v = poly.vertices.size();
  std::vector<double> uniforms(static_cast<std::size_t>(n) * v);
  kernels::active_ops().uniform_batch(seed, 0, n, v, uniforms.data());

  SampleBatch batch{{}, SamplingStrategy::axis_aligned, seed};
  batch.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double* w = uniforms.data() + static_cast<std::size_t>(i) * v;
    double total = 0.0;
    for (std::size_t j = 0; j < v; ++j) total += w[j];
    Vec2 p = Vec2::Zero();
    for (std::size_t j = 0; j < v; ++j) p += (w[j] / total) * poly.vertices[j];
    batch.points.push_back(p);
  }
  return batch;
}

SampleBatch sample_uniform_simplex(const ConvexPolygon& poly, int n,
                                   std::uint64_t seed) {
  const std::vector<Triangle> tris = fan_triangulate(poly);
  std::vector<double> cdf(tris.size());
  double total_area = 0.0;
  for (std::size_t i = 0; i < tris.size(); ++i) {
    total_area += tris[i].area();
    cdf[i] = total_area;
  }

  std::vector<double> uniforms(static_cast<std::size_t>(n) * 3);
  kernels::active_ops().uniform_batch(seed, 0, n, 3, uniforms.data());

  SampleBatch batch{{}, SamplingStrategy::uniform_simplex, seed};
  batch.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double* u = uniforms.data() + static_cast<std::size_t>(i) * 3;
    const double target = u[0] * total_area;
    const std::size_t idx = std::min(
        static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin()),
        tris.size() - 1);
    batch.points.push_back(barycentric_point(tris[idx], u[1], u[2]));
  }
  return batch;
}

SampleBatch sample_adaptive_simplex(const ConvexPolygon& poly, double density,
                                    std::uint64_t seed) {
  if (density <= 0) throw Error("density must be positive");
  const std::vector<Triangle> tris = fan_triangulate(poly);

  SampleBatch batch{{}, SamplingStrategy::adaptive_simplex, seed};
  std::uint64_t next_index = 0;  // global per-point stream index
  for (const Triangle& tri : tris) {
    const double area = tri.area();
    auto count = static_cast<std::int64_t>(std::llround(density * area));
    if (count == 0 && area > 1e-9) count = 1;
    if (count <= 0) {
      continue;
    }
    std::vector<double> uniforms(static_cast<std::size_t>(count) * 2);
    kernels::active_ops().uniform_batch(seed, next_index, count, 2,
                                        uniforms.data());
    next_index += static_cast<std::uint64_t>(count);
    for (std::int64_t i = 0; i < count; ++i) {
      const double* u = uniforms.data() + static_cast<std::size_t>(i) * 2;
      batch.points.push_back(barycentric_point(tri, u[0], u[1]));
    }
  }
  return batch;
}

}  // namespace stereobox
