#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stereobox/geometry.hpp"

namespace stereobox {

/// Row-major binary image, bit-packed into 64-bit words per row. Padding
/// bits past `width` are always zero, so word-level popcounts are exact.
class BitMask {
 public:
  BitMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  bool test(int x, int y) const {
    return (words_[word_index(x, y)] >> (x & 63)) & 1u;
  }
  void set(int x, int y) { words_[word_index(x, y)] |= 1ull << (x & 63); }

  /// Sets bits [x0, x1] of row y (inclusive); clips to the image.
  void set_row_span(int y, int x0, int x1);

  std::uint64_t count() const;

  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const BitMask& o) const {
    return width_ == o.width_ && height_ == o.height_ && words_ == o.words_;
  }

 private:
  std::size_t word_index(int x, int y) const {
    return static_cast<std::size_t>(y) * words_per_row_ +
           static_cast<std::size_t>(x >> 6);
  }

  int width_ = 0;
  int height_ = 0;
  int words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

/// |a ∩ b| / |a ∪ b|; 1.0 when both masks are empty. Throws DimensionMismatch.
double iou(const BitMask& a, const BitMask& b);

/// Inclusive point-in-convex-polygon test: every CCW edge half-plane cross
/// product >= -tol. Vertices must be counter-clockwise by signed area.
bool point_in_convex_polygon(std::span<const Vec2> ccw_vertices, const Vec2& p,
                             double tol = 1e-9);

/// Convex hull (counter-clockwise by signed area) of a 2D point set.
/// Collinear points on the hull boundary are dropped.
std::vector<Vec2> convex_hull(std::span<const Vec2> points);

/// Scanline-fills the hull: pixel (x,y) is set iff its center lies inside,
/// boundary inclusive, matching point_in_convex_polygon exactly.
BitMask rasterize_convex_polygon(std::span<const Vec2> ccw_vertices, int width,
                                 int height);

}  // namespace stereobox
