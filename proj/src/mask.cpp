#include "stereobox/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stereobox/kernels.hpp"

namespace stereobox {

BitMask::BitMask(int width, int height)
    : width_(width),
      height_(height),
      words_per_row_((width + 63) / 64),
      words_(static_cast<std::size_t>(words_per_row_) * height, 0) {
  if (width <= 0 || height <= 0) throw Error("BitMask dimensions must be positive");
}

void BitMask::set_row_span(int y, int x0, int x1) {
  if (y < 0 || y >= height_) return;
  x0 = std::max(x0, 0);
  x1 = std::min(x1, width_ - 1);
  if (x0 > x1) return;
  std::uint64_t* row = words_.data() + static_cast<std::size_t>(y) * words_per_row_;
  const int w0 = x0 >> 6;
  const int w1 = x1 >> 6;
  const std::uint64_t first = ~0ull << (x0 & 63);
  const std::uint64_t last = ~0ull >> (63 - (x1 & 63));
  if (w0 == w1) {
    row[w0] |= first & last;
  } else {
    row[w0] |= first;
    for (int w = w0 + 1; w < w1; ++w) row[w] = ~0ull;
    row[w1] |= last;
  }
}

std::uint64_t BitMask::count() const {
  return kernels::active_ops().popcount(words_.data(), words_.size());
}

double iou(const BitMask& a, const BitMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionMismatch("mask sizes differ: " + std::to_string(a.width()) +
                            "x" + std::to_string(a.height()) + " vs " +
                            std::to_string(b.width()) + "x" +
                            std::to_string(b.height()));
  }
  const auto& ops = kernels::active_ops();
  const std::uint64_t inter =
      ops.popcount_and(a.words().data(), b.words().data(), a.words().size());
  const std::uint64_t uni =
      ops.popcount_or(a.words().data(), b.words().data(), a.words().size());
  if (uni == 0) return 1.0;  // empty vs empty; upstream failure, see callers
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool point_in_convex_polygon(std::span<const Vec2> v, const Vec2& p, double tol) {
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    const double cross =
        (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross < -tol) return false;
  }
  return true;
}

namespace {

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

std::vector<Vec2> convex_hull(std::span<const Vec2> points) {
  std::vector<Vec2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;

  // Andrew monotone chain; strict turns only, so collinear points drop out.
  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

BitMask rasterize_convex_polygon(std::span<const Vec2> v, int width, int height) {
  BitMask mask(width, height);
  if (v.size() < 3) return mask;

  constexpr double tol = 1e-9;
  double min_y = std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  for (const Vec2& p : v) {
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(max_y)) + 1);

  const std::size_t n = v.size();
  for (int y = y0; y <= y1; ++y) {
    // Intersect the row with every edge half-plane: cross(b-a, p-a) >= -tol
    // is linear in x, so each edge yields a lower or upper bound (or a
    // row-level accept/reject when the edge is horizontal).
    double lo = -1e18, hi = 1e18;
    bool row_alive = true;
    for (std::size_t i = 0; i < n && row_alive; ++i) {
      const Vec2& a = v[i];
      const Vec2& b = v[(i + 1) % n];
      const double dx = b.x() - a.x();
      const double dy = b.y() - a.y();
      const double rhs = tol + dx * (y - a.y()) + dy * a.x();
      if (dy > 0) {
        hi = std::min(hi, rhs / dy);
      } else if (dy < 0) {
        lo = std::max(lo, rhs / dy);
      } else if (dx * (y - a.y()) < -tol) {
        row_alive = false;
      }
    }
    if (!row_alive || lo > hi + 1.0) continue;

    // The analytic interval is correct to rounding error; settle boundary
    // pixels with the canonical predicate so the fill is exactly the set of
    // centers that pass point_in_convex_polygon.
    const double lo_c = std::clamp(lo, -2.0, static_cast<double>(width) + 1.0);
    const double hi_c = std::clamp(hi, -2.0, static_cast<double>(width) + 1.0);
    int i0 = std::clamp(static_cast<int>(std::floor(lo_c)) - 1, 0, width - 1);
    int i1 = std::clamp(static_cast<int>(std::ceil(hi_c)) + 1, 0, width - 1);
    const auto inside = [&](int x) {
      return point_in_convex_polygon(v, Vec2(x, y), tol);
    };
    while (i0 > 0 && inside(i0 - 1)) --i0;
    while (i1 < width - 1 && inside(i1 + 1)) ++i1;
    while (i0 <= i1 && !inside(i0)) ++i0;
    while (i1 >= i0 && !inside(i1)) --i1;
    if (i0 <= i1) mask.set_row_span(y, i0, i1);
  }
  return mask;
}

}  // namespace stereobox
