#include "dke/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dke {

namespace {

constexpr double kCoincident = 1e-9;

Point at(const Points& ring, Eigen::Index i) {
  const Eigen::Index n = ring.rows();
  return ring.row(((i % n) + n) % n).transpose();
}

double cross(const Point& a, const Point& b, const Point& c) {
  const Point u = b - a;
  const Point v = c - a;
  return u.x() * v.y() - u.y() * v.x();
}

// Sign of cross(a, b, c) with a relative dead zone for near-collinear triples.
int orient(const Point& a, const Point& b, const Point& c) {
  const double v = cross(a, b, c);
  const double scale = (b - a).norm() * (c - a).norm();
  if (std::abs(v) <= 1e-12 * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool within_box(const Point& a, const Point& b, const Point& q) {
  constexpr double eps = 1e-12;
  return q.x() >= std::min(a.x(), b.x()) - eps && q.x() <= std::max(a.x(), b.x()) + eps &&
         q.y() >= std::min(a.y(), b.y()) - eps && q.y() <= std::max(a.y(), b.y()) + eps;
}

bool segments_touch(const Point& a, const Point& b, const Point& c, const Point& d) {
  const int o1 = orient(a, b, c);
  const int o2 = orient(a, b, d);
  const int o3 = orient(c, d, a);
  const int o4 = orient(c, d, b);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  if (o1 == 0 && within_box(a, b, c)) return true;
  if (o2 == 0 && within_box(a, b, d)) return true;
  if (o3 == 0 && within_box(c, d, a)) return true;
  if (o4 == 0 && within_box(c, d, b)) return true;
  return false;
}

// Point where two touching segments meet. For collinear overlaps any shared
// point will do; the first endpoint found inside the other segment is used.
Point touch_point(const Point& a, const Point& b, const Point& c, const Point& d) {
  const Point r = b - a;
  const Point s = d - c;
  const double denom = r.x() * s.y() - r.y() * s.x();
  if (std::abs(denom) > 1e-15 * r.norm() * s.norm()) {
    const Point ac = c - a;
    const double t = (ac.x() * s.y() - ac.y() * s.x()) / denom;
    return a + std::clamp(t, 0.0, 1.0) * r;
  }
  if (within_box(a, b, c)) return c;
  if (within_box(a, b, d)) return d;
  return a;
}

double point_segment_distance(const Point& q, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - q).norm();
}

// Raw shoelace in the stored coordinates. Positive for rings that run
// clockwise on screen.
double raw_shoelace(const Points& ring) {
  const Eigen::Index n = ring.rows();
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    s += ring(i, 0) * ring(j, 1) - ring(j, 0) * ring(i, 1);
  }
  return 0.5 * s;
}

Points from_vector(const std::vector<Point>& pts) {
  Points out(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return out;
}

// Drops consecutive duplicates and vertices where the ring folds straight back.
std::vector<Point> tidy(std::vector<Point> pts) {
  for (;;) {
    std::vector<Point> out;
    out.reserve(pts.size());
    for (const Point& p : pts) {
      if (out.empty() || (p - out.back()).norm() > kCoincident) out.push_back(p);
    }
    while (out.size() > 1 && (out.front() - out.back()).norm() <= kCoincident) out.pop_back();
    const std::size_t n = out.size();
    if (n < 3) return out;
    std::vector<Point> kept;
    kept.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Point& prev = out[(i + n - 1) % n];
      const Point& cur = out[i];
      const Point& next = out[(i + 1) % n];
      const bool spike = orient(prev, cur, next) == 0 && (prev - cur).dot(next - cur) > 0.0;
      if (!spike) kept.push_back(cur);
    }
    if (kept.size() == n) return kept;
    pts = std::move(kept);
  }
}

// Recursively cuts a ring at its self-intersections.
void split_loops(const std::vector<Point>& ring, std::vector<std::vector<Point>>& out, int depth = 0) {
  const std::size_t n = ring.size();
  if (n < 3) return;
  if (depth > 4096) {
    out.push_back(ring);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const Point& c = ring[j];
      const Point& d = ring[(j + 1) % n];
      if (std::max(a.x(), b.x()) < std::min(c.x(), d.x()) || std::max(c.x(), d.x()) < std::min(a.x(), b.x()) ||
          std::max(a.y(), b.y()) < std::min(c.y(), d.y()) || std::max(c.y(), d.y()) < std::min(a.y(), b.y()))
        continue;
      if (!segments_touch(a, b, c, d)) continue;
      const Point x = touch_point(a, b, c, d);
      std::vector<Point> first{x};
      for (std::size_t k = i + 1; k <= j; ++k) first.push_back(ring[k]);
      std::vector<Point> second;
      for (std::size_t k = j + 1; k < n; ++k) second.push_back(ring[k]);
      for (std::size_t k = 0; k <= i; ++k) second.push_back(ring[k]);
      second.push_back(x);
      split_loops(tidy(std::move(first)), out, depth + 1);
      split_loops(tidy(std::move(second)), out, depth + 1);
      return;
    }
  }
  out.push_back(ring);
}

}  // namespace

Polygon::Polygon(Points vertices, NoSimplicityCheck) : vertices_(std::move(vertices)) {
  if (vertices_.rows() < 3) throw GeometryError("polygon needs at least 3 vertices");
  if (!vertices_.allFinite()) throw GeometryError("polygon has non-finite coordinates");
  const Eigen::Index n = vertices_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((vertices_.row(i) - vertices_.row((i + 1) % n)).norm() <= kCoincident)
      throw GeometryError("polygon has coincident consecutive vertices");
  }
}

Polygon::Polygon(Points vertices) : Polygon(std::move(vertices), NoSimplicityCheck{}) {
  if (!is_simple(vertices_)) throw GeometryError("polygon is not simple");
}

Polygon Polygon::unchecked(Points vertices) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(vertices.rows()));
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    const Point p = vertices.row(i).transpose();
    if (pts.empty() || (p - pts.back()).norm() > kCoincident) pts.push_back(p);
  }
  while (pts.size() > 1 && (pts.front() - pts.back()).norm() <= kCoincident) pts.pop_back();
  return Polygon(from_vector(pts), NoSimplicityCheck{});
}

ShrinkParams ShrinkParams::derive(const Polygon& p, double ratio) {
  return ShrinkParams{ratio, shrink_margin(p, ratio)};
}

double signed_area(const Points& ring) { return -raw_shoelace(ring); }

double area(const Polygon& p) { return std::abs(raw_shoelace(p.vertices())); }

double perimeter(const Points& ring) {
  const Eigen::Index n = ring.rows();
  double len = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) len += (ring.row((i + 1) % n) - ring.row(i)).norm();
  return len;
}

double perimeter(const Polygon& p) { return perimeter(p.vertices()); }

BoundingBox bbox(const Points& ring) {
  const Eigen::RowVector2d lo = ring.colwise().minCoeff();
  const Eigen::RowVector2d hi = ring.colwise().maxCoeff();
  return BoundingBox{lo.x(), lo.y(), hi.x() - lo.x(), hi.y() - lo.y()};
}

BoundingBox bbox(const Polygon& p) { return bbox(p.vertices()); }

bool is_simple(const Points& ring) {
  const Eigen::Index n = ring.rows();
  if (n < 3) return false;
  if (std::abs(raw_shoelace(ring)) <= 1e-12) return false;

  std::vector<Eigen::Vector4d> boxes(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point a = at(ring, i);
    const Point b = at(ring, i + 1);
    boxes[static_cast<std::size_t>(i)] << std::min(a.x(), b.x()), std::max(a.x(), b.x()), std::min(a.y(), b.y()),
        std::max(a.y(), b.y());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point prev = at(ring, i - 1);
    const Point cur = at(ring, i);
    const Point next = at(ring, i + 1);
    if ((cur - prev).norm() <= kCoincident) return false;
    // Adjacent edges may only share their common vertex.
    if (orient(prev, cur, next) == 0 && (prev - cur).dot(next - cur) > 0.0) return false;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bi = boxes[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const auto& bj = boxes[static_cast<std::size_t>(j)];
      if (bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2]) continue;
      if (segments_touch(at(ring, i), at(ring, i + 1), at(ring, j), at(ring, j + 1))) return false;
    }
  }
  return true;
}

bool contains(const Points& ring, const Point& q) {
  const Eigen::Index n = ring.rows();
  bool inside = false;
  for (Eigen::Index i = 0, j = n - 1; i < n; j = i++) {
    const double yi = ring(i, 1);
    const double yj = ring(j, 1);
    if ((yi <= q.y()) != (yj <= q.y())) {
      const double x = ring(i, 0) + (q.y() - yi) * (ring(j, 0) - ring(i, 0)) / (yj - yi);
      if (q.x() < x) inside = !inside;
    }
  }
  return inside;
}

double distance_to_boundary(const Points& ring, const Point& q) {
  double best = std::numeric_limits<double>::infinity();
  const Eigen::Index n = ring.rows();
  for (Eigen::Index i = 0; i < n; ++i) best = std::min(best, point_segment_distance(q, at(ring, i), at(ring, i + 1)));
  return best;
}

double hausdorff(const Points& a, const Points& b) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) h = std::max(h, distance_to_boundary(b, a.row(i).transpose()));
  for (Eigen::Index i = 0; i < b.rows(); ++i) h = std::max(h, distance_to_boundary(a, b.row(i).transpose()));
  return h;
}

double shrink_margin(const Polygon& p, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("shrink ratio must lie in (0, 1]");
  const double len = perimeter(p);
  if (len <= kCoincident) throw GeometryError("degenerate perimeter");
  return area(p) * (1.0 - ratio * ratio) / len;
}

Polygon offset(const Polygon& p, double margin) {
  if (margin == 0.0) return p;
  if (!std::isfinite(margin)) throw std::invalid_argument("offset margin must be finite");

  const Points& v = p.vertices();
  const Eigen::Index n = v.rows();
  const double source_area = raw_shoelace(v);
  const double side = source_area > 0.0 ? 1.0 : -1.0;

  // One offset line per source edge: base point, unit direction, outward normal.
  struct Line {
    Eigen::Index edge;
    Point base, dir, normal;
  };
  std::vector<Line> lines;
  lines.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point a = at(v, i);
    const Point d = (at(v, i + 1) - a).normalized();
    const Point nrm(side * d.y(), -side * d.x());
    lines.push_back({i, a + margin * nrm, d, nrm});
  }

  auto meet = [&](const Line& a, const Line& b) -> Point {
    const double denom = a.dir.x() * b.dir.y() - a.dir.y() * b.dir.x();
    if (std::abs(denom) < 1e-12) return b.base;
    const Point ab = b.base - a.base;
    const double t = (ab.x() * b.dir.y() - ab.y() * b.dir.x()) / denom;
    return a.base + t * a.dir;
  };

  // An offset edge that runs against its source edge has been swallowed by its
  // neighbours. Drop the worst one and re-join until every edge runs forward.
  std::vector<Point> joins;
  for (;;) {
    const std::size_t k = lines.size();
    if (k < 3) throw GeometryError("offset collapses the polygon");
    joins.assign(k, Point::Zero());
    for (std::size_t i = 0; i < k; ++i) joins[i] = meet(lines[(i + k - 1) % k], lines[i]);
    std::size_t worst = k;
    double worst_run = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double run = (joins[(i + 1) % k] - joins[i]).dot(lines[i].dir);
      if (run < worst_run - kCoincident) {
        worst_run = run;
        worst = i;
      }
    }
    if (worst == k) break;
    lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(worst));
  }

  // Joins sharper than 120 degrees between adjacent source edges are bevelled
  // instead of mitred, so a near-reversal cannot throw a long spike.
  constexpr double kMiterLimit = 2.0;
  const std::size_t k = lines.size();
  std::vector<Point> raw;
  raw.reserve(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const Line& a = lines[(i + k - 1) % k];
    const Line& b = lines[i];
    const bool adjacent = (a.edge + 1) % n == b.edge;
    if (adjacent && 1.0 + a.normal.dot(b.normal) < 2.0 / (kMiterLimit * kMiterLimit)) {
      const Point corner = at(v, b.edge);
      const Point pa = corner + margin * a.normal;
      const Point pb = corner + margin * b.normal;
      if ((joins[i] - pa).dot(a.dir) > 0.0) {
        raw.push_back(pa);
        raw.push_back(pb);
        continue;
      }
    }
    raw.push_back(joins[i]);
  }

  std::vector<std::vector<Point>> loops;
  split_loops(tidy(std::move(raw)), loops);

  Points best;
  double best_area = 0.0;
  for (const auto& loop : loops) {
    if (loop.size() < 3) continue;
    Points ring = from_vector(loop);
    const double a = raw_shoelace(ring);
    if (a * side <= 1e-9 * std::max(1.0, std::abs(source_area))) continue;
    if (std::abs(a) <= best_area || !is_simple(ring)) continue;
    best_area = std::abs(a);
    best = std::move(ring);
  }
  if (best.rows() == 0) throw GeometryError("offset collapses the polygon");
  return Polygon(best);
}

Contour sample_and_sort(const Polygon& p, int n) {
  if (n < 4) throw std::invalid_argument("sample_and_sort needs n >= 4");

  Points ring = p.vertices();
  if (signed_area(ring) > 0.0) ring = ring.colwise().reverse().eval();

  // Start the traversal at a canonical vertex so ties resolve independently of
  // the input's starting vertex and orientation.
  const Eigen::Index m = ring.rows();
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i < m; ++i) {
    const double si = ring(i, 0) + ring(i, 1);
    const double ss = ring(start, 0) + ring(start, 1);
    if (si < ss || (si == ss && (ring(i, 1) < ring(start, 1) ||
                                 (ring(i, 1) == ring(start, 1) && ring(i, 0) < ring(start, 0)))))
      start = i;
  }
  Points rotated(m, 2);
  for (Eigen::Index i = 0; i < m; ++i) rotated.row(i) = ring.row((start + i) % m);

  std::vector<double> cum(static_cast<std::size_t>(m) + 1, 0.0);
  for (Eigen::Index i = 0; i < m; ++i)
    cum[static_cast<std::size_t>(i) + 1] = cum[static_cast<std::size_t>(i)] + (at(rotated, i + 1) - at(rotated, i)).norm();
  const double total = cum.back();

  const BoundingBox box = bbox(rotated);
  const Point corner(box.x0, box.y0);
  double best = std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  const double tol = 1e-12 * (1.0 + total * total);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Point a = at(rotated, i);
    const Point ab = at(rotated, i + 1) - a;
    const double t = std::clamp((corner - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const double d2 = (a + t * ab - corner).squaredNorm();
    if (d2 < best - tol) {
      best = d2;
      s0 = cum[static_cast<std::size_t>(i)] + t * ab.norm();
    }
  }

  Contour out{Points(n, 2)};
  const double step = total / n;
  for (int k = 0; k < n; ++k) {
    double s = s0 + k * step;
    if (s >= total) s -= total;
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    auto e = static_cast<Eigen::Index>(std::distance(cum.begin(), it)) - 1;
    e = std::clamp<Eigen::Index>(e, 0, m - 1);
    const double len = cum[static_cast<std::size_t>(e) + 1] - cum[static_cast<std::size_t>(e)];
    const double t = len > 0.0 ? (s - cum[static_cast<std::size_t>(e)]) / len : 0.0;
    out.points.row(k) = (at(rotated, e) + t * (at(rotated, e + 1) - at(rotated, e))).transpose();
  }
  return out;
}

namespace {

using Span = std::pair<long, long>;

void row_spans(const Points& ring, double y, double gx0, int ss, long cols, std::vector<double>& xs,
               std::vector<Span>& spans) {
  xs.clear();
  spans.clear();
  const Eigen::Index n = ring.rows();
  for (Eigen::Index i = 0, j = n - 1; i < n; j = i++) {
    const double yi = ring(i, 1);
    const double yj = ring(j, 1);
    if ((yi <= y) != (yj <= y)) xs.push_back(ring(i, 0) + (y - yi) * (ring(j, 0) - ring(i, 0)) / (yj - yi));
  }
  std::sort(xs.begin(), xs.end());
  for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
    long lo = static_cast<long>(std::ceil((xs[k] - gx0) * ss - 0.5));
    long hi = static_cast<long>(std::ceil((xs[k + 1] - gx0) * ss - 0.5));
    lo = std::clamp(lo, 0L, cols);
    hi = std::clamp(hi, 0L, cols);
    if (hi > lo) spans.emplace_back(lo, hi);
  }
}

long span_total(const std::vector<Span>& s) {
  long t = 0;
  for (const auto& [lo, hi] : s) t += hi - lo;
  return t;
}

long span_overlap(const std::vector<Span>& a, const std::vector<Span>& b) {
  long t = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const long lo = std::max(a[i].first, b[j].first);
    const long hi = std::min(a[i].second, b[j].second);
    if (hi > lo) t += hi - lo;
    if (a[i].second < b[j].second) ++i;
    else ++j;
  }
  return t;
}

}  // namespace

double ring_iou(const Points& a, const Points& b, int supersample) {
  if (supersample < 1) throw std::invalid_argument("supersample must be >= 1");
  const BoundingBox ba = bbox(a);
  const BoundingBox bb = bbox(b);
  const double gx0 = std::floor(std::min(ba.x0, bb.x0));
  const double gy0 = std::floor(std::min(ba.y0, bb.y0));
  const double gx1 = std::ceil(std::max(ba.x0 + ba.width, bb.x0 + bb.width));
  const double gy1 = std::ceil(std::max(ba.y0 + ba.height, bb.y0 + bb.height));
  const long cols = static_cast<long>(gx1 - gx0) * supersample;
  const long rows = static_cast<long>(gy1 - gy0) * supersample;

  long count_a = 0;
  long count_b = 0;
  long count_ab = 0;
  std::vector<double> xs;
  std::vector<Span> sa;
  std::vector<Span> sb;
  for (long r = 0; r < rows; ++r) {
    const double y = gy0 + (static_cast<double>(r) + 0.5) / supersample;
    row_spans(a, y, gx0, supersample, cols, xs, sa);
    row_spans(b, y, gx0, supersample, cols, xs, sb);
    count_a += span_total(sa);
    count_b += span_total(sb);
    count_ab += span_overlap(sa, sb);
  }
  const long uni = count_a + count_b - count_ab;
  return uni > 0 ? static_cast<double>(count_ab) / static_cast<double>(uni) : 0.0;
}

double polygon_iou(const Polygon& a, const Polygon& b, int supersample) {
  return ring_iou(a.vertices(), b.vertices(), supersample);
}

}  // namespace dke
