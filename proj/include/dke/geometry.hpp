#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace dke {

using Point = Eigen::Vector2d;

/// Vertex list, one (x, y) pair per row, pixel units, y pointing down.
template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;
using Points = PointsT<double>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundingBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 0.0;
  double height = 0.0;
};

/// Implicitly closed boundary. The checked constructor enforces at least three
/// vertices, no coincident consecutive vertices and no self-intersection.
class Polygon {
 public:
  explicit Polygon(Points vertices);

  /// Skips the simplicity test. Network predictions go through here since a
  /// regressed contour is not guaranteed to be simple.
  static Polygon unchecked(Points vertices);

  const Points& vertices() const { return vertices_; }
  Eigen::Index size() const { return vertices_.rows(); }
  Point vertex(Eigen::Index i) const { return vertices_.row(i).transpose(); }

  friend bool operator==(const Polygon& a, const Polygon& b) {
    return a.vertices_ == b.vertices_;
  }

 private:
  struct NoSimplicityCheck {};
  Polygon(Points vertices, NoSimplicityCheck);

  Points vertices_;
};

/// Fixed-length, canonically ordered vertex sequence (clockwise on screen,
/// vertex 0 nearest the upper-left corner of the bounding box).
struct Contour {
  Points points;

  Eigen::Index size() const { return points.rows(); }
  Point operator[](Eigen::Index i) const { return points.row(i).transpose(); }
};

struct ShrinkParams {
  double ratio = 0.4;
  double margin = 0.0;

  static ShrinkParams derive(const Polygon& p, double ratio);
};

inline constexpr int kDefaultVertices = 128;
inline constexpr double kDefaultShrinkRatio = 0.4;

/// Shoelace area with y flipped to point up, so a ring that runs clockwise on
/// screen has negative signed area.
double signed_area(const Points& ring);
double area(const Polygon& p);
double perimeter(const Points& ring);
double perimeter(const Polygon& p);

BoundingBox bbox(const Points& ring);
BoundingBox bbox(const Polygon& p);

bool is_simple(const Points& ring);

/// Even-odd point-in-ring test.
bool contains(const Points& ring, const Point& q);
double distance_to_boundary(const Points& ring, const Point& q);

/// Hausdorff distance between two closed rings (vertices to segments, both ways).
double hausdorff(const Points& a, const Points& b);

/// Offset margin for a shrink ratio: area * (1 - ratio^2) / perimeter.
double shrink_margin(const Polygon& p, double ratio);

/// Parallel edge offset with miter joins. Negative margin shrinks, positive
/// grows. Self-intersections in the raw offset ring are split apart and the
/// largest loop with the source orientation is kept.
Polygon offset(const Polygon& p, double margin);

/// Uniform arc-length resampling to `n` vertices followed by canonical
/// ordering.
Contour sample_and_sort(const Polygon& p, int n);

/// Rasterized IoU over the union bounding box, `supersample` samples per pixel
/// edge. Works for any closed ring (even-odd fill).
double ring_iou(const Points& a, const Points& b, int supersample = 4);
double polygon_iou(const Polygon& a, const Polygon& b, int supersample = 4);

}  // namespace dke
