#include "dke/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace dke {

std::string_view to_string(ShapeKind kind) { return kind == ShapeKind::kRibbon ? "ribbon" : "quad"; }

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "ribbon") return ShapeKind::kRibbon;
  if (name == "quad") return ShapeKind::kQuad;
  throw std::invalid_argument("unknown shape kind: " + std::string(name));
}

namespace {

Points place(const Points& local, const Point& center, double rotation) {
  const Eigen::Rotation2D<double> rot(rotation);
  Points out(local.rows(), 2);
  for (Eigen::Index i = 0; i < local.rows(); ++i) out.row(i) = (rot * local.row(i).transpose() + center).transpose();
  return out;
}

double segment_distance(const Point& a, const Point& b, const Point& c, const Point& d) {
  auto point_seg = [](const Point& q, const Point& p0, const Point& p1) {
    const Point e = p1 - p0;
    const double t = std::clamp((q - p0).dot(e) / e.squaredNorm(), 0.0, 1.0);
    return (p0 + t * e - q).norm();
  };
  auto cr = [](const Point& o, const Point& p, const Point& q) {
    return (p - o).x() * (q - o).y() - (p - o).y() * (q - o).x();
  };
  const double d1 = cr(a, b, c);
  const double d2 = cr(a, b, d);
  const double d3 = cr(c, d, a);
  const double d4 = cr(c, d, b);
  if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return 0.0;
  return std::min({point_seg(a, c, d), point_seg(b, c, d), point_seg(c, a, b), point_seg(d, a, b)});
}

bool separated(const Polygon& p, const Polygon& q, double clearance) {
  const BoundingBox bp = bbox(p);
  const BoundingBox bq = bbox(q);
  if (bp.x0 > bq.x0 + bq.width + clearance || bq.x0 > bp.x0 + bp.width + clearance ||
      bp.y0 > bq.y0 + bq.height + clearance || bq.y0 > bp.y0 + bp.height + clearance)
    return true;
  if (contains(p.vertices(), q.vertex(0)) || contains(q.vertices(), p.vertex(0))) return false;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Point a = p.vertex(i);
    const Point b = p.vertex((i + 1) % p.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      if (segment_distance(a, b, q.vertex(j), q.vertex((j + 1) % q.size())) <= clearance) return false;
    }
  }
  return true;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ (index + 1) * 0xD1B54A32D192ED03ULL);
}

Polygon make_ribbon(const RibbonSpec& spec) {
  if (spec.length <= 0.0 || spec.half_width <= 0.0 || spec.wavelength <= 0.0 || spec.amplitude < 0.0)
    throw std::invalid_argument("ribbon: non-positive dimension");
  if (spec.segments < 12) throw std::invalid_argument("ribbon: needs at least 12 centerline samples");
  const double k = 2.0 * std::numbers::pi / spec.wavelength;
  // Offsetting by half_width folds the inner side once curvature exceeds 1/half_width.
  if (spec.amplitude * k * k * spec.half_width >= 1.0)
    throw GeometryError("ribbon: amplitude too large for wavelength and half-width");

  const int m = spec.segments;
  Points local(2 * m, 2);
  for (int i = 0; i < m; ++i) {
    const double x = -0.5 * spec.length + spec.length * i / (m - 1);
    const Point c(x, spec.amplitude * std::sin(k * x));
    const Point t = Point(1.0, spec.amplitude * k * std::cos(k * x)).normalized();
    const Point n(-t.y(), t.x());
    local.row(i) = (c - spec.half_width * n).transpose();
    local.row(2 * m - 1 - i) = (c + spec.half_width * n).transpose();
  }
  return Polygon(place(local, spec.center, spec.rotation));
}

Polygon make_quad(const QuadSpec& spec) {
  if (spec.width <= 0.0 || spec.height <= 0.0) throw std::invalid_argument("quad: non-positive dimension");
  Points local(4, 2);
  const double hw = 0.5 * spec.width;
  const double hh = 0.5 * spec.height;
  local << -hw, -hh, hw, -hh, hw, hh, -hw, hh;
  return Polygon(place(local, spec.center, spec.rotation));
}

Polygon make_shape(const ShapeSpec& spec) {
  return std::visit(
      [](const auto& s) -> Polygon {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, RibbonSpec>) return make_ribbon(s);
        else return make_quad(s);
      },
      spec);
}

std::vector<Polygon> SynthScene::boundaries() const {
  std::vector<Polygon> out;
  out.reserve(instances.size());
  for (const TextInstance& inst : instances) out.push_back(inst.boundary);
  return out;
}

ProbMap SynthScene::kernel_map() const {
  ProbMap canvas{Eigen::MatrixXf::Zero(height, width), 0, 0};
  for (const TextInstance& inst : instances) inst.prob.paste_max(canvas);
  return canvas;
}

TextInstance make_instance(ShapeKind kind, const Polygon& boundary, const SceneConfig& cfg) {
  const Polygon kernel = offset(boundary, -shrink_margin(boundary, cfg.shrink_ratio));
  const BoundingBox b = bbox(boundary);
  constexpr int pad = 2;
  const int x0 = std::max(0, static_cast<int>(std::floor(b.x0)) - pad);
  const int y0 = std::max(0, static_cast<int>(std::floor(b.y0)) - pad);
  const int x1 = std::min(cfg.width, static_cast<int>(std::ceil(b.x0 + b.width)) + pad);
  const int y1 = std::min(cfg.height, static_cast<int>(std::ceil(b.y0 + b.height)) + pad);
  Points shifted = kernel.vertices();
  shifted.col(0).array() -= x0;
  shifted.col(1).array() -= y0;
  ProbMap prob{rasterize(shifted, x1 - x0, y1 - y0).cast<float>().matrix(), x0, y0};
  return TextInstance{kind, boundary, kernel, std::move(prob)};
}

SynthScene make_scene(int count, const SceneConfig& cfg, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("make_scene: count must be >= 1");
  SynthScene scene;
  scene.width = cfg.width;
  scene.height = cfg.height;
  scene.seed = seed;
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  for (int placed = 0; placed < count; ++placed) {
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !ok; ++attempt) {
      const bool ribbon = uniform(0.0, 1.0) < 0.5;
      const Point center(uniform(0.0, cfg.width), uniform(0.0, cfg.height));
      ShapeSpec spec;
      if (ribbon) {
        RibbonSpec r;
        r.center = center;
        r.rotation = uniform(-0.4, 0.4);
        r.length = uniform(90.0, 160.0);
        r.half_width = uniform(13.0, 22.0);
        r.wavelength = uniform(120.0, 240.0);
        const double k = 2.0 * std::numbers::pi / r.wavelength;
        r.amplitude = uniform(0.0, std::min(25.0, 0.8 / (k * k * r.half_width)));
        spec = r;
      } else {
        QuadSpec q;
        q.center = center;
        q.width = uniform(50.0, 120.0);
        q.height = uniform(26.0, 50.0);
        q.rotation = uniform(-0.5, 0.5);
        spec = q;
      }
      try {
        const Polygon boundary = make_shape(spec);
        const BoundingBox b = bbox(boundary);
        if (b.x0 < cfg.clearance || b.y0 < cfg.clearance || b.x0 + b.width > cfg.width - cfg.clearance ||
            b.y0 + b.height > cfg.height - cfg.clearance)
          continue;
        bool clear = true;
        for (const TextInstance& other : scene.instances) clear = clear && separated(boundary, other.boundary, cfg.clearance);
        if (!clear) continue;
        TextInstance inst = make_instance(ribbon ? ShapeKind::kRibbon : ShapeKind::kQuad, boundary, cfg);
        sample_and_sort(inst.kernel, kDefaultVertices);
        scene.instances.push_back(std::move(inst));
        ok = true;
      } catch (const GeometryError&) {
        continue;
      }
    }
    if (!ok) throw std::runtime_error("make_scene: could not place instance after max attempts");
  }
  return scene;
}

std::vector<SynthScene> make_dataset(int scenes, int instances_per_scene, const SceneConfig& cfg, std::uint64_t seed) {
  if (scenes < 1) throw std::invalid_argument("make_dataset: scene count must be >= 1");
  std::vector<SynthScene> out;
  out.reserve(static_cast<std::size_t>(scenes));
  for (int i = 0; i < scenes; ++i)
    out.push_back(make_scene(instances_per_scene, cfg, derive_seed(seed, static_cast<std::uint64_t>(i))));
  return out;
}

}  // namespace dke
