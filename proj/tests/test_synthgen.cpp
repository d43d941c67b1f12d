#include "dke/synthgen.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dke;

TEST_CASE("flat ribbon is a rectangle") {
  RibbonSpec spec;
  spec.center = Point(100, 80);
  spec.length = 120;
  spec.half_width = 15;
  spec.amplitude = 0;
  const Polygon p = make_ribbon(spec);
  CHECK(p.size() >= 24);
  CHECK(area(p) == doctest::Approx(120 * 30));
  const BoundingBox b = bbox(p);
  CHECK(b.x0 == doctest::Approx(40));
  CHECK(b.y0 == doctest::Approx(65));
  CHECK(b.width == doctest::Approx(120));
  CHECK(b.height == doctest::Approx(30));
}

TEST_CASE("ribbons are point symmetric about the centerline midpoint") {
  RibbonSpec spec;
  spec.center = Point(128, 128);
  spec.rotation = 0.3;
  spec.amplitude = 12;
  spec.wavelength = 160;
  spec.length = 140;
  spec.half_width = 16;
  const Polygon p = make_ribbon(spec);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Point mirrored = 2.0 * spec.center - p.vertex(i);
    double nearest = 1e9;
    for (Eigen::Index j = 0; j < p.size(); ++j) nearest = std::min(nearest, (p.vertex(j) - mirrored).norm());
    CHECK(nearest < 1e-6);
  }
}

TEST_CASE("ribbon spec that folds over itself is rejected") {
  RibbonSpec spec;
  spec.amplitude = 40;
  spec.wavelength = 60;
  spec.half_width = 20;
  CHECK_THROWS_AS(make_ribbon(spec), GeometryError);
}

TEST_CASE("random valid ribbons and quads are simple") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    RibbonSpec r;
    r.rotation = u(rng) * 6.28;
    r.length = 60 + 140 * u(rng);
    r.half_width = 8 + 20 * u(rng);
    r.wavelength = 80 + 200 * u(rng);
    const double k = 2 * M_PI / r.wavelength;
    r.amplitude = u(rng) * 0.95 / (k * k * r.half_width);
    CHECK(is_simple(make_ribbon(r).vertices()));
    QuadSpec q{Point(0, 0), 20 + 100 * u(rng), 10 + 50 * u(rng), u(rng) * 6.28};
    const Polygon quad = make_quad(q);
    CHECK(area(quad) == doctest::Approx(q.width * q.height));
  }
}

TEST_CASE("shape kind names") {
  CHECK(to_string(ShapeKind::kRibbon) == "ribbon");
  CHECK(parse_shape_kind("quad") == ShapeKind::kQuad);
  CHECK_THROWS(parse_shape_kind("circle"));
}

TEST_CASE("make_scene is deterministic and honours the count") {
  const SceneConfig cfg;
  const SynthScene a = make_scene(3, cfg, 42);
  const SynthScene b = make_scene(3, cfg, 42);
  REQUIRE(a.instances.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.instances[i].boundary == b.instances[i].boundary);
    CHECK(a.instances[i].kernel == b.instances[i].kernel);
    CHECK(a.instances[i].prob.values == b.instances[i].prob.values);
  }
  CHECK(make_scene(1, cfg, 1).instances.size() == 1);
  CHECK(a.width == 256);
  CHECK(a.height == 256);
  CHECK_THROWS(make_scene(0, cfg, 1));
  CHECK_THROWS(make_scene(60, cfg, 1));
}

TEST_CASE("generated datasets satisfy the scene invariants") {
  const SceneConfig cfg;
  const auto scenes = make_dataset(100, 3, cfg, 7);
  REQUIRE(scenes.size() == 100);
  for (const SynthScene& s : scenes) {
    REQUIRE(s.instances.size() == 3);
    for (std::size_t i = 0; i < s.instances.size(); ++i) {
      const TextInstance& inst = s.instances[i];
      CHECK(is_simple(inst.boundary.vertices()));
      const BoundingBox b = bbox(inst.boundary);
      CHECK(b.x0 >= 0.0);
      CHECK(b.y0 >= 0.0);
      CHECK(b.x0 + b.width <= s.width);
      CHECK(b.y0 + b.height <= s.height);
      const Polygon expected = offset(inst.boundary, -shrink_margin(inst.boundary, 0.4));
      CHECK(inst.kernel == expected);
      CHECK(sample_and_sort(inst.kernel, 128).size() == 128);
      for (std::size_t j = i + 1; j < s.instances.size(); ++j)
        CHECK(polygon_iou(inst.boundary, s.instances[j].boundary) == 0.0);
    }
  }
}

TEST_CASE("ideal kernel map matches the kernel raster") {
  const SynthScene s = make_scene(2, SceneConfig{}, 5);
  const ProbMap full = s.kernel_map();
  CHECK(full.width() == 256);
  CHECK(full.height() == 256);
  BinaryMask expected = BinaryMask::Constant(256, 256, false);
  for (const TextInstance& inst : s.instances) expected = expected || rasterize(inst.kernel.vertices(), 256, 256);
  CHECK((full.values.array() > 0.5f).cast<bool>().matrix() == expected.matrix());
}

TEST_CASE("scene seeds are independent of dataset size") {
  const SceneConfig cfg;
  const auto small = make_dataset(2, 2, cfg, 9);
  const auto large = make_dataset(5, 2, cfg, 9);
  CHECK(small[1].seed == large[1].seed);
  CHECK(small[1].instances[0].boundary == large[1].instances[0].boundary);
  CHECK(derive_seed(9, 0) != derive_seed(9, 1));
}
