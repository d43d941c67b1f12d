#pragma once

#include "dke/geometry.hpp"
#include "dke/kernel_stage.hpp"

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

namespace dke {

/// Curved text line: sinusoidal centerline of the given length, thickened by
/// +-half_width along the normal, then rotated and centred.
struct RibbonSpec {
  Point center = Point::Zero();
  double rotation = 0.0;  // radians
  double amplitude = 0.0;
  double wavelength = 100.0;
  double length = 100.0;
  double half_width = 10.0;
  int segments = 24;  // centerline samples per side
};

struct QuadSpec {
  Point center = Point::Zero();
  double width = 100.0;
  double height = 40.0;
  double rotation = 0.0;  // radians
};

using ShapeSpec = std::variant<RibbonSpec, QuadSpec>;

enum class ShapeKind { kRibbon, kQuad };
std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view name);

Polygon make_ribbon(const RibbonSpec& spec);
Polygon make_quad(const QuadSpec& spec);
Polygon make_shape(const ShapeSpec& spec);

struct TextInstance {
  ShapeKind kind = ShapeKind::kQuad;
  Polygon boundary;
  Polygon kernel;
  /// Ideal kernel map, cropped around the instance (see ProbMap::x0/y0).
  ProbMap prob;
};

struct SynthScene {
  int width = 256;
  int height = 256;
  std::uint64_t seed = 0;
  std::vector<TextInstance> instances;

  std::vector<Polygon> boundaries() const;
  /// Full-canvas ideal kernel map.
  ProbMap kernel_map() const;
};

struct SceneConfig {
  int width = 256;
  int height = 256;
  double shrink_ratio = kDefaultShrinkRatio;
  double clearance = 2.0;
  int max_attempts = 1000;
};

/// Builds the instance record (kernel + cropped ideal kernel map) for a boundary.
TextInstance make_instance(ShapeKind kind, const Polygon& boundary, const SceneConfig& cfg);

/// Rejection-samples `count` mutually separated instances.
SynthScene make_scene(int count, const SceneConfig& cfg, std::uint64_t seed);

/// Scene i uses a seed derived from (seed, i), so scenes are independent.
std::vector<SynthScene> make_dataset(int scenes, int instances_per_scene, const SceneConfig& cfg, std::uint64_t seed);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace dke
