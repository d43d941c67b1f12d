#pragma once

#include "dke/assignment.hpp"
#include "dke/deform_net.hpp"
#include "dke/geometry.hpp"
#include "dke/synthgen.hpp"

#include <string>
#include <vector>

namespace dke {

/// Matching arrow from a predicted vertex to the labeled vertex it is paired with.
struct Arrow {
  Point from;
  Point to;
};

struct SvgScene {
  int width = 256;
  int height = 256;
  std::vector<Polygon> ground_truth;
  std::vector<Contour> kernels;
  std::vector<Contour> predicted;
  std::vector<Contour> labeled;
  std::vector<Arrow> arrows;
};

/// Layers bottom to top: GT boundary, kernel, labeled vertices (yellow),
/// predicted contour (green), arrows. Numbers use a fixed format so equal
/// inputs give equal bytes.
std::string render_svg(const SvgScene& scene);

/// Expands each GT kernel with `net` and pairs the result with the sampled
/// boundary under `kind`. One arrow per predicted vertex.
SvgScene visualize_scene(const SynthScene& scene, const DeformNet& net, LossKind kind, int n_vertices,
                         int iterations, double feature_scale = 24.0);

}  // namespace dke
