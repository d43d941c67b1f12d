#pragma once

#include "dke/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dke {

/// Desk-scale stand-in for the backbone's contextual feature map: a single
/// channel in [0, 1] sampled bilinearly at sub-pixel vertex positions.
/// Cell (row y, col x) is the value at pixel centre (x + 0.5, y + 0.5).
struct SurrogateFeatureField {
  Eigen::MatrixXf prob;

  int width() const { return static_cast<int>(prob.cols()); }
  int height() const { return static_cast<int>(prob.rows()); }

  /// Bilinear sample; coordinates outside the map clamp to the border.
  double sample(double x, double y) const;
};

/// Text-evidence field for a set of boundaries: for pixels inside a boundary,
/// min(1, distance to that boundary / scale); zero elsewhere.
SurrogateFeatureField make_feature_field(int width, int height, const std::vector<Polygon>& boundaries,
                                         double scale = 24.0);

inline constexpr int kFeatureChannels = 8;
inline constexpr double kRingRadius = 2.0;

/// N x C per-vertex features. Channel layout: field at the vertex, field at
/// +x, -x, +y, -y ring offsets, x and y relative to the box, arc position i/N.
using VertexFeatures = Eigen::MatrixXd;

/// Per-vertex (dx, dy) offsets in pixels.
using OffsetField = Points;

VertexFeatures featurize(const Contour& c, const SurrogateFeatureField& f, const BoundingBox& box);

struct NetShape {
  int in_channels = kFeatureChannels;
  int hidden = 64;
  int depth = 4;
  int kernel = 9;
};

/// 1-D convolution over the vertex index with wrap-around.
/// weight is (kernel * in) x out, tap-major: rows [t * in, (t + 1) * in) hold
/// tap t, which reads vertex (i + t - kernel / 2) mod N.
struct CircularConv {
  Eigen::MatrixXd weight;
  Eigen::RowVectorXd bias;
  int kernel = 9;
  bool residual = false;

  int in_channels() const { return static_cast<int>(weight.rows()) / kernel; }
  int out_channels() const { return static_cast<int>(weight.cols()); }
};

/// Contour deformation regressor: circular conv + ReLU blocks (residual where
/// widths agree) and a per-vertex linear head producing 2 offsets.
struct DeformNet {
  NetShape shape;
  std::vector<CircularConv> layers;
  Eigen::MatrixXd head_weight;  // hidden x 2
  Eigen::RowVector2d head_bias = Eigen::RowVector2d::Zero();
  std::uint64_t seed = 0;

  /// Uniform in +-1/sqrt(fan_in) for weights and biases.
  static DeformNet init(const NetShape& shape, std::uint64_t seed);
  static DeformNet zeros(const NetShape& shape);

  Eigen::Index num_params() const;
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& params);
};

/// Activations kept for the backward pass.
struct ForwardCache {
  int contour_length = 0;
  std::vector<Eigen::MatrixXd> inputs;   // input of each conv layer
  std::vector<Eigen::MatrixXd> columns;  // unrolled conv inputs
  std::vector<Eigen::MatrixXd> pre_act;  // conv outputs before ReLU
  Eigen::MatrixXd head_input;
};

/// Offsets for one contour (rows of `u`) or for a stack of equal-length
/// contours when `contour_length` divides u.rows().
OffsetField forward(const DeformNet& net, const VertexFeatures& u, ForwardCache* cache = nullptr,
                    int contour_length = 0);

struct Gradients {
  DeformNet params;
  Eigen::MatrixXd inputs;
};

Gradients backward(const DeformNet& net, const ForwardCache& cache, const OffsetField& upstream);

/// Element-wise P + dG; vertex order is preserved.
Contour expand(const Contour& c, const OffsetField& offsets);

}  // namespace dke
