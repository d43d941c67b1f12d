#pragma once

#include "dke/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dke {

/// Probability grid, row = y. (x0, y0) places the grid on the canvas, so a
/// map cropped around one instance keeps its canvas position.
struct ProbMap {
  Eigen::MatrixXf values;
  int x0 = 0;
  int y0 = 0;

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }

  /// Pastes onto a full canvas, taking the cell-wise maximum.
  void paste_max(ProbMap& canvas) const;
};

using BinaryMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MiningMask {
  BinaryMask selected;
  int positives = 0;
  int negatives = 0;
};

struct SegmentationLoss {
  double value = 0.0;
  Eigen::MatrixXd grad;  // d value / d pred, zero outside the mining mask
  MiningMask mask;
};

inline constexpr double kProbClamp = 1e-7;
inline constexpr int kNegativeRatio = 3;

/// Mining mask: every positive plus the kNegativeRatio * positives negatives
/// with the highest loss, ties broken by row-major index.
MiningMask mine_hard_negatives(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

/// Summed binary cross-entropy over the mined pixel set.
SegmentationLoss bce_ohem_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

/// Same loss with the mining mask held fixed.
SegmentationLoss bce_masked(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, const MiningMask& mask);

BinaryMask binarize(const ProbMap& pred, double threshold = 0.5);

/// Pixel (x, y) is set when its centre (x + 0.5, y + 0.5) lies inside `ring`.
BinaryMask rasterize(const Points& ring, int width, int height);

/// Outer boundaries of the 8-connected foreground components, traced along
/// pixel edges and returned clockwise on screen. Components whose polygon area
/// is below `min_area` are dropped.
std::vector<Polygon> extract_kernels(const BinaryMask& mask, double min_area = 4.0);

/// Stand-in for the segmentation head: the shrunken kernel of `boundary`
/// with its outline displaced by smooth seeded Gaussian noise, rasterized and,
/// for noise > 0, box-blurred into soft probabilities.
ProbMap noisy_kernel_oracle(const Polygon& boundary, const ShrinkParams& shrink, double noise_px, std::uint64_t seed,
                            int width, int height);

}  // namespace dke
