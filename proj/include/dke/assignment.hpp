#pragma once

#include "dke/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dke {

/// Vertex-pairing strategy used by a contour deformation loss.
enum class LossKind { kDml, kNnml, kObgml };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

using CostMatrix = Eigen::MatrixXd;

/// cost(i, j) = squared distance between predicted vertex i and target vertex j.
template <typename DerivedPred, typename DerivedTarget>
Eigen::Matrix<typename DerivedPred::Scalar, Eigen::Dynamic, Eigen::Dynamic> cost_matrix(
    const Eigen::MatrixBase<DerivedPred>& pred, const Eigen::MatrixBase<DerivedTarget>& target) {
  using Scalar = typename DerivedPred::Scalar;
  if (pred.rows() != target.rows() || pred.cols() != 2 || target.cols() != 2)
    throw std::invalid_argument("cost_matrix: contours must both be N x 2");
  // |p|^2 + |g|^2 - 2 p.g loses precision for nearby points; expand directly.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(pred.rows(), target.rows());
  for (Eigen::Index j = 0; j < target.rows(); ++j) {
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const Scalar dx = pred(i, 0) - target(j, 0);
      const Scalar dy = pred(i, 1) - target(j, 1);
      m(i, j) = dx * dx + dy * dy;
    }
  }
  return m;
}

inline CostMatrix cost_matrix(const Contour& pred, const Contour& target) {
  return cost_matrix(pred.points, target.points);
}

struct Assignment {
  /// (pred_index, target_index), sorted by pred_index.
  std::vector<std::pair<int, int>> pairs;
  double total_cost = 0.0;

  std::vector<int> target_of() const;
};

/// Minimum-cost perfect matching, O(n^3). Among optimal matchings the one with
/// the lexicographically smallest target sequence is returned.
Assignment hungarian(const CostMatrix& m);

/// Row-wise argmin with the lowest column index on ties.
std::vector<int> nearest_matching(const CostMatrix& m);

/// Smooth-L1 with transition at |d| = 1.
template <typename Scalar>
Scalar smooth_l1(Scalar d) {
  const Scalar a = std::abs(d);
  return a < Scalar(1) ? Scalar(0.5) * d * d : a - Scalar(0.5);
}

template <typename Scalar>
Scalar smooth_l1_grad(Scalar d) {
  if (std::abs(d) < Scalar(1)) return d;
  return d > Scalar(0) ? Scalar(1) : Scalar(-1);
}

struct LossValue {
  double value = 0.0;
  /// d value / d predicted vertex coordinates, N x 2.
  Points grad;
  /// Target vertex each predicted vertex was paired with.
  std::vector<int> target_of;
};

/// Mean over vertices of the per-coordinate smooth-L1 sum against the paired
/// target vertex. The pairing is held fixed for the gradient.
LossValue paired_smooth_l1(const Contour& pred, const Contour& target, std::vector<int> target_of);

LossValue dml_loss(const Contour& pred, const Contour& target);
LossValue nnml_loss(const Contour& pred, const Contour& target);
LossValue obgml_loss(const Contour& pred, const Contour& target);
LossValue contour_loss(LossKind kind, const Contour& pred, const Contour& target);

/// Pairing only, as used by the loss of the given kind.
std::vector<int> match_vertices(LossKind kind, const Contour& pred, const Contour& target);

}  // namespace dke
