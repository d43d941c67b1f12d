#pragma once

#include "dke/assignment.hpp"
#include "dke/deform_net.hpp"
#include "dke/kernel_stage.hpp"
#include "dke/synthgen.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace dke {

struct TrainConfig {
  double lr0 = 2e-4;
  double poly_power = 0.9;
  double lambda = 0.25;
  int batch_size = 8;
  int max_steps = 2000;
  double shrink_ratio = kDefaultShrinkRatio;
  int n_vertices = kDefaultVertices;
  int dce_iterations = 1;
  LossKind loss_kind = LossKind::kObgml;
  std::uint64_t seed = 1;
  NetShape shape;
  double feature_scale = 24.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

/// lr0 * (1 - step / max_steps)^power.
double poly_lr(int step, int max_steps, const TrainConfig& cfg);

/// Weighted sum L_s + lambda * L_r.
inline double joint_loss(double segmentation, double regression, double lambda) {
  return segmentation + lambda * regression;
}

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  static AdamState zeros(Eigen::Index size);
};

/// One bias-corrected Adam update. Throws on non-finite gradients.
void adam_step(DeformNet& net, const DeformNet& grads, AdamState& state, double lr, const TrainConfig& cfg);

/// Kernel contour, its features and the boundary contour it should expand to.
struct TrainSample {
  Contour kernel;
  Contour target;
  VertexFeatures features;
};

std::vector<TrainSample> build_samples(const std::vector<SynthScene>& scenes, const TrainConfig& cfg);

struct TrainReport {
  std::vector<double> loss_history;
  bool diverged = false;
  int steps_run = 0;
};

/// Everything needed to continue a run bit-for-bit.
struct TrainState {
  DeformNet net;
  AdamState adam;
  std::mt19937_64 rng;
  int step = 0;
  std::vector<double> loss_history;

  static TrainState fresh(const TrainConfig& cfg);
};

/// Advances `state` until it reaches cfg.max_steps (or `stop_at` if smaller).
TrainReport train_steps(TrainState& state, const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                        int stop_at = -1);

struct TrainResult {
  DeformNet net;
  TrainReport report;
};

TrainResult train(const std::vector<SynthScene>& dataset, const TrainConfig& cfg);

struct InferConfig {
  int n_vertices = kDefaultVertices;
  int dce_iterations = 1;
  double threshold = 0.5;
  double min_area = 4.0;
};

struct StageTimes {
  double kernel_ms = 0.0;
  double featurize_ms = 0.0;
  double forward_ms = 0.0;
  double expand_ms = 0.0;
};

/// Runs the DCE stage on one contour, re-sampling between iterations.
Contour deform_contour(const DeformNet& net, const Contour& kernel, const SurrogateFeatureField& field,
                       int iterations, StageTimes* times = nullptr);

/// Kernel map -> kernels -> expanded N-gons.
std::vector<Polygon> infer(const DeformNet& net, const ProbMap& kernel_map, const SurrogateFeatureField& field,
                           const InferConfig& cfg, StageTimes* times = nullptr);

/// Mean of the two directed vertex-to-boundary distances between a predicted
/// contour and a target polygon sampled with the same vertex count.
double boundary_error(const Contour& pred, const Polygon& target);

/// boundary_error averaged over every instance, expanding the GT kernels.
double mean_boundary_error(const DeformNet& net, const std::vector<SynthScene>& scenes, const TrainConfig& cfg);

}  // namespace dke
