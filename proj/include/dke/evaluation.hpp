#pragma once

#include "dke/assignment.hpp"
#include "dke/geometry.hpp"
#include "dke/synthgen.hpp"
#include "dke/training.hpp"

#include <map>
#include <string>
#include <vector>

namespace dke {

struct SceneCounts {
  int matched = 0;
  int missed = 0;
  int spurious = 0;
};

/// Precision, recall and F-measure are percentages.
struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::vector<SceneCounts> per_scene;
  double mean_iou_of_matches = 0.0;

  int matched() const;
  int missed() const;
  int spurious() const;

  static EvalReport from_counts(std::vector<SceneCounts> per_scene, double iou_sum = 0.0);
};

/// Harmonic mean, 0 when both inputs are 0.
double f_measure(double precision, double recall);

struct SceneMatch {
  SceneCounts counts;
  std::vector<std::pair<int, int>> pairs;  // (pred, gt)
  double iou_sum = 0.0;
};

/// Greedy one-to-one matching in descending IoU order; pairs at or above the
/// threshold count as matches.
SceneMatch match_scene(const std::vector<Polygon>& preds, const std::vector<Polygon>& gts, double iou_threshold,
                       int supersample = 4);

EvalReport evaluate(const std::vector<Polygon>& preds, const std::vector<Polygon>& gts, double iou_threshold = 0.5);
EvalReport evaluate_scenes(const std::vector<std::vector<Polygon>>& preds, const std::vector<std::vector<Polygon>>& gts,
                           double iou_threshold = 0.5);

/// Margin m such that growing the kernel by m and shrinking the result with
/// `ratio` gives m back. Exact for polygons whose offset is exactly invertible.
double unclip_margin(const Polygon& kernel, double ratio);

/// Learning-free kernel expansion used as the ablation baseline.
Polygon fixed_expand_baseline(const Polygon& kernel, double margin);

struct AblationConfig {
  InferConfig infer;
  double shrink_ratio = kDefaultShrinkRatio;
  double kernel_noise = 2.0;
  std::uint64_t noise_seed = 11;
  double iou_threshold = 0.5;
  double feature_scale = 24.0;
  std::vector<int> iterations{1, 2};
};

/// Segmentation-oracle kernel map for a scene: per-instance noisy kernels,
/// combined by maximum.
ProbMap scene_kernel_map(const SynthScene& scene, double shrink_ratio, double noise, std::uint64_t seed);

struct AblationRow {
  std::string method;
  int iterations = 1;
  EvalReport report;
};

/// Rows: baseline, DCE+DML, DCE+NNML, DCE+OBGML, for every iteration count.
/// Throws when a net for a requested loss kind is missing.
std::vector<AblationRow> run_ablation(const std::vector<SynthScene>& scenes, const std::map<LossKind, DeformNet>& nets,
                                      const AblationConfig& cfg);

/// Row label of a DCE method, e.g. "DCE+OBGML".
std::string ablation_method_name(LossKind k);

std::string format_ablation(const std::vector<AblationRow>& rows);

struct TimingReport {
  double scenes_per_second = 0.0;
  double total_ms = 0.0;  // per scene
  StageTimes stages;      // per scene
};

/// Single-threaded, batch 1. One warm-up pass, then the median over
/// `repetitions` timed passes.
TimingReport benchmark(const DeformNet& net, const std::vector<SynthScene>& scenes, const AblationConfig& cfg,
                       int repetitions);

}  // namespace dke
