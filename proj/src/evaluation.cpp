#include "dke/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dke {

int EvalReport::matched() const {
  int t = 0;
  for (const SceneCounts& s : per_scene) t += s.matched;
  return t;
}

int EvalReport::missed() const {
  int t = 0;
  for (const SceneCounts& s : per_scene) t += s.missed;
  return t;
}

int EvalReport::spurious() const {
  int t = 0;
  for (const SceneCounts& s : per_scene) t += s.spurious;
  return t;
}

double f_measure(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport EvalReport::from_counts(std::vector<SceneCounts> per_scene, double iou_sum) {
  EvalReport r;
  r.per_scene = std::move(per_scene);
  const int m = r.matched();
  const int preds = m + r.spurious();
  const int gts = m + r.missed();
  // Nothing predicted and nothing to find counts as perfect.
  r.precision = preds > 0 ? 100.0 * m / preds : (gts == 0 ? 100.0 : 0.0);
  r.recall = gts > 0 ? 100.0 * m / gts : (preds == 0 ? 100.0 : 0.0);
  r.f_measure = dke::f_measure(r.precision, r.recall);
  r.mean_iou_of_matches = m > 0 ? iou_sum / m : 0.0;
  return r;
}

SceneMatch match_scene(const std::vector<Polygon>& preds, const std::vector<Polygon>& gts, double iou_threshold,
                       int supersample) {
  struct Candidate {
    double iou;
    int pred;
    int gt;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const double iou = polygon_iou(preds[i], gts[j], supersample);
      if (iou >= iou_threshold && iou > 0.0) candidates.push_back({iou, static_cast<int>(i), static_cast<int>(j)});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  std::vector<char> pred_used(preds.size(), 0);
  std::vector<char> gt_used(gts.size(), 0);
  SceneMatch out;
  for (const Candidate& c : candidates) {
    if (pred_used[static_cast<std::size_t>(c.pred)] || gt_used[static_cast<std::size_t>(c.gt)]) continue;
    pred_used[static_cast<std::size_t>(c.pred)] = 1;
    gt_used[static_cast<std::size_t>(c.gt)] = 1;
    out.pairs.emplace_back(c.pred, c.gt);
    out.iou_sum += c.iou;
  }
  out.counts.matched = static_cast<int>(out.pairs.size());
  out.counts.spurious = static_cast<int>(preds.size()) - out.counts.matched;
  out.counts.missed = static_cast<int>(gts.size()) - out.counts.matched;
  return out;
}

EvalReport evaluate(const std::vector<Polygon>& preds, const std::vector<Polygon>& gts, double iou_threshold) {
  const SceneMatch m = match_scene(preds, gts, iou_threshold);
  return EvalReport::from_counts({m.counts}, m.iou_sum);
}

EvalReport evaluate_scenes(const std::vector<std::vector<Polygon>>& preds, const std::vector<std::vector<Polygon>>& gts,
                           double iou_threshold) {
  if (preds.size() != gts.size()) throw std::invalid_argument("evaluate: scene count mismatch");
  std::vector<SceneCounts> counts;
  double iou_sum = 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const SceneMatch m = match_scene(preds[s], gts[s], iou_threshold);
    counts.push_back(m.counts);
    iou_sum += m.iou_sum;
  }
  return EvalReport::from_counts(std::move(counts), iou_sum);
}

double unclip_margin(const Polygon& kernel, double ratio) {
  auto residual = [&](double m) { return shrink_margin(offset(kernel, m), ratio) - m; };
  double lo = 0.0;
  double hi = std::max(1.0, 2.0 * shrink_margin(kernel, ratio));
  int guard = 0;
  while (residual(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60) throw GeometryError("unclip_margin: no root");
  }
  for (int it = 0; it < 100 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

Polygon fixed_expand_baseline(const Polygon& kernel, double margin) {
  if (margin < 0.0) throw std::invalid_argument("baseline expansion margin must be non-negative");
  return offset(kernel, margin);
}

ProbMap scene_kernel_map(const SynthScene& scene, double shrink_ratio, double noise, std::uint64_t seed) {
  ProbMap canvas{Eigen::MatrixXf::Zero(scene.height, scene.width), 0, 0};
  for (std::size_t i = 0; i < scene.instances.size(); ++i) {
    const Polygon& boundary = scene.instances[i].boundary;
    const ProbMap m = noisy_kernel_oracle(boundary, ShrinkParams::derive(boundary, shrink_ratio), noise,
                                          derive_seed(seed ^ scene.seed, i), scene.width, scene.height);
    m.paste_max(canvas);
  }
  return canvas;
}

namespace {

struct PreparedScene {
  std::vector<Polygon> gts;
  std::vector<Polygon> kernels;
  std::vector<Contour> starts;
  SurrogateFeatureField field;
};

PreparedScene prepare(const SynthScene& scene, const AblationConfig& cfg) {
  PreparedScene p;
  p.gts = scene.boundaries();
  const ProbMap kmap = scene_kernel_map(scene, cfg.shrink_ratio, cfg.kernel_noise, cfg.noise_seed);
  p.kernels = extract_kernels(binarize(kmap, cfg.infer.threshold), cfg.infer.min_area);
  for (const Polygon& k : p.kernels) p.starts.push_back(sample_and_sort(k, cfg.infer.n_vertices));
  p.field = make_feature_field(scene.width, scene.height, p.gts, cfg.feature_scale);
  return p;
}

}  // namespace

std::string ablation_method_name(LossKind k) {
  switch (k) {
    case LossKind::kDml: return "DCE+DML";
    case LossKind::kNnml: return "DCE+NNML";
    case LossKind::kObgml: return "DCE+OBGML";
  }
  return "?";
}

std::vector<AblationRow> run_ablation(const std::vector<SynthScene>& scenes, const std::map<LossKind, DeformNet>& nets,
                                      const AblationConfig& cfg) {
  const std::vector<LossKind> kinds{LossKind::kDml, LossKind::kNnml, LossKind::kObgml};
  for (LossKind k : kinds) {
    if (nets.find(k) == nets.end())
      throw std::invalid_argument("run_ablation: missing net for " + std::string(to_string(k)));
  }
  std::vector<PreparedScene> prepared;
  prepared.reserve(scenes.size());
  for (const SynthScene& s : scenes) prepared.push_back(prepare(s, cfg));

  std::vector<std::vector<Polygon>> gts;
  for (const PreparedScene& p : prepared) gts.push_back(p.gts);

  std::vector<std::vector<Polygon>> baseline;
  for (const PreparedScene& p : prepared) {
    std::vector<Polygon> preds;
    for (const Polygon& k : p.kernels) {
      try {
        preds.push_back(fixed_expand_baseline(k, unclip_margin(k, cfg.shrink_ratio)));
      } catch (const GeometryError&) {
        preds.push_back(k);
      }
    }
    baseline.push_back(std::move(preds));
  }
  const EvalReport baseline_report = evaluate_scenes(baseline, gts, cfg.iou_threshold);

  std::vector<AblationRow> rows;
  for (int iterations : cfg.iterations) {
    rows.push_back({"Baseline", iterations, baseline_report});
    for (LossKind k : kinds) {
      const DeformNet& net = nets.at(k);
      std::vector<std::vector<Polygon>> preds;
      for (const PreparedScene& p : prepared) {
        std::vector<Polygon> scene_preds;
        for (const Contour& start : p.starts) {
          const Contour c = deform_contour(net, start, p.field, iterations);
          try {
            scene_preds.push_back(Polygon::unchecked(c.points));
          } catch (const GeometryError&) {
          }
        }
        preds.push_back(std::move(scene_preds));
      }
      rows.push_back({ablation_method_name(k), iterations, evaluate_scenes(preds, gts, cfg.iou_threshold)});
    }
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %5s %7s %7s %7s %9s\n", "Method", "Iter", "P", "R", "F", "MeanIoU");
  os << line;
  for (const AblationRow& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %5d %7.1f %7.1f %7.1f %9.3f\n", r.method.c_str(), r.iterations,
                  r.report.precision, r.report.recall, r.report.f_measure, r.report.mean_iou_of_matches);
    os << line;
  }
  return os.str();
}

TimingReport benchmark(const DeformNet& net, const std::vector<SynthScene>& scenes, const AblationConfig& cfg,
                       int repetitions) {
  if (repetitions < 3) throw std::invalid_argument("benchmark: repetitions must be >= 3");
  if (scenes.empty()) throw std::invalid_argument("benchmark: empty dataset");
  using Clock = std::chrono::steady_clock;

  std::vector<ProbMap> maps;
  std::vector<SurrogateFeatureField> fields;
  for (const SynthScene& s : scenes) {
    maps.push_back(scene_kernel_map(s, cfg.shrink_ratio, cfg.kernel_noise, cfg.noise_seed));
    fields.push_back(make_feature_field(s.width, s.height, s.boundaries(), cfg.feature_scale));
  }

  struct Pass {
    double total_ms;
    StageTimes stages;
  };
  auto run_pass = [&]() {
    Pass p{0.0, {}};
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < scenes.size(); ++i) infer(net, maps[i], fields[i], cfg.infer, &p.stages);
    p.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    return p;
  };

  run_pass();
  std::vector<Pass> passes;
  for (int r = 0; r < repetitions; ++r) passes.push_back(run_pass());
  std::sort(passes.begin(), passes.end(), [](const Pass& a, const Pass& b) { return a.total_ms < b.total_ms; });
  const Pass& median = passes[passes.size() / 2];

  const double n = static_cast<double>(scenes.size());
  TimingReport out;
  out.total_ms = median.total_ms / n;
  out.scenes_per_second = out.total_ms > 0.0 ? 1000.0 / out.total_ms : 0.0;
  out.stages.kernel_ms = median.stages.kernel_ms / n;
  out.stages.featurize_ms = median.stages.featurize_ms / n;
  out.stages.forward_ms = median.stages.forward_ms / n;
  out.stages.expand_ms = median.stages.expand_ms / n;
  return out;
}

}  // namespace dke
