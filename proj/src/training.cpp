#include "dke/training.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dke {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (dce_iterations < 1) throw std::invalid_argument("dce_iterations must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  if (n_vertices < 4) throw std::invalid_argument("n_vertices must be >= 4");
  if (!(shrink_ratio > 0.0 && shrink_ratio < 1.0)) throw std::invalid_argument("shrink_ratio must lie in (0, 1)");
}

double poly_lr(int step, int max_steps, const TrainConfig& cfg) {
  if (max_steps <= 0) throw std::invalid_argument("poly_lr: max_steps must be positive");
  if (step < 0 || step > max_steps) throw std::invalid_argument("poly_lr: step out of range");
  return cfg.lr0 * std::pow(1.0 - static_cast<double>(step) / max_steps, cfg.poly_power);
}

AdamState AdamState::zeros(Eigen::Index size) {
  return AdamState{Eigen::VectorXd::Zero(size), Eigen::VectorXd::Zero(size), 0};
}

void adam_step(DeformNet& net, const DeformNet& grads, AdamState& state, double lr, const TrainConfig& cfg) {
  const Eigen::VectorXd g = grads.flat();
  if (g.size() != state.m.size() || g.size() != net.num_params())
    throw std::invalid_argument("adam_step: state does not match the network");
  if (!g.allFinite()) throw std::invalid_argument("adam_step: non-finite gradient");
  ++state.step;
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * g;
  state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  const Eigen::VectorXd update =
      ((state.m / c1).array() / ((state.v / c2).array().sqrt() + cfg.adam_eps)).matrix();
  net.set_flat(net.flat() - lr * update);
}

std::vector<TrainSample> build_samples(const std::vector<SynthScene>& scenes, const TrainConfig& cfg) {
  std::vector<TrainSample> out;
  for (const SynthScene& scene : scenes) {
    const SurrogateFeatureField field =
        make_feature_field(scene.width, scene.height, scene.boundaries(), cfg.feature_scale);
    for (const TextInstance& inst : scene.instances) {
      Contour kernel = sample_and_sort(inst.kernel, cfg.n_vertices);
      Contour target = sample_and_sort(inst.boundary, cfg.n_vertices);
      VertexFeatures u = featurize(kernel, field, bbox(kernel.points));
      out.push_back(TrainSample{std::move(kernel), std::move(target), std::move(u)});
    }
  }
  return out;
}

TrainState TrainState::fresh(const TrainConfig& cfg) {
  DeformNet net = DeformNet::init(cfg.shape, cfg.seed);
  AdamState adam = AdamState::zeros(net.num_params());
  return TrainState{std::move(net), std::move(adam), std::mt19937_64(derive_seed(cfg.seed, 0xBA7C4)), 0, {}};
}

TrainReport train_steps(TrainState& state, const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                        int stop_at) {
  cfg.validate();
  TrainReport report;
  const int limit = stop_at >= 0 ? std::min(stop_at, cfg.max_steps) : cfg.max_steps;
  if (state.step < limit && samples.empty()) throw std::invalid_argument("train: empty dataset");

  const int n = cfg.n_vertices;
  const int batch = cfg.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, samples.empty() ? 0 : samples.size() - 1);
  VertexFeatures stacked(static_cast<Eigen::Index>(batch) * n, cfg.shape.in_channels);
  OffsetField upstream(static_cast<Eigen::Index>(batch) * n, 2);
  std::vector<std::size_t> chosen(static_cast<std::size_t>(batch));
  ForwardCache cache;

  while (state.step < limit) {
    for (int b = 0; b < batch; ++b) {
      chosen[static_cast<std::size_t>(b)] = pick(state.rng);
      stacked.middleRows(static_cast<Eigen::Index>(b) * n, n) = samples[chosen[static_cast<std::size_t>(b)]].features;
    }
    const OffsetField offsets = forward(state.net, stacked, &cache, n);
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
      const TrainSample& s = samples[chosen[static_cast<std::size_t>(b)]];
      const Contour pred = expand(s.kernel, offsets.middleRows(static_cast<Eigen::Index>(b) * n, n));
      const LossValue loss = contour_loss(cfg.loss_kind, pred, s.target);
      total += loss.value;
      upstream.middleRows(static_cast<Eigen::Index>(b) * n, n) = loss.grad / batch;
    }
    const double mean = total / batch;
    if (!std::isfinite(mean)) {
      report.diverged = true;
      break;
    }
    const Gradients grads = backward(state.net, cache, upstream);
    adam_step(state.net, grads.params, state.adam, poly_lr(state.step, cfg.max_steps, cfg), cfg);
    state.loss_history.push_back(mean);
    ++state.step;
    ++report.steps_run;
  }
  report.loss_history = state.loss_history;
  return report;
}

TrainResult train(const std::vector<SynthScene>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const std::vector<TrainSample> samples = build_samples(dataset, cfg);
  TrainState state = TrainState::fresh(cfg);
  TrainReport report = train_steps(state, samples, cfg);
  return TrainResult{std::move(state.net), std::move(report)};
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

Contour deform_contour(const DeformNet& net, const Contour& kernel, const SurrogateFeatureField& field, int iterations,
                       StageTimes* times) {
  Contour c = kernel;
  for (int it = 0; it < iterations; ++it) {
    auto t0 = Clock::now();
    if (it > 0) {
      try {
        c = sample_and_sort(Polygon::unchecked(c.points), static_cast<int>(kernel.size()));
      } catch (const GeometryError&) {
        // Degenerate prediction; keep the unsorted contour.
      }
    }
    const VertexFeatures u = featurize(c, field, bbox(c.points));
    if (times != nullptr) times->featurize_ms += ms_since(t0);
    t0 = Clock::now();
    const OffsetField off = forward(net, u);
    if (times != nullptr) times->forward_ms += ms_since(t0);
    t0 = Clock::now();
    c = expand(c, off);
    if (times != nullptr) times->expand_ms += ms_since(t0);
  }
  return c;
}

std::vector<Polygon> infer(const DeformNet& net, const ProbMap& kernel_map, const SurrogateFeatureField& field,
                           const InferConfig& cfg, StageTimes* times) {
  auto t0 = Clock::now();
  const std::vector<Polygon> kernels = extract_kernels(binarize(kernel_map, cfg.threshold), cfg.min_area);
  std::vector<Contour> starts;
  starts.reserve(kernels.size());
  for (const Polygon& k : kernels) starts.push_back(sample_and_sort(k, cfg.n_vertices));
  if (times != nullptr) times->kernel_ms += ms_since(t0);

  std::vector<Polygon> out;
  out.reserve(kernels.size());
  for (const Contour& start : starts) {
    const Contour c = deform_contour(net, start, field, cfg.dce_iterations, times);
    try {
      out.push_back(Polygon::unchecked(c.points));
    } catch (const GeometryError&) {
      // Collapsed to fewer than three distinct vertices.
    }
  }
  return out;
}

double boundary_error(const Contour& pred, const Polygon& target) {
  const Contour g = sample_and_sort(target, static_cast<int>(pred.size()));
  double forward_sum = 0.0;
  double backward_sum = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    forward_sum += distance_to_boundary(target.vertices(), pred[i]);
    backward_sum += distance_to_boundary(pred.points, g[i]);
  }
  const double n = static_cast<double>(pred.size());
  return 0.5 * (forward_sum / n + backward_sum / n);
}

double mean_boundary_error(const DeformNet& net, const std::vector<SynthScene>& scenes, const TrainConfig& cfg) {
  double sum = 0.0;
  int count = 0;
  for (const SynthScene& scene : scenes) {
    const SurrogateFeatureField field =
        make_feature_field(scene.width, scene.height, scene.boundaries(), cfg.feature_scale);
    for (const TextInstance& inst : scene.instances) {
      const Contour start = sample_and_sort(inst.kernel, cfg.n_vertices);
      sum += boundary_error(deform_contour(net, start, field, cfg.dce_iterations), inst.boundary);
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

}  // namespace dke
